//! Embedding containers and the anchor-statistics normalization pipeline.
//!
//! Translation starts and ends here: samples are centered on the anchor mean
//! and rescaled to unit norm before encoding, and decoded samples are mapped
//! back by multiplying with the target anchors' mean norm and re-adding the
//! target center. Statistics always come from anchors, never from the sample
//! set, because at translation time only the target-space anchors exist.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{IrpError, Result};

/// Absolute threshold below which a norm or spread counts as degenerate.
pub const DEGENERACY_EPS: f64 = 1e-12;

/// Tolerance for the unit-norm check on normalized matrices.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// A dense n-by-d matrix whose rows are sample encodings of one latent space.
///
/// All entries are finite, `n >= 1` and `d >= 2`. Arithmetic is f64
/// throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: DMatrix<f64>,
}

impl EmbeddingMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() < 1 || data.ncols() < 2 {
            return Err(IrpError::InvalidShape(format!(
                "embedding matrix must be at least 1x2, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(IrpError::InvalidShape(
                "embedding matrix contains non-finite entries".into(),
            ));
        }
        Ok(Self { data })
    }

    /// Builds from row-major values.
    pub fn from_rows(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(IrpError::InvalidShape(format!(
                "expected {} values for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, values))
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    /// Copies the entries out in row-major order.
    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.data[(i, j)]);
            }
        }
        out
    }

    /// True when every row has unit L2 norm within [`UNIT_NORM_TOL`].
    pub fn is_unit_normalized(&self) -> bool {
        (0..self.rows()).all(|i| (self.data.row(i).norm() - 1.0).abs() <= UNIT_NORM_TOL)
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(IrpError::InvalidShape("empty row selection".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.rows()) {
            return Err(IrpError::InvalidShape(format!(
                "row index {} out of bounds for {} rows",
                bad,
                self.rows()
            )));
        }
        Self::new(self.data.select_rows(indices.iter()))
    }
}

/// Anchor-derived statistics of one space: the anchor centroid and the mean
/// L2 norm of the centered anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceStats {
    center: DVector<f64>,
    mean_norm: f64,
}

impl SpaceStats {
    pub fn new(center: DVector<f64>, mean_norm: f64) -> Result<Self> {
        if !mean_norm.is_finite() || mean_norm <= 0.0 {
            return Err(IrpError::InvalidParameter(format!(
                "mean_norm must be positive and finite, got {mean_norm}"
            )));
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(IrpError::InvalidParameter(
                "center contains non-finite entries".into(),
            ));
        }
        Ok(Self { center, mean_norm })
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn mean_norm(&self) -> f64 {
        self.mean_norm
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

/// Derives [`SpaceStats`] from raw anchors: the column-wise mean and the mean
/// norm of the centered rows.
pub fn compute_stats(raw_anchors: &EmbeddingMatrix) -> Result<SpaceStats> {
    if raw_anchors.rows() < 2 {
        return Err(IrpError::InvalidShape(format!(
            "need at least 2 anchor rows to derive statistics, got {}",
            raw_anchors.rows()
        )));
    }
    let center: RowDVector<f64> = raw_anchors.data.row_mean();
    let mean_norm = (0..raw_anchors.rows())
        .map(|i| (raw_anchors.data.row(i) - &center).norm())
        .sum::<f64>()
        / raw_anchors.rows() as f64;
    if mean_norm <= DEGENERACY_EPS {
        return Err(IrpError::DegenerateSpace { mean_norm });
    }
    Ok(SpaceStats {
        center: center.transpose(),
        mean_norm,
    })
}

/// Subtracts the anchor center from every row, then rescales each row to unit
/// norm. The output satisfies [`EmbeddingMatrix::is_unit_normalized`].
pub fn center_normalize(m: &EmbeddingMatrix, stats: &SpaceStats) -> Result<EmbeddingMatrix> {
    if m.cols() != stats.dim() {
        return Err(IrpError::ShapeMismatch(format!(
            "matrix has {} columns but stats describe a {}-dimensional space",
            m.cols(),
            stats.dim()
        )));
    }
    let center = stats.center.transpose();
    let mut out = m.data.clone();
    for i in 0..out.nrows() {
        let mut row = out.row_mut(i);
        row -= &center;
        let norm = row.norm();
        if norm <= DEGENERACY_EPS {
            return Err(IrpError::ZeroNormRow { row: i });
        }
        row /= norm;
    }
    Ok(EmbeddingMatrix { data: out })
}

/// Inverse of [`center_normalize`]: scales every row by the mean norm and
/// re-adds the center.
pub fn denormalize(m_unit: &EmbeddingMatrix, stats: &SpaceStats) -> Result<EmbeddingMatrix> {
    if m_unit.cols() != stats.dim() {
        return Err(IrpError::ShapeMismatch(format!(
            "matrix has {} columns but stats describe a {}-dimensional space",
            m_unit.cols(),
            stats.dim()
        )));
    }
    debug_assert!(m_unit.is_unit_normalized(), "denormalize expects unit rows");
    let center = stats.center.transpose();
    let mut out = m_unit.data.clone();
    for i in 0..out.nrows() {
        let mut row = out.row_mut(i);
        row *= stats.mean_norm;
        row += &center;
    }
    Ok(EmbeddingMatrix { data: out })
}

/// Rescales every row of `data` to unit norm, failing on degenerate rows.
pub(crate) fn unit_rows(data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = data.clone();
    for i in 0..out.nrows() {
        let mut row = out.row_mut(i);
        let norm = row.norm();
        if norm <= DEGENERACY_EPS {
            return Err(IrpError::ZeroNormRow { row: i });
        }
        row /= norm;
    }
    Ok(out)
}

/// L2 norm of every row.
pub fn row_norms(m: &EmbeddingMatrix) -> Vec<f64> {
    (0..m.rows()).map(|i| m.data.row(i).norm()).collect()
}

/// One histogram bucket over `[lo, hi)` (the last bucket includes its upper
/// edge).
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Summary statistics and histogram of a norm vector.
#[derive(Debug, Clone)]
pub struct NormSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    pub bins: Vec<HistogramBin>,
}

impl NormSummary {
    /// Summarizes a non-empty score vector into `bin_count` equal-width bins.
    pub fn from_values(values: &[f64], bin_count: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(IrpError::InvalidShape("empty value vector".into()));
        }
        let n = values.len() as f64;
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();

        let bin_count = bin_count.max(1);
        let span = max - min;
        let mut bins: Vec<HistogramBin> = (0..bin_count)
            .map(|b| HistogramBin {
                lo: min + span * b as f64 / bin_count as f64,
                hi: min + span * (b + 1) as f64 / bin_count as f64,
                count: 0,
            })
            .collect();
        for &v in values {
            let idx = if span <= 0.0 {
                0
            } else {
                (((v - min) / span * bin_count as f64) as usize).min(bin_count - 1)
            };
            bins[idx].count += 1;
        }
        Ok(Self {
            min,
            max,
            mean,
            std,
            bins,
        })
    }

    /// Whether the histogram rises to a single peak and then falls, ignoring
    /// fluctuations below 5% of the tallest bucket.
    pub fn is_unimodal(&self) -> bool {
        let counts: Vec<f64> = self.bins.iter().map(|b| b.count as f64).collect();
        let max = counts.iter().cloned().fold(0.0f64, f64::max);
        if max == 0.0 {
            return true;
        }
        let tol = (0.05 * max).max(1.0);
        (0..counts.len()).any(|peak| {
            let rising = counts[..peak]
                .iter()
                .zip(&counts[1..=peak])
                .all(|(a, b)| *a <= *b + tol);
            let falling = counts[peak..]
                .iter()
                .zip(&counts[peak + 1..])
                .all(|(a, b)| *b <= *a + tol);
            rising && falling
        })
    }
}

/// Convenience wrapper: summary of [`row_norms`].
pub fn norm_summary(m: &EmbeddingMatrix, bin_count: usize) -> NormSummary {
    NormSummary::from_values(&row_norms(m), bin_count).expect("matrix has at least one row")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> EmbeddingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng));
        EmbeddingMatrix::new(data).unwrap()
    }

    // Independent loop-based recomputation of compute_stats.
    fn brute_force_stats(m: &EmbeddingMatrix) -> (Vec<f64>, f64) {
        let (n, d) = (m.rows(), m.cols());
        let mut center = vec![0.0; d];
        for i in 0..n {
            for j in 0..d {
                center[j] += m.data()[(i, j)];
            }
        }
        for c in center.iter_mut() {
            *c /= n as f64;
        }
        let mut mean_norm = 0.0;
        for i in 0..n {
            let mut sq = 0.0;
            for j in 0..d {
                let v = m.data()[(i, j)] - center[j];
                sq += v * v;
            }
            mean_norm += sq.sqrt();
        }
        (center, mean_norm / n as f64)
    }

    #[test]
    fn stats_symmetric_pair() {
        let m = EmbeddingMatrix::from_rows(2, 2, &[1.0, 0.0, 3.0, 0.0]).unwrap();
        let stats = compute_stats(&m).unwrap();
        assert_eq!(stats.center().as_slice(), &[2.0, 0.0]);
        assert_relative_eq!(stats.mean_norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn stats_zero_spread_is_degenerate() {
        let m = EmbeddingMatrix::from_rows(3, 2, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            compute_stats(&m),
            Err(IrpError::DegenerateSpace { .. })
        ));
    }

    #[test]
    fn stats_match_brute_force() {
        let m = gaussian_matrix(100, 16, 42);
        let stats = compute_stats(&m).unwrap();
        let (center, mean_norm) = brute_force_stats(&m);
        for (a, b) in stats.center().iter().zip(&center) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert!((stats.mean_norm() - mean_norm).abs() <= 1e-12);
    }

    #[test]
    fn stats_permutation_invariant() {
        let m = gaussian_matrix(20, 8, 7);
        let reversed: Vec<usize> = (0..20).rev().collect();
        let shuffled = m.select_rows(&reversed).unwrap();
        let a = compute_stats(&m).unwrap();
        let b = compute_stats(&shuffled).unwrap();
        assert!((a.mean_norm() - b.mean_norm()).abs() <= 1e-12);
        for (x, y) in a.center().iter().zip(b.center().iter()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn center_normalize_axis_aligned() {
        let m = EmbeddingMatrix::from_rows(1, 2, &[5.0, 2.0]).unwrap();
        let stats = SpaceStats::new(DVector::from_vec(vec![2.0, 2.0]), 1.0).unwrap();
        let out = center_normalize(&m, &stats).unwrap();
        assert_eq!(out.to_row_major(), vec![1.0, 0.0]);
    }

    #[test]
    fn center_normalize_degenerate_row() {
        let m = EmbeddingMatrix::from_rows(2, 2, &[2.0, 2.0, 3.0, 4.0]).unwrap();
        let stats = SpaceStats::new(DVector::from_vec(vec![2.0, 2.0]), 1.0).unwrap();
        assert!(matches!(
            center_normalize(&m, &stats),
            Err(IrpError::ZeroNormRow { row: 0 })
        ));
    }

    #[test]
    fn center_normalize_matches_per_row_oracle() {
        let m = gaussian_matrix(50, 8, 3);
        let stats = compute_stats(&m).unwrap();
        let out = center_normalize(&m, &stats).unwrap();
        assert!(out.is_unit_normalized());
        for i in 0..m.rows() {
            let mut centered = vec![0.0; 8];
            for j in 0..8 {
                centered[j] = m.data()[(i, j)] - stats.center()[j];
            }
            let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
            for j in 0..8 {
                assert!((out.data()[(i, j)] - centered[j] / norm).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn denormalize_trivial() {
        let m = EmbeddingMatrix::from_rows(1, 2, &[1.0, 0.0]).unwrap();
        let stats = SpaceStats::new(DVector::from_vec(vec![1.0, 1.0]), 2.0).unwrap();
        let out = denormalize(&m, &stats).unwrap();
        assert_eq!(out.to_row_major(), vec![3.0, 1.0]);
    }

    #[test]
    fn round_trip_preserves_direction() {
        let m = gaussian_matrix(40, 6, 11);
        let stats = compute_stats(&m).unwrap();
        let unit = center_normalize(&m, &stats).unwrap();
        let back = denormalize(&unit, &stats).unwrap();
        for i in 0..m.rows() {
            let orig = m.data().row(i) - stats.center().transpose();
            let rec = back.data().row(i) - stats.center().transpose();
            let cos = orig.dot(&rec) / (orig.norm() * rec.norm());
            assert!((cos - 1.0).abs() <= 1e-10, "row {i}: cosine {cos}");
        }
    }

    #[test]
    fn row_norms_pythagorean() {
        let m = EmbeddingMatrix::from_rows(2, 2, &[3.0, 4.0, 0.0, 1.0]).unwrap();
        assert_eq!(row_norms(&m), vec![5.0, 1.0]);
    }

    #[test]
    fn row_norms_unit_input() {
        let m = gaussian_matrix(30, 5, 9);
        let stats = compute_stats(&m).unwrap();
        let unit = center_normalize(&m, &stats).unwrap();
        for norm in row_norms(&unit) {
            assert!((norm - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn norm_summary_close_to_brute_force_mean() {
        let m = gaussian_matrix(1000, 64, 21);
        let summary = norm_summary(&m, 32);
        let brute: f64 = (0..m.rows())
            .map(|i| {
                (0..m.cols())
                    .map(|j| m.data()[(i, j)].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum::<f64>()
            / m.rows() as f64;
        assert!((summary.mean - brute).abs() / brute <= 0.05);
        assert_eq!(summary.bins.iter().map(|b| b.count).sum::<usize>(), 1000);
    }

    #[test]
    fn histogram_handles_constant_values() {
        let s = NormSummary::from_values(&[2.0, 2.0, 2.0], 8).unwrap();
        assert_eq!(s.bins[0].count, 3);
        assert!(s.is_unimodal());
    }

    #[test]
    fn unimodal_detects_two_modes() {
        let mut values = Vec::new();
        for _ in 0..400 {
            values.push(1.0);
        }
        for _ in 0..400 {
            values.push(9.0);
        }
        let s = NormSummary::from_values(&values, 16).unwrap();
        assert!(!s.is_unimodal());
    }

    proptest! {
        #[test]
        fn center_normalize_always_unit(rows in 1usize..12, cols in 2usize..9, seed in 0u64..500) {
            let m = gaussian_matrix(rows.max(2), cols, seed);
            let stats = compute_stats(&m).unwrap();
            let unit = center_normalize(&m, &stats).unwrap();
            prop_assert!(unit.is_unit_normalized());
        }
    }
}
