//! Synthetic families of latent spaces with known ground truth.
//!
//! Every space in a family is a view of one shared sample matrix Z through a
//! column-orthonormal basis, a global scale, and a translation, plus optional
//! independent Gaussian noise:
//!
//! ```text
//! X_i = (Z + eps_i) · B_iᵀ · s_i + 1 · t_iᵀ,     B_iᵀ B_i = I
//! ```
//!
//! Spaces therefore differ by exactly the transformation class the
//! translation pipeline assumes, which makes the family a ground-truth
//! oracle: with zero noise a translated space must match its materialized
//! counterpart up to numerics.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::anchors::{split_seed, ParallelAnchors};
use crate::error::{IrpError, Result};
use crate::spaces::EmbeddingMatrix;

/// One space of a [`SyntheticFamily`].
#[derive(Debug, Clone)]
pub struct SpaceSpec {
    /// d_i-by-d0 matrix with orthonormal columns; maps ground truth into the
    /// space as `z · basisᵀ`.
    pub basis: DMatrix<f64>,
    /// Global scale, strictly positive.
    pub scale: f64,
    /// Per-space translation vector (length d_i).
    pub translation: DVector<f64>,
    /// Seed of the per-space noise stream.
    pub noise_seed: u64,
}

/// Shared ground truth plus per-space similarity transforms.
#[derive(Debug, Clone)]
pub struct SyntheticFamily {
    /// The n-by-d0 ground-truth sample matrix.
    pub ground_truth: EmbeddingMatrix,
    pub spaces: Vec<SpaceSpec>,
    /// Class ids, present when the family was generated with more than one
    /// class.
    pub labels: Option<Vec<usize>>,
    /// Row indices shared by all spaces as parallel anchors.
    pub anchor_indices: Vec<usize>,
    /// Standard deviation of the per-space noise.
    pub noise_sigma: f64,
}

/// Everything a single space materializes to.
#[derive(Debug, Clone)]
pub struct Materialized {
    pub embeddings: EmbeddingMatrix,
    pub anchors: EmbeddingMatrix,
    pub labels: Option<Vec<usize>>,
}

/// Parameters for [`generate_family`].
#[derive(Debug, Clone)]
pub struct FamilyParams {
    pub n: usize,
    pub d0: usize,
    pub space_dims: Vec<usize>,
    pub sigma: f64,
    pub num_classes: usize,
    pub k_anchors: usize,
    pub seed: u64,
}

/// Draws a d_out-by-d_in matrix with orthonormal columns.
///
/// QR of a seeded Gaussian matrix with the signs of diag(R) forced positive,
/// so the draw is canonical and reproducible.
pub fn random_orthogonal(d_in: usize, d_out: usize, seed: u64) -> Result<DMatrix<f64>> {
    if d_in == 0 || d_out < d_in {
        return Err(IrpError::InvalidShape(format!(
            "need d_out >= d_in >= 1, got {d_out} and {d_in}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussian = DMatrix::from_fn(d_out, d_in, |_, _| StandardNormal.sample(&mut rng));
    let qr = gaussian.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d_in {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

// Fixed seed streams for the independently drawn parts of a family.
const STREAM_GROUND_TRUTH: u64 = 0;
const STREAM_CLASS_MEANS: u64 = 1;
const STREAM_ANCHOR_INDICES: u64 = 2;
const STREAM_SCALES: u64 = 3;
const STREAM_TRANSLATIONS: u64 = 4;
const STREAM_BASIS_BASE: u64 = 1_000;
const STREAM_NOISE_BASE: u64 = 2_000;

/// Class means sit on orthonormal directions at pairwise distance
/// 6 (six blob standard deviations), so per-space heads can reach
/// near-perfect accuracy and stitching degradation stays measurable.
const CLASS_MEAN_DISTANCE: f64 = 6.0;

/// Generates a fully seeded family. Ground truth is one isotropic Gaussian
/// when `num_classes == 1` and `num_classes` separated Gaussian blobs
/// otherwise; anchors are drawn without replacement from the sample rows.
pub fn generate_family(params: &FamilyParams) -> Result<SyntheticFamily> {
    let FamilyParams {
        n,
        d0,
        ref space_dims,
        sigma,
        num_classes,
        k_anchors,
        seed,
    } = *params;

    if n < 1 || d0 < 2 {
        return Err(IrpError::InvalidShape(format!(
            "need n >= 1 and d0 >= 2, got n={n}, d0={d0}"
        )));
    }
    if space_dims.is_empty() {
        return Err(IrpError::InvalidShape("no space dimensions given".into()));
    }
    if let Some(&bad) = space_dims.iter().find(|&&d| d < d0) {
        return Err(IrpError::InvalidShape(format!(
            "space dimension {bad} is below the ground-truth dimension {d0}"
        )));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(IrpError::InvalidParameter(format!(
            "sigma must be a finite non-negative value, got {sigma}"
        )));
    }
    if num_classes < 1 {
        return Err(IrpError::InvalidParameter("num_classes must be >= 1".into()));
    }
    if num_classes > 1 && (num_classes > d0 || num_classes > n) {
        return Err(IrpError::InvalidShape(format!(
            "{num_classes} classes do not fit n={n} samples of dimension {d0}"
        )));
    }
    if k_anchors < 2 || k_anchors > n {
        return Err(IrpError::InvalidShape(format!(
            "need 2 <= k_anchors <= n, got k_anchors={k_anchors}, n={n}"
        )));
    }

    let mut z_rng = ChaCha8Rng::seed_from_u64(split_seed(seed, STREAM_GROUND_TRUTH));
    let mut z = DMatrix::from_fn(n, d0, |_, _| StandardNormal.sample(&mut z_rng));

    let labels = if num_classes > 1 {
        let directions =
            random_orthogonal(num_classes, d0, split_seed(seed, STREAM_CLASS_MEANS))?;
        let radius = CLASS_MEAN_DISTANCE / std::f64::consts::SQRT_2;
        let labels: Vec<usize> = (0..n).map(|i| i % num_classes).collect();
        for (i, &label) in labels.iter().enumerate() {
            let mean = directions.column(label) * radius;
            let mut row = z.row_mut(i);
            row += mean.transpose();
        }
        Some(labels)
    } else {
        None
    };

    let mut idx_rng = ChaCha8Rng::seed_from_u64(split_seed(seed, STREAM_ANCHOR_INDICES));
    let anchor_indices = rand::seq::index::sample(&mut idx_rng, n, k_anchors).into_vec();

    let mut scale_rng = ChaCha8Rng::seed_from_u64(split_seed(seed, STREAM_SCALES));
    let mut shift_rng = ChaCha8Rng::seed_from_u64(split_seed(seed, STREAM_TRANSLATIONS));
    let mut spaces = Vec::with_capacity(space_dims.len());
    for (i, &dim) in space_dims.iter().enumerate() {
        let basis = random_orthogonal(d0, dim, split_seed(seed, STREAM_BASIS_BASE + i as u64))?;
        let scale = scale_rng.random_range(0.5..2.0);
        let translation = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut shift_rng));
        spaces.push(SpaceSpec {
            basis,
            scale,
            translation,
            noise_seed: split_seed(seed, STREAM_NOISE_BASE + i as u64),
        });
    }

    Ok(SyntheticFamily {
        ground_truth: EmbeddingMatrix::new(z)?,
        spaces,
        labels,
        anchor_indices,
        noise_sigma: sigma,
    })
}

/// Deterministically reconstructs one space of the family.
pub fn materialize(family: &SyntheticFamily, space_index: usize) -> Result<Materialized> {
    let spec = family.spaces.get(space_index).ok_or_else(|| {
        IrpError::InvalidShape(format!(
            "space index {space_index} out of bounds for {} spaces",
            family.spaces.len()
        ))
    })?;
    let mut z = family.ground_truth.data().clone();
    if family.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.noise_seed);
        let sigma = family.noise_sigma;
        let noise = DMatrix::from_fn(z.nrows(), z.ncols(), |_, _| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g * sigma
        });
        z += noise;
    }
    let mut x = z * spec.basis.transpose() * spec.scale;
    let shift = spec.translation.transpose();
    for i in 0..x.nrows() {
        let mut row = x.row_mut(i);
        row += &shift;
    }
    let embeddings = EmbeddingMatrix::new(x)?;
    let anchors = embeddings.select_rows(&family.anchor_indices)?;
    Ok(Materialized {
        embeddings,
        anchors,
        labels: family.labels.clone(),
    })
}

impl SyntheticFamily {
    /// Canonical id of space `i` for use with [`ParallelAnchors`].
    pub fn space_id(i: usize) -> String {
        format!("space{i}")
    }

    /// Materializes every space's anchors into one [`ParallelAnchors`].
    pub fn parallel_anchors(&self) -> Result<ParallelAnchors> {
        let mut entries = Vec::with_capacity(self.spaces.len());
        for i in 0..self.spaces.len() {
            entries.push((Self::space_id(i), materialize(self, i)?.anchors));
        }
        ParallelAnchors::new(entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relative::relative_encode;
    use crate::spaces::{center_normalize, compute_stats};

    fn two_space_params(sigma: f64, seed: u64) -> FamilyParams {
        FamilyParams {
            n: 64,
            d0: 8,
            space_dims: vec![10, 12],
            sigma,
            num_classes: 1,
            k_anchors: 24,
            seed,
        }
    }

    // Frobenius distance between the two spaces' relative encodings over
    // their parallel anchors, after the standard normalization.
    fn cross_space_discrepancy(family: &SyntheticFamily) -> f64 {
        let mut encodings = Vec::new();
        for i in 0..2 {
            let m = materialize(family, i).unwrap();
            let stats = compute_stats(&m.anchors).unwrap();
            let x_unit = center_normalize(&m.embeddings, &stats).unwrap();
            let a_unit = center_normalize(&m.anchors, &stats).unwrap();
            encodings.push(relative_encode(&x_unit, &a_unit).unwrap());
        }
        (encodings[0].data() - encodings[1].data()).norm()
    }

    #[test]
    fn orthogonal_square_is_orthogonal() {
        let q = random_orthogonal(6, 6, 1).unwrap();
        let eye = DMatrix::<f64>::identity(6, 6);
        assert!((q.transpose() * &q - &eye).norm() <= 1e-10);
        assert!((&q * q.transpose() - &eye).norm() <= 1e-10);
        assert!((q.determinant().abs() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn orthogonal_rectangular_columns_are_unit() {
        let q = random_orthogonal(8, 32, 2).unwrap();
        assert_eq!((q.nrows(), q.ncols()), (32, 8));
        for j in 0..8 {
            assert!((q.column(j).norm() - 1.0).abs() <= 1e-12);
        }
        let eye = DMatrix::<f64>::identity(8, 8);
        assert!((q.transpose() * &q - eye).norm() <= 1e-10);
    }

    #[test]
    fn orthogonal_is_deterministic_and_sign_fixed() {
        let a = random_orthogonal(4, 4, 3).unwrap();
        let b = random_orthogonal(4, 4, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn family_basis_satisfies_isometry_invariant() {
        let family = generate_family(&two_space_params(0.0, 5)).unwrap();
        for spec in &family.spaces {
            let d0 = spec.basis.ncols();
            let eye = DMatrix::<f64>::identity(d0, d0);
            assert!((spec.basis.transpose() * &spec.basis - eye).norm() <= 1e-10);
            assert!(spec.scale > 0.0);
        }
    }

    #[test]
    fn noiseless_spaces_share_relative_encodings() {
        let family = generate_family(&two_space_params(0.0, 7)).unwrap();
        assert!(cross_space_discrepancy(&family) <= 1e-8);
    }

    #[test]
    fn space_shapes() {
        let family = generate_family(&two_space_params(0.0, 9)).unwrap();
        let a = materialize(&family, 0).unwrap();
        let b = materialize(&family, 1).unwrap();
        assert_eq!((a.embeddings.rows(), a.embeddings.cols()), (64, 10));
        assert_eq!((b.embeddings.rows(), b.embeddings.cols()), (64, 12));
        assert_eq!(a.anchors.rows(), 24);
    }

    #[test]
    fn noise_increases_discrepancy_monotonically() {
        for seed in 0..5 {
            let clean = generate_family(&two_space_params(0.0, 100 + seed)).unwrap();
            let noisy = generate_family(&two_space_params(0.5, 100 + seed)).unwrap();
            assert!(
                cross_space_discrepancy(&noisy) > cross_space_discrepancy(&clean),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn identity_transform_reproduces_ground_truth() {
        let z = EmbeddingMatrix::from_rows(3, 2, &[1.0, 2.0, -0.5, 0.25, 3.0, -1.0]).unwrap();
        let family = SyntheticFamily {
            ground_truth: z.clone(),
            spaces: vec![SpaceSpec {
                basis: DMatrix::identity(2, 2),
                scale: 1.0,
                translation: DVector::zeros(2),
                noise_seed: 0,
            }],
            labels: None,
            anchor_indices: vec![0, 2],
            noise_sigma: 0.0,
        };
        let m = materialize(&family, 0).unwrap();
        assert_eq!(m.embeddings, z);
    }

    #[test]
    fn anchors_are_exactly_indexed_rows() {
        let family = generate_family(&two_space_params(0.3, 13)).unwrap();
        let m = materialize(&family, 0).unwrap();
        for (pos, &idx) in family.anchor_indices.iter().enumerate() {
            for j in 0..m.embeddings.cols() {
                assert_eq!(m.anchors.data()[(pos, j)], m.embeddings.data()[(idx, j)]);
            }
        }
    }

    #[test]
    fn materialization_is_deterministic() {
        let family = generate_family(&two_space_params(0.2, 15)).unwrap();
        let a = materialize(&family, 1).unwrap();
        let b = materialize(&family, 1).unwrap();
        assert_eq!(a.embeddings, b.embeddings);
        assert_eq!(a.anchors, b.anchors);
    }

    #[test]
    fn class_blobs_are_balanced_and_separated() {
        let params = FamilyParams {
            n: 200,
            d0: 16,
            space_dims: vec![16],
            sigma: 0.0,
            num_classes: 4,
            k_anchors: 32,
            seed: 17,
        };
        let family = generate_family(&params).unwrap();
        let labels = family.labels.as_ref().unwrap();
        for c in 0..4 {
            assert_eq!(labels.iter().filter(|&&l| l == c).count(), 50);
        }
        // Class means in ground truth sit ~6 apart.
        let z = family.ground_truth.data();
        let mut means = vec![DVector::<f64>::zeros(16); 4];
        for (i, &l) in labels.iter().enumerate() {
            means[l] += z.row(i).transpose();
        }
        for m in means.iter_mut() {
            *m /= 50.0;
        }
        for a in 0..4 {
            for b in (a + 1)..4 {
                let dist = (&means[a] - &means[b]).norm();
                assert!((dist - 6.0).abs() < 1.0, "means {a},{b} at distance {dist}");
            }
        }
    }

    #[test]
    fn rejects_invalid_shapes() {
        let mut p = two_space_params(0.0, 1);
        p.space_dims = vec![4]; // below d0 = 8
        assert!(matches!(
            generate_family(&p),
            Err(IrpError::InvalidShape(_))
        ));
        let mut p = two_space_params(0.0, 1);
        p.k_anchors = 1000;
        assert!(matches!(
            generate_family(&p),
            Err(IrpError::InvalidShape(_))
        ));
    }
}
