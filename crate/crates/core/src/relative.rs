//! Relative encoding, its pseudo-inverse decoding, and conditioning
//! diagnostics.
//!
//! A unit-normalized sample is encoded as its dot products against a
//! unit-normalized anchor matrix, i.e. as cosine similarities. Decoding into
//! another space multiplies by the Moore-Penrose pseudo-inverse of that
//! space's (transposed) anchor matrix. The anchor matrix of a pruned subset
//! is rectangular and possibly ill-conditioned, so a relative singular-value
//! cutoff guards the inversion; the condition number of the inverted matrix
//! is the stability diagnostic that motivates anchor pruning.

use nalgebra::DMatrix;

use crate::error::{IrpError, Result};
use crate::spaces::{unit_rows, EmbeddingMatrix};

/// Default relative singular-value cutoff for the pseudo-inverse.
pub const DEFAULT_CUTOFF_RATIO: f64 = 1e-10;

/// Iteration cap for the SVD; exceeding it reports [`IrpError::SvdFailure`].
const SVD_MAX_ITER: usize = 10_000;

/// An n-by-k matrix of relative coordinates: row i holds the cosine
/// similarities of sample i against k anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeRepresentation {
    data: DMatrix<f64>,
}

impl RelativeRepresentation {
    pub fn new(data: DMatrix<f64>) -> Self {
        Self { data }
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    /// Number of anchors the representation was computed against.
    pub fn anchors(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }
}

/// Projects unit-normalized samples onto unit-normalized anchors:
/// `X · Aᵀ`.
pub fn relative_encode(
    x_unit: &EmbeddingMatrix,
    a_unit: &EmbeddingMatrix,
) -> Result<RelativeRepresentation> {
    if x_unit.cols() != a_unit.cols() {
        return Err(IrpError::ShapeMismatch(format!(
            "samples have dimension {} but anchors have dimension {}",
            x_unit.cols(),
            a_unit.cols()
        )));
    }
    debug_assert!(x_unit.is_unit_normalized(), "samples must be unit rows");
    debug_assert!(a_unit.is_unit_normalized(), "anchors must be unit rows");
    Ok(RelativeRepresentation {
        data: x_unit.data() * a_unit.data().transpose(),
    })
}

struct SingularValues {
    values: Vec<f64>,
}

fn singular_values(m: &DMatrix<f64>) -> Result<SingularValues> {
    let svd = m
        .clone()
        .try_svd(false, false, f64::EPSILON, SVD_MAX_ITER)
        .ok_or(IrpError::SvdFailure)?;
    Ok(SingularValues {
        values: svd.singular_values.iter().cloned().collect(),
    })
}

/// Moore-Penrose pseudo-inverse via SVD. Singular values below
/// `cutoff_ratio * sigma_max` are treated as zero.
pub fn pseudo_inverse(m: &DMatrix<f64>, cutoff_ratio: f64) -> Result<DMatrix<f64>> {
    if !(cutoff_ratio > 0.0 && cutoff_ratio < 1.0) {
        return Err(IrpError::InvalidParameter(format!(
            "cutoff_ratio must lie in (0, 1), got {cutoff_ratio}"
        )));
    }
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or(IrpError::SvdFailure)?;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if sigma_max == 0.0 {
        return Ok(DMatrix::zeros(m.ncols(), m.nrows()));
    }
    // pinv = V * diag(1/sigma) * Uᵀ, with small sigmas dropped.
    let mut v = v_t.transpose();
    for (j, sigma) in svd.singular_values.iter().enumerate() {
        let inv = if *sigma < cutoff_ratio * sigma_max {
            0.0
        } else {
            1.0 / sigma
        };
        let mut col = v.column_mut(j);
        col *= inv;
    }
    Ok(v * u.transpose())
}

/// Decodes relative coordinates into the absolute space of `a_unit`:
/// `R · (Aᵀ)⁺`, with every decoded row re-normalized to unit norm. The norm
/// of a decoded row carries numerical noise only (relative encoding is
/// scale-free), so it is discarded.
pub fn relative_decode(
    r: &RelativeRepresentation,
    a_unit: &EmbeddingMatrix,
    cutoff_ratio: f64,
) -> Result<EmbeddingMatrix> {
    if r.anchors() != a_unit.rows() {
        return Err(IrpError::ShapeMismatch(format!(
            "representation uses {} anchors but {} were given",
            r.anchors(),
            a_unit.rows()
        )));
    }
    debug_assert!(a_unit.is_unit_normalized(), "anchors must be unit rows");
    let inv = pseudo_inverse(&a_unit.data().transpose(), cutoff_ratio)?;
    let raw = &r.data * inv;
    EmbeddingMatrix::new(unit_rows(&raw)?)
}

/// Ratio of extreme singular values of the anchor matrix. Returns infinity
/// when the smallest singular value falls below `DEFAULT_CUTOFF_RATIO` times
/// the largest, i.e. when the pseudo-inverse would truncate it.
pub fn condition_number(a_unit: &EmbeddingMatrix) -> Result<f64> {
    if a_unit.rows() < 2 {
        return Err(IrpError::InvalidShape(
            "condition number needs at least 2 anchor rows".into(),
        ));
    }
    let sv = singular_values(a_unit.data())?;
    let sigma_max = sv.values.iter().cloned().fold(0.0f64, f64::max);
    let sigma_min = sv.values.iter().cloned().fold(f64::INFINITY, f64::min);
    if sigma_max == 0.0 || sigma_min < DEFAULT_CUTOFF_RATIO * sigma_max {
        return Ok(f64::INFINITY);
    }
    Ok(sigma_max / sigma_min)
}
