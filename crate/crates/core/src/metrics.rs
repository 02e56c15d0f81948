//! Evaluation metrics shared by reports and tests.

use crate::error::{IrpError, Result};
use crate::spaces::{EmbeddingMatrix, DEGENERACY_EPS};

/// Aggregate of a score vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl MetricSummary {
    pub fn from_scores(scores: &[f64]) -> Result<Self> {
        if scores.is_empty() {
            return Err(IrpError::InvalidShape("empty score vector".into()));
        }
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(Self {
            mean,
            std: var.sqrt(),
            min: scores.iter().cloned().fold(f64::INFINITY, f64::min),
            max: scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Per-row cosine similarity between two equally shaped matrices.
pub fn mean_cosine(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<MetricSummary> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(IrpError::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let mut scores = Vec::with_capacity(a.rows());
    for i in 0..a.rows() {
        let ra = a.data().row(i);
        let rb = b.data().row(i);
        let na = ra.norm();
        let nb = rb.norm();
        if na <= DEGENERACY_EPS || nb <= DEGENERACY_EPS {
            return Err(IrpError::ZeroNormRow { row: i });
        }
        scores.push(ra.dot(&rb) / (na * nb));
    }
    MetricSummary::from_scores(&scores)
}

/// Sample Pearson correlation coefficient, clamped to `[-1, 1]`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(IrpError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(IrpError::InvalidShape(
            "pearson needs at least 2 observations".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    // Rounding of the mean turns a constant vector into noise around 1e-16;
    // treat anything at that level as zero variance.
    let scale_x = x.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
    let scale_y = y.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
    if sxx <= (1e-12 * scale_x).powi(2) * n || syy <= (1e-12 * scale_y).powi(2) * n {
        return Err(IrpError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Fraction of exact label matches.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(IrpError::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(IrpError::InvalidShape("empty label vectors".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / predicted.len() as f64)
}
