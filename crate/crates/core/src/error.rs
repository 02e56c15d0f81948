//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IrpError {
    /// All anchor rows coincide; no statistics can be derived from them.
    #[error("degenerate space: anchor rows have near-zero spread (mean norm {mean_norm:.3e})")]
    DegenerateSpace { mean_norm: f64 },

    /// A row that must be normalized has (near-)zero norm.
    #[error("row {row} has near-zero norm and cannot be normalized")]
    ZeroNormRow { row: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// The singular value decomposition did not converge.
    #[error("singular value decomposition did not converge")]
    SvdFailure,

    #[error("unknown space id `{0}`")]
    MissingSpace(String),

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    /// Correlation is undefined on a constant input.
    #[error("zero variance input: correlation is undefined")]
    ZeroVariance,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A serialized model blob failed validation.
    #[error("invalid model blob: {0}")]
    ModelBlob(String),
}

pub type Result<T> = std::result::Result<T, IrpError>;

impl IrpError {
    /// True for failures of the numerical pipeline itself, as opposed to bad
    /// inputs. The CLI maps these to a distinct exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            IrpError::DegenerateSpace { .. }
                | IrpError::ZeroNormRow { .. }
                | IrpError::SvdFailure
                | IrpError::ZeroVariance
        )
    }
}
