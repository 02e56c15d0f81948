pub mod anchors;
pub mod error;
pub mod metrics;
pub mod relative;
pub mod spaces;
pub mod synth;

pub use anchors::{ParallelAnchors, PrunedSubspace};
pub use error::{IrpError, Result};
pub use relative::RelativeRepresentation;
pub use spaces::{EmbeddingMatrix, SpaceStats};
pub use synth::SyntheticFamily;
