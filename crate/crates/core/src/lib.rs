//! Outlier-robust tensor low-rank representation.

pub mod checks;
pub mod error;
pub mod experiment;
pub mod io;
pub mod pipeline;
pub mod solver;
pub mod solver_missing;
pub mod spectral;
pub mod synth;
pub mod tensor;
pub mod tlinalg;
pub mod transforms;

pub use error::{Result, TlrrError};
pub use tensor::Tensor3;
pub use transforms::{
    apply_transform, build_transform, invert_transform, TransformId, TransformKind, TransformSpec,
    TransformedTensor,
};
