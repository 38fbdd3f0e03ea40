//! Small dense networks with hand-written gradients.

mod adam;
pub mod checkpoint;
mod mlp;
mod policy;
mod value_norm;

use thiserror::Error;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, CheckpointError};
pub(crate) use mlp::{column, rows};
pub use mlp::{naive_forward, Cache, Mlp};
pub use policy::{gaussian_logprob, gaussian_sample_and_logprob, GaussianPolicy, PolicyCache};
pub use value_norm::ValueNorm;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("invalid layer sizes {0:?}")]
    Layout(Vec<usize>),
    #[error("{what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("forward cache does not belong to this network")]
    CacheMismatch,
    #[error("non-finite gradient")]
    NonFiniteGradient,
}
