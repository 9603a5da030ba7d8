//! Proxy-based and pair-based metric-learning losses with analytic gradients.

pub mod audit;
pub mod baselines;
pub mod gpw;
pub mod objective;
pub mod partition;
pub mod spec;
pub mod terms;

pub use audit::{finite_difference_audit, AuditReport};
pub use gpw::{
    assemble_gpw, asymmetric_proxy_loss, GpwLoss, LossEvaluation, LossResult, SimilarityGrad,
};
pub use objective::{Method, Objective};
pub use partition::{partition, IndexPartition, SelfPairPolicy};
pub use spec::{asymmetric_grid_cells, FunctionKind, LossSpec};

use crate::math::MathError;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LossError {
    #[error(transparent)]
    Math(#[from] MathError),
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("margin must lie in [0, 2], got {0}")]
    InvalidMargin(f64),
    #[error("invalid loss specification: {0}")]
    InvalidSpec(String),
    #[error("empty loss: {0}")]
    EmptyLoss(&'static str),
    #[error("expected {expected} items, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("objective requires text embeddings")]
    MissingAgwes,
}
