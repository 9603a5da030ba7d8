//! Word-discrimination metrics: average precision over AWE pairs, over
//! AWE/AGWE pairs, and over DTW-aligned raw features.

mod ap;
mod dtw;
mod report;

pub use ap::{
    acoustic_ap, acoustic_ap_sampled, average_precision, crossview_ap, ApResult, ScoredPairSet,
};
pub use dtw::{
    dtw_acoustic_ap, dtw_normalized_cost, dtw_similarity, frame_costs, FRAME_NORM_FLOOR,
};
pub use report::{read_curve, write_curve, CurvePoint, EvalReport, Task};

use crate::math::MathError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("average precision needs at least one positive pair")]
    NoPositives,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("need at least two items, found {0}")]
    TooFewItems(usize),
    #[error("no proxy embedding for class {0}")]
    MissingProxy(usize),
    #[error("more than one proxy embedding for a class")]
    DuplicateProxy,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("score is NaN")]
    NonFinite,
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
