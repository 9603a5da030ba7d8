//! Adam optimization, the training loop with dev-based model selection, and
//! grids of runs for method comparisons.

mod adam;
mod config;
mod grid;
mod run;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use config::TrainConfig;
pub use grid::{
    grid_run, render_csv, render_table, repeat_seed, run_dir, table, table1, table2, table3,
    table4, GridEntry, GridReport, GridRow, RunSummary, Stat,
};
pub use run::{
    embed_classes, embed_items, evaluate_params, objective_label, train, write_divergence,
    write_json, write_run, Divergence, DivergenceReport, EpochRecord, RunRecord, TrainOutcome,
    CHECKPOINT_FILE, CURVE_FILE, RECORD_FILE, TIMINGS_FILE,
};

use crate::data::DataError;
use crate::encoders::EncoderError;
use crate::eval::EvalError;
use crate::losses::LossError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(
        "training diverged at epoch {} step {} (loss {})",
        .0.report.epoch,
        .0.report.step,
        .0.report.loss
    )]
    Diverged(Box<Divergence>),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
