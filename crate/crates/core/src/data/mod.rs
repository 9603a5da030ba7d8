//! Synthetic word-segment corpus: seeded lexicon, character-driven acoustic
//! rendering, persistence and class-balanced multi-view batches.

mod dataset;
mod io;
mod lexicon;
mod render;
mod sampler;

pub use dataset::{generate_dataset, Dataset, DatasetSpec, Item, Split};
pub use io::{load_dataset, save_dataset, DATASET_MAGIC, DATASET_VERSION};
pub use lexicon::{build_lexicon, count_strings, Lexicon};
pub use render::{render_instance, PrototypeTable, RenderParams};
pub use sampler::{sample_batch, MultiViewBatch, RESAMPLE_CAP};

use crate::encoders::EncoderError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot draw {requested} distinct words: only {available} strings exist")]
    LexiconTooSmall { requested: usize, available: u128 },
    #[error("invalid dataset specification: {0}")]
    InvalidSpec(String),
    #[error("symbol {0} has no prototype")]
    UnknownSymbol(u32),
    #[error("batch of {classes} classes x {per_class} instances cannot be drawn: {reason}")]
    BatchUnavailable {
        classes: usize,
        per_class: usize,
        reason: String,
    },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed dataset file: {0}")]
    Format(String),
}

pub(crate) use crate::seed::stream_rng;
