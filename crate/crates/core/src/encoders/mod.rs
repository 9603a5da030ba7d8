//! Acoustic and text encoders with hand-written backpropagation through time.

mod acoustic;
mod checkpoint;
mod gru;
mod params;
mod text;

pub use acoustic::{acoustic_backward, acoustic_forward, acoustic_forward_one, AcousticCache};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use params::{
    init_params, BiGruLayer, EncoderConfig, EncoderGrads, EncoderParams, GruParams, Projection,
    RecurrentParams, TextParams,
};
pub use text::{text_backward, text_forward, text_forward_one, TextCache};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("empty batch")]
    EmptyBatch,
    #[error("symbol {symbol} outside alphabet of size {alphabet}")]
    UnknownSymbol { symbol: u32, alphabet: usize },
    #[error("activation cache does not belong to the current parameters")]
    StaleCache,
    #[error("invalid encoder configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Format(String),
}

/// Whether dropout is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// `T × F` acoustic frames, `T >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSequence(Array2<f64>);

impl FeatureSequence {
    pub fn new(frames: Array2<f64>) -> Result<Self, EncoderError> {
        if frames.nrows() == 0 {
            return Err(EncoderError::EmptySequence);
        }
        if !frames.iter().all(|v| v.is_finite()) {
            return Err(EncoderError::NonFinite("feature sequence"));
        }
        Ok(Self(frames))
    }

    pub fn frames(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn feature_dim(&self) -> usize {
        self.0.ncols()
    }
}

/// Nonempty list of symbol ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CharSequence(Vec<u32>);

impl CharSequence {
    pub fn new(chars: Vec<u32>, alphabet_size: usize) -> Result<Self, EncoderError> {
        if chars.is_empty() {
            return Err(EncoderError::EmptySequence);
        }
        if let Some(&symbol) = chars.iter().find(|&&c| c as usize >= alphabet_size) {
            return Err(EncoderError::UnknownSymbol {
                symbol,
                alphabet: alphabet_size,
            });
        }
        Ok(Self(chars))
    }

    /// Lowercase ASCII letters mapped to `0..26`.
    pub fn from_word(word: &str) -> Result<Self, EncoderError> {
        let chars = word
            .bytes()
            .map(|b| {
                if b.is_ascii_lowercase() {
                    Ok(u32::from(b - b'a'))
                } else {
                    Err(EncoderError::UnknownSymbol {
                        symbol: u32::from(b),
                        alphabet: 26,
                    })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(chars, 26)
    }

    pub fn chars(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}
