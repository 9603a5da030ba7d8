use super::params::EncoderParams;
use super::EncoderError;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk parameter snapshot. Floats are written in shortest round-trip
/// form, so loading restores every bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    /// Epoch the snapshot was taken after; 0 for an untrained model.
    pub epoch: usize,
    pub params: EncoderParams,
}

impl Checkpoint {
    pub fn new(params: EncoderParams, epoch: usize) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            epoch,
            params,
        }
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<(), EncoderError> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        serde_json::to_writer(&mut w, checkpoint)
            .map_err(|e| EncoderError::Format(e.to_string()))?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, EncoderError> {
    let r = BufReader::new(File::open(path)?);
    let ck: Checkpoint =
        serde_json::from_reader(r).map_err(|e| EncoderError::Format(e.to_string()))?;
    if ck.version != CHECKPOINT_VERSION {
        return Err(EncoderError::Format(format!(
            "unsupported version {}",
            ck.version
        )));
    }
    ck.params.config.validate()?;
    let p = &ck.params;
    let c = &p.config;
    let shapes_ok = p.acoustic.input_dim() == c.feature_dim
        && p.acoustic.layers.len() == c.layers
        && p.acoustic.output_dim() == c.embedding_dim
        && p.text.dictionary.dim() == (c.alphabet_size, c.char_dim)
        && p.text.net.input_dim() == c.char_dim
        && p.text.net.output_dim() == c.embedding_dim;
    if !shapes_ok {
        return Err(EncoderError::Format(
            "parameter shapes disagree with the configuration".into(),
        ));
    }
    if !p.all_finite() {
        return Err(EncoderError::NonFinite("checkpoint"));
    }
    Ok(ck)
}
