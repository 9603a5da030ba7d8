use super::{stream_rng, DataError};
use crate::encoders::FeatureSequence;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// One unit-norm feature vector per symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeTable(Array2<f64>);

impl PrototypeTable {
    /// Prototypes uniform on the unit sphere, drawn from a stream reserved
    /// for them.
    pub fn generate(alphabet_size: usize, feature_dim: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, 1);
        let mut t = Array2::zeros((alphabet_size, feature_dim));
        for mut row in t.rows_mut() {
            loop {
                row.mapv_inplace(|_| -> f64 { StandardNormal.sample(&mut rng) });
                let n = row.dot(&row).sqrt();
                if n > 1e-12 {
                    row /= n;
                    break;
                }
            }
        }
        Self(t)
    }

    pub fn from_rows(rows: Array2<f64>) -> Self {
        Self(rows)
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn feature_dim(&self) -> usize {
        self.0.ncols()
    }
}

/// Rendering noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderParams {
    /// Frames per character before jitter.
    pub base_duration: usize,
    /// Durations are uniform in `base ± jitter`, floored at one frame.
    pub duration_jitter: usize,
    /// Standard deviation of i.i.d. per-entry noise.
    pub noise_sigma: f64,
    /// Standard deviation of the per-instance constant offset.
    pub speaker_sigma: f64,
}

/// Renders a word: each character's prototype held for its sampled duration,
/// plus one offset vector shared by all frames, plus per-entry noise.
pub fn render_instance<R: Rng + ?Sized>(
    chars: &[u32],
    table: &PrototypeTable,
    params: &RenderParams,
    rng: &mut R,
) -> Result<FeatureSequence, DataError> {
    let protos = table.rows();
    if let Some(&c) = chars.iter().find(|&&c| c as usize >= protos.nrows()) {
        return Err(DataError::UnknownSymbol(c));
    }
    let lo = params
        .base_duration
        .saturating_sub(params.duration_jitter)
        .max(1);
    let hi = (params.base_duration + params.duration_jitter).max(lo);
    let durations: Vec<usize> = chars.iter().map(|_| rng.random_range(lo..=hi)).collect();
    let f = table.feature_dim();
    let offset: Array1<f64> = if params.speaker_sigma > 0.0 {
        (0..f)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut *rng);
                params.speaker_sigma * e
            })
            .collect()
    } else {
        Array1::zeros(f)
    };
    let total: usize = durations.iter().sum();
    let mut frames = Array2::zeros((total, f));
    let mut t = 0;
    for (&c, &d) in chars.iter().zip(&durations) {
        for _ in 0..d {
            let mut row = frames.row_mut(t);
            row.assign(&protos.row(c as usize));
            row += &offset;
            if params.noise_sigma > 0.0 {
                for v in row.iter_mut() {
                    let e: f64 = StandardNormal.sample(&mut *rng);
                    *v += params.noise_sigma * e;
                }
            }
            t += 1;
        }
    }
    Ok(FeatureSequence::new(frames)?)
}
