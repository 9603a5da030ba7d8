use super::EncoderError;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Architecture shared by the acoustic and text encoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    /// Features per acoustic frame.
    pub feature_dim: usize,
    /// Number of symbols in the character alphabet.
    pub alphabet_size: usize,
    /// Width of a character dictionary row.
    pub char_dim: usize,
    /// Hidden units per direction.
    pub hidden: usize,
    /// Stacked bidirectional layers.
    pub layers: usize,
    /// Affine projection of the concatenated final states to
    /// `embedding_dim`. Without it the embedding is the concatenation and
    /// `embedding_dim` must equal `2 * hidden`.
    pub project: bool,
    pub embedding_dim: usize,
    /// Input dropout of the acoustic encoder.
    pub dropout: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            feature_dim: 40,
            alphabet_size: 26,
            char_dim: 26,
            hidden: 64,
            layers: 1,
            project: true,
            embedding_dim: 32,
            dropout: 0.4,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |m: &str| Err(EncoderError::InvalidConfig(m.to_string()));
        if self.feature_dim == 0 || self.alphabet_size == 0 || self.char_dim == 0 {
            return bad("input dimensions must be positive");
        }
        if self.hidden == 0 || self.layers == 0 || self.embedding_dim == 0 {
            return bad("hidden size, layer count and embedding size must be positive");
        }
        if !self.project && self.embedding_dim != 2 * self.hidden {
            return bad("without projection the embedding size must be twice the hidden size");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }
}

/// One direction of a gated recurrent layer. Gate blocks are stacked in the
/// order reset, update, candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruParams {
    pub w_ih: Array2<f64>,
    pub w_hh: Array2<f64>,
    pub b_ih: Array1<f64>,
    pub b_hh: Array1<f64>,
}

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_ih: Array2::zeros((3 * hidden, input)),
            w_hh: Array2::zeros((3 * hidden, hidden)),
            b_ih: Array1::zeros(3 * hidden),
            b_hh: Array1::zeros(3 * hidden),
        }
    }

    fn init(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros(input, hidden);
        fill_uniform(&mut p.w_ih, input, rng);
        fill_uniform(&mut p.w_hh, hidden, rng);
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w_ih.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiGruLayer {
    pub forward: GruParams,
    pub backward: GruParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Stacked bidirectional recurrent network with an optional output projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentParams {
    pub layers: Vec<BiGruLayer>,
    pub projection: Option<Projection>,
}

impl RecurrentParams {
    pub fn zeros(input: usize, config: &EncoderConfig) -> Self {
        let h = config.hidden;
        let layers = (0..config.layers)
            .map(|l| {
                let inp = if l == 0 { input } else { 2 * h };
                BiGruLayer {
                    forward: GruParams::zeros(inp, h),
                    backward: GruParams::zeros(inp, h),
                }
            })
            .collect();
        let projection = config.project.then(|| Projection {
            weight: Array2::zeros((config.embedding_dim, 2 * h)),
            bias: Array1::zeros(config.embedding_dim),
        });
        Self { layers, projection }
    }

    fn init(input: usize, config: &EncoderConfig, rng: &mut ChaCha8Rng) -> Self {
        let h = config.hidden;
        let layers = (0..config.layers)
            .map(|l| {
                let inp = if l == 0 { input } else { 2 * h };
                BiGruLayer {
                    forward: GruParams::init(inp, h, rng),
                    backward: GruParams::init(inp, h, rng),
                }
            })
            .collect();
        let projection = config.project.then(|| {
            let mut weight = Array2::zeros((config.embedding_dim, 2 * h));
            fill_uniform(&mut weight, 2 * h, rng);
            Projection {
                weight,
                bias: Array1::zeros(config.embedding_dim),
            }
        });
        Self { layers, projection }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].forward.input_dim()
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].forward.hidden()
    }

    pub fn output_dim(&self) -> usize {
        match &self.projection {
            Some(p) => p.weight.nrows(),
            None => 2 * self.hidden(),
        }
    }

    /// Every tensor as a flat slice, in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for g in [&layer.forward, &layer.backward] {
                out.push(g.w_ih.as_slice().expect("contiguous"));
                out.push(g.w_hh.as_slice().expect("contiguous"));
                out.push(g.b_ih.as_slice().expect("contiguous"));
                out.push(g.b_hh.as_slice().expect("contiguous"));
            }
        }
        if let Some(p) = &self.projection {
            out.push(p.weight.as_slice().expect("contiguous"));
            out.push(p.bias.as_slice().expect("contiguous"));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            for g in [&mut layer.forward, &mut layer.backward] {
                out.push(g.w_ih.as_slice_mut().expect("contiguous"));
                out.push(g.w_hh.as_slice_mut().expect("contiguous"));
                out.push(g.b_ih.as_slice_mut().expect("contiguous"));
                out.push(g.b_hh.as_slice_mut().expect("contiguous"));
            }
        }
        if let Some(p) = &mut self.projection {
            out.push(p.weight.as_slice_mut().expect("contiguous"));
            out.push(p.bias.as_slice_mut().expect("contiguous"));
        }
        out
    }
}

/// Character dictionary followed by a recurrent network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextParams {
    pub dictionary: Array2<f64>,
    pub net: RecurrentParams,
}

/// Trainable parameters of both encoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub acoustic: RecurrentParams,
    pub text: TextParams,
}

/// Gradients with the layout of [`EncoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads {
    pub acoustic: RecurrentParams,
    pub text: TextParams,
}

fn fill_uniform(a: &mut Array2<f64>, fan_in: usize, rng: &mut ChaCha8Rng) {
    let bound = 1.0 / (fan_in as f64).sqrt();
    a.mapv_inplace(|_| rng.random_range(-bound..bound));
}

/// Deterministic initialization: weights uniform in `±1/sqrt(fan_in)`,
/// biases zero, dictionary rows uniform in `±1` (one-hot fan-in).
pub fn init_params(config: &EncoderConfig, seed: u64) -> Result<EncoderParams, EncoderError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let acoustic = RecurrentParams::init(config.feature_dim, config, &mut rng);
    let mut dictionary = Array2::zeros((config.alphabet_size, config.char_dim));
    fill_uniform(&mut dictionary, 1, &mut rng);
    let net = RecurrentParams::init(config.char_dim, config, &mut rng);
    Ok(EncoderParams {
        config: config.clone(),
        acoustic,
        text: TextParams { dictionary, net },
    })
}

impl EncoderParams {
    pub fn zero_grads(&self) -> EncoderGrads {
        EncoderGrads {
            acoustic: RecurrentParams::zeros(self.config.feature_dim, &self.config),
            text: TextParams {
                dictionary: Array2::zeros(self.text.dictionary.raw_dim()),
                net: RecurrentParams::zeros(self.config.char_dim, &self.config),
            },
        }
    }

    /// Every parameter tensor as a flat slice, in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = self.acoustic.tensors();
        out.push(self.text.dictionary.as_slice().expect("contiguous"));
        out.extend(self.text.net.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.acoustic.tensors_mut();
        out.push(self.text.dictionary.as_slice_mut().expect("contiguous"));
        out.extend(self.text.net.tensors_mut());
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// FNV-1a over the bit patterns of every parameter; identifies a snapshot.
    pub fn fingerprint(&self) -> u64 {
        fingerprint(&self.acoustic.tensors())
            ^ fingerprint(&self.text.net.tensors()).rotate_left(17)
            ^ fingerprint(&[self.text.dictionary.as_slice().expect("contiguous")]).rotate_left(31)
    }
}

impl RecurrentParams {
    pub fn fingerprint(&self) -> u64 {
        fingerprint(&self.tensors())
    }
}

impl TextParams {
    /// The dictionary followed by the recurrent tensors.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = vec![self.dictionary.as_slice().expect("contiguous")];
        out.extend(self.net.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.dictionary.as_slice_mut().expect("contiguous")];
        out.extend(self.net.tensors_mut());
        out
    }

    pub fn fingerprint(&self) -> u64 {
        fingerprint(&self.net.tensors())
            ^ fingerprint(&[self.dictionary.as_slice().expect("contiguous")]).rotate_left(31)
    }
}

fn fingerprint(tensors: &[&[f64]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for t in tensors {
        for v in t.iter() {
            h ^= v.to_bits();
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

impl EncoderGrads {
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = self.acoustic.tensors();
        out.push(self.text.dictionary.as_slice().expect("contiguous"));
        out.extend(self.text.net.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.acoustic.tensors_mut();
        out.push(self.text.dictionary.as_slice_mut().expect("contiguous"));
        out.extend(self.text.net.tensors_mut());
        out
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }
}
