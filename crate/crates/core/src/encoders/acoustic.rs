use super::gru::{net_backward, net_forward, pack, NetTrace};
use super::params::{EncoderParams, RecurrentParams};
use super::{EncoderError, FeatureSequence, Mode};
use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use std::borrow::Borrow;

/// State recorded by [`acoustic_forward`] for the matching backward call.
#[derive(Debug, Clone)]
pub struct AcousticCache {
    fingerprint: u64,
    trace: NetTrace,
}

impl AcousticCache {
    /// First-layer input pre-activations `W_ih x̃_t + b_ih` of both
    /// directions. Each step holds the rows still live at that step, with
    /// rows sorted by decreasing length; the backward direction is in its own
    /// (reversed) time order.
    pub fn input_preactivations(&self) -> (&[Array2<f64>], &[Array2<f64>]) {
        self.trace.first_layer_preactivations()
    }
}

/// Encodes a batch of feature sequences, one embedding per row. In train mode
/// every input frame entry is kept with probability `1 - p` and rescaled by
/// `1 / (1 - p)`; masks are drawn from `rng` in batch order.
pub fn acoustic_forward<S: Borrow<FeatureSequence>, R: Rng + ?Sized>(
    xs: &[S],
    params: &EncoderParams,
    mode: Mode,
    rng: &mut R,
) -> Result<(Array2<f64>, AcousticCache), EncoderError> {
    if xs.is_empty() {
        return Err(EncoderError::EmptyBatch);
    }
    let net = &params.acoustic;
    let expected = net.input_dim();
    if let Some(x) = xs
        .iter()
        .map(Borrow::borrow)
        .find(|x| x.feature_dim() != expected)
    {
        return Err(EncoderError::DimensionMismatch {
            expected,
            found: x.feature_dim(),
        });
    }
    let p = params.config.dropout;
    let packed = if mode == Mode::Train && p > 0.0 {
        let keep = 1.0 / (1.0 - p);
        let dropped: Vec<Array2<f64>> = xs
            .iter()
            .map(|x| {
                x.borrow().frames().mapv(|v| {
                    if rng.random::<f64>() < p {
                        0.0
                    } else {
                        v * keep
                    }
                })
            })
            .collect();
        let views: Vec<ArrayView2<'_, f64>> = dropped.iter().map(|x| x.view()).collect();
        pack(&views)
    } else {
        let views: Vec<ArrayView2<'_, f64>> =
            xs.iter().map(|x| x.borrow().frames().view()).collect();
        pack(&views)
    };
    let (emb, trace) = net_forward(net, packed);
    Ok((
        emb,
        AcousticCache {
            fingerprint: net.fingerprint(),
            trace,
        },
    ))
}

/// Single-sequence convenience wrapper around [`acoustic_forward`].
pub fn acoustic_forward_one<R: Rng + ?Sized>(
    x: &FeatureSequence,
    params: &EncoderParams,
    mode: Mode,
    rng: &mut R,
) -> Result<(Array1<f64>, AcousticCache), EncoderError> {
    let (emb, cache) = acoustic_forward(std::slice::from_ref(x), params, mode, rng)?;
    Ok((emb.row(0).to_owned(), cache))
}

/// Accumulates the acoustic parameter gradients of `d_emb` (one row per batch
/// item) into `grads`.
pub fn acoustic_backward(
    params: &EncoderParams,
    cache: &AcousticCache,
    d_emb: ArrayView2<'_, f64>,
    grads: &mut RecurrentParams,
) -> Result<(), EncoderError> {
    if cache.fingerprint != params.acoustic.fingerprint() {
        return Err(EncoderError::StaleCache);
    }
    check_grad_shape(d_emb, cache.trace.batch(), params.acoustic.output_dim())?;
    net_backward(&params.acoustic, &cache.trace, d_emb, grads, false);
    Ok(())
}

pub(super) fn check_grad_shape(
    d: ArrayView2<'_, f64>,
    batch: usize,
    dim: usize,
) -> Result<(), EncoderError> {
    if d.nrows() != batch {
        return Err(EncoderError::DimensionMismatch {
            expected: batch,
            found: d.nrows(),
        });
    }
    if d.ncols() != dim {
        return Err(EncoderError::DimensionMismatch {
            expected: dim,
            found: d.ncols(),
        });
    }
    if !d.iter().all(|v| v.is_finite()) {
        return Err(EncoderError::NonFinite("embedding gradient"));
    }
    Ok(())
}
