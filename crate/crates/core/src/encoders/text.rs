use super::acoustic::check_grad_shape;
use super::gru::{net_backward, net_forward, pack, NetTrace};
use super::params::{EncoderParams, TextParams};
use super::{CharSequence, EncoderError};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use std::borrow::Borrow;

/// State recorded by [`text_forward`] for the matching backward call.
#[derive(Debug, Clone)]
pub struct TextCache {
    fingerprint: u64,
    chars: Vec<Vec<u32>>,
    trace: NetTrace,
}

/// Encodes a batch of character sequences, one embedding per row. The text
/// encoder has no dropout, so there is no mode or rng.
pub fn text_forward<S: Borrow<CharSequence>>(
    ts: &[S],
    params: &EncoderParams,
) -> Result<(Array2<f64>, TextCache), EncoderError> {
    if ts.is_empty() {
        return Err(EncoderError::EmptyBatch);
    }
    let dict = &params.text.dictionary;
    let alphabet = dict.nrows();
    for t in ts.iter().map(Borrow::borrow) {
        if let Some(&symbol) = t.chars().iter().find(|&&c| c as usize >= alphabet) {
            return Err(EncoderError::UnknownSymbol { symbol, alphabet });
        }
    }
    let looked_up: Vec<Array2<f64>> = ts
        .iter()
        .map(|t| {
            let rows: Vec<usize> = t.borrow().chars().iter().map(|&c| c as usize).collect();
            dict.select(Axis(0), &rows)
        })
        .collect();
    let views: Vec<ArrayView2<'_, f64>> = looked_up.iter().map(|x| x.view()).collect();
    let (emb, trace) = net_forward(&params.text.net, pack(&views));
    Ok((
        emb,
        TextCache {
            fingerprint: params.text.fingerprint(),
            chars: ts.iter().map(|t| t.borrow().chars().to_vec()).collect(),
            trace,
        },
    ))
}

pub fn text_forward_one(
    t: &CharSequence,
    params: &EncoderParams,
) -> Result<(Array1<f64>, TextCache), EncoderError> {
    let (emb, cache) = text_forward(std::slice::from_ref(t), params)?;
    Ok((emb.row(0).to_owned(), cache))
}

/// Accumulates text parameter gradients into `grads`. Each dictionary row
/// receives the sum of its per-occurrence input gradients.
pub fn text_backward(
    params: &EncoderParams,
    cache: &TextCache,
    d_emb: ArrayView2<'_, f64>,
    grads: &mut TextParams,
) -> Result<(), EncoderError> {
    if cache.fingerprint != params.text.fingerprint() {
        return Err(EncoderError::StaleCache);
    }
    check_grad_shape(d_emb, cache.chars.len(), params.text.net.output_dim())?;
    let dx = net_backward(&params.text.net, &cache.trace, d_emb, &mut grads.net, true)
        .expect("input gradient requested");
    for (slot, &b) in cache.trace.order().iter().enumerate() {
        for (step, &c) in cache.chars[b].iter().enumerate() {
            let mut row = grads.dictionary.row_mut(c as usize);
            row += &dx[step].row(slot);
        }
    }
    Ok(())
}
