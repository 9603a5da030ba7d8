//! Batched gated recurrent layers over packed, time-major sequences.
//!
//! A batch is sorted by decreasing length and stored as one matrix per time
//! step holding only the rows still live at that step, so step `t` has
//! `k_t = #{b : len[b] > t}` rows and row `b` of every step refers to the
//! same sequence. A row's state after its own last frame is its final state.

use super::params::{GruParams, RecurrentParams};
use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

pub(crate) type TimeMajor = Vec<Array2<f64>>;

fn sigmoid(x: f64) -> f64 {
    crate::math::sigmoid(x)
}

/// A batch in packed form together with its sort order.
#[derive(Debug, Clone)]
pub(crate) struct Packed {
    pub(crate) steps: TimeMajor,
    /// Lengths in packed (non-increasing) order.
    pub(crate) lengths: Vec<usize>,
    /// `order[i]` is the caller's index of packed row `i`.
    pub(crate) order: Vec<usize>,
}

/// Packs sequences (each `T_b × D`, `T_b ≥ 1`), sorting stably by
/// decreasing length.
pub(crate) fn pack(seqs: &[ArrayView2<'_, f64>]) -> Packed {
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    order.sort_by(|&a, &b| seqs[b].nrows().cmp(&seqs[a].nrows()));
    let lengths: Vec<usize> = order.iter().map(|&i| seqs[i].nrows()).collect();
    let t_max = lengths.first().copied().unwrap_or(0);
    let dim = seqs.first().map_or(0, |s| s.ncols());
    let steps = (0..t_max)
        .map(|t| {
            let k = live(&lengths, t);
            let mut m = Array2::zeros((k, dim));
            for (row, &i) in order[..k].iter().enumerate() {
                m.row_mut(row).assign(&seqs[i].row(t));
            }
            m
        })
        .collect();
    Packed {
        steps,
        lengths,
        order,
    }
}

fn live(lengths: &[usize], t: usize) -> usize {
    lengths.partition_point(|&l| l > t)
}

/// Reverses every row's sequence in time. An involution on packed data.
pub(crate) fn reverse_time(seq: &[Array2<f64>], lengths: &[usize]) -> TimeMajor {
    (0..seq.len())
        .map(|t| {
            let k = live(lengths, t);
            let mut m = Array2::zeros((k, seq[t].ncols()));
            for (b, &len) in lengths[..k].iter().enumerate() {
                m.row_mut(b).assign(&seq[len - 1 - t].row(b));
            }
            m
        })
        .collect()
}

fn stack(steps: &[Array2<f64>]) -> Array2<f64> {
    let views: Vec<ArrayView2<'_, f64>> = steps.iter().map(|m| m.view()).collect();
    concatenate(Axis(0), &views).expect("steps share a width")
}

fn split(all: &Array2<f64>, lengths: &[usize], t_max: usize) -> TimeMajor {
    let mut start = 0;
    (0..t_max)
        .map(|t| {
            let k = live(lengths, t);
            let m = all.slice(s![start..start + k, ..]).to_owned();
            start += k;
            m
        })
        .collect()
}

#[derive(Debug, Clone)]
pub(crate) struct GruTrace {
    /// All input steps stacked in time order.
    xs: Array2<f64>,
    h_prev: TimeMajor,
    r: TimeMajor,
    z: TimeMajor,
    n: TimeMajor,
    ghn: TimeMajor,
    /// Input pre-activations `W_ih x_t + b_ih`, kept for inspection.
    pub(crate) gi: TimeMajor,
    lengths: Vec<usize>,
}

/// Runs one direction; returns the hidden state after every step.
pub(crate) fn gru_forward(
    p: &GruParams,
    xs: &[Array2<f64>],
    lengths: &[usize],
) -> (TimeMajor, GruTrace) {
    let h = p.hidden();
    let t_max = xs.len();
    let x_all = stack(xs);
    let gi_all = x_all.dot(&p.w_ih.t()) + &p.b_ih;
    let gis = split(&gi_all, lengths, t_max);
    let mut hs = Vec::with_capacity(t_max);
    let mut trace = GruTrace {
        xs: x_all,
        h_prev: Vec::with_capacity(t_max),
        r: Vec::with_capacity(t_max),
        z: Vec::with_capacity(t_max),
        n: Vec::with_capacity(t_max),
        ghn: Vec::with_capacity(t_max),
        gi: Vec::new(),
        lengths: lengths.to_vec(),
    };
    let mut prev = Array2::<f64>::zeros((lengths.len(), h));
    for gi in &gis {
        let k = gi.nrows();
        let hp = prev.slice(s![..k, ..]).to_owned();
        let gh = hp.dot(&p.w_hh.t()) + &p.b_hh;
        let gi_s = gi.as_slice().expect("contiguous");
        let gh_s = gh.as_slice().expect("contiguous");
        let hp_s = hp.as_slice().expect("contiguous");
        let cap = k * h;
        let (mut r, mut z, mut n, mut ghn, mut next) = (
            Vec::with_capacity(cap),
            Vec::with_capacity(cap),
            Vec::with_capacity(cap),
            Vec::with_capacity(cap),
            Vec::with_capacity(cap),
        );
        for b in 0..k {
            let gi = &gi_s[b * 3 * h..(b + 1) * 3 * h];
            let gh = &gh_s[b * 3 * h..(b + 1) * 3 * h];
            let hp = &hp_s[b * h..(b + 1) * h];
            for j in 0..h {
                let rv = sigmoid(gi[j] + gh[j]);
                let zv = sigmoid(gi[h + j] + gh[h + j]);
                let hn = gh[2 * h + j];
                let nv = (gi[2 * h + j] + rv * hn).tanh();
                r.push(rv);
                z.push(zv);
                n.push(nv);
                ghn.push(hn);
                next.push((1.0 - zv) * nv + zv * hp[j]);
            }
        }
        let shaped = |v: Vec<f64>| Array2::from_shape_vec((k, h), v).expect("k x h");
        let (r, z, n, ghn, next) = (shaped(r), shaped(z), shaped(n), shaped(ghn), shaped(next));
        trace.h_prev.push(hp);
        trace.r.push(r);
        trace.z.push(z);
        trace.n.push(n);
        trace.ghn.push(ghn);
        prev.slice_mut(s![..k, ..]).assign(&next);
        hs.push(next);
    }
    trace.gi = gis;
    (hs, trace)
}

fn flat(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("contiguous")
}

/// Final state of every packed row.
fn finals(hs: &[Array2<f64>], lengths: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((lengths.len(), hs[0].ncols()));
    for (b, &len) in lengths.iter().enumerate() {
        out.row_mut(b).assign(&hs[len - 1].row(b));
    }
    out
}

/// Backpropagates through one direction. `d_seq[t]`, when given, is the
/// gradient on the step-`t` output; `d_final` is the gradient on every row's
/// final state. Parameter gradients are accumulated into `grads`; input
/// gradients are returned when `want_dx` is set.
pub(crate) fn gru_backward(
    p: &GruParams,
    trace: &GruTrace,
    d_seq: Option<&[Array2<f64>]>,
    d_final: ArrayView2<'_, f64>,
    grads: &mut GruParams,
    want_dx: bool,
) -> Option<TimeMajor> {
    let h = p.hidden();
    let t_max = trace.r.len();
    let lengths = &trace.lengths;
    // Row b's final state is its step len[b]-1 output, which is never read
    // again, so the whole of d_final can seed dh before the sweep.
    let mut dh = d_final.to_owned();
    let mut dgis = Vec::with_capacity(t_max);
    let mut dghs = Vec::with_capacity(t_max);
    for t in (0..t_max).rev() {
        let k = live(lengths, t);
        let mut g = dh.slice(s![..k, ..]).to_owned();
        if let Some(d) = d_seq {
            g += &d[t];
        }
        let g = g.as_slice().expect("contiguous");
        let (r, z, n, ghn, hp) = (
            flat(&trace.r[t]),
            flat(&trace.z[t]),
            flat(&trace.n[t]),
            flat(&trace.ghn[t]),
            flat(&trace.h_prev[t]),
        );
        let mut dgi = vec![0.0; k * 3 * h];
        let mut dgh = vec![0.0; k * 3 * h];
        let mut dh_direct = Vec::with_capacity(k * h);
        for b in 0..k {
            let row = b * 3 * h;
            for j in 0..h {
                let e = b * h + j;
                let gv = g[e];
                let (rv, zv, nv) = (r[e], z[e], n[e]);
                let dn = gv * (1.0 - zv);
                let dz = gv * (hp[e] - nv);
                let dan = dn * (1.0 - nv * nv);
                let dar = dan * ghn[e] * rv * (1.0 - rv);
                let daz = dz * zv * (1.0 - zv);
                dgi[row + j] = dar;
                dgi[row + h + j] = daz;
                dgi[row + 2 * h + j] = dan;
                dgh[row + j] = dar;
                dgh[row + h + j] = daz;
                dgh[row + 2 * h + j] = dan * rv;
                dh_direct.push(gv * zv);
            }
        }
        let dgi = Array2::from_shape_vec((k, 3 * h), dgi).expect("k x 3h");
        let dgh = Array2::from_shape_vec((k, 3 * h), dgh).expect("k x 3h");
        let dh_direct = Array2::from_shape_vec((k, h), dh_direct).expect("k x h");
        dh.slice_mut(s![..k, ..])
            .assign(&(dh_direct + dgh.dot(&p.w_hh)));
        dgis.push(dgi);
        dghs.push(dgh);
    }
    dgis.reverse();
    dghs.reverse();
    let dgi_all = stack(&dgis);
    let dgh_all = stack(&dghs);
    let hp_all = stack(&trace.h_prev);
    grads.w_ih += &dgi_all.t().dot(&trace.xs);
    grads.w_hh += &dgh_all.t().dot(&hp_all);
    grads.b_ih += &dgi_all.sum_axis(Axis(0));
    grads.b_hh += &dgh_all.sum_axis(Axis(0));
    want_dx.then(|| split(&dgi_all.dot(&p.w_ih), lengths, t_max))
}

/// Everything the backward pass of a stacked bidirectional network needs.
#[derive(Debug, Clone)]
pub(crate) struct NetTrace {
    lengths: Vec<usize>,
    order: Vec<usize>,
    layers: Vec<(GruTrace, GruTrace)>,
    top: Array2<f64>,
}

impl NetTrace {
    /// First-layer input pre-activations, packed, with the backward
    /// direction in its own (reversed) time order.
    pub(crate) fn first_layer_preactivations(&self) -> (&[Array2<f64>], &[Array2<f64>]) {
        let (f, b) = &self.layers[0];
        (&f.gi, &b.gi)
    }

    pub(crate) fn batch(&self) -> usize {
        self.lengths.len()
    }

    /// Packed row order, as in [`Packed::order`].
    pub(crate) fn order(&self) -> &[usize] {
        &self.order
    }
}

/// Encodes a packed batch to one embedding per row, in the caller's order.
pub(crate) fn net_forward(p: &RecurrentParams, packed: Packed) -> (Array2<f64>, NetTrace) {
    let Packed {
        steps,
        lengths,
        order,
    } = packed;
    let mut input = steps;
    let mut traces = Vec::with_capacity(p.layers.len());
    let mut top = None;
    for (l, layer) in p.layers.iter().enumerate() {
        let rev = reverse_time(&input, &lengths);
        let (hf, tf) = gru_forward(&layer.forward, &input, &lengths);
        let (hb, tb) = gru_forward(&layer.backward, &rev, &lengths);
        if l + 1 == p.layers.len() {
            top = Some(concatenate![
                Axis(1),
                finals(&hf, &lengths),
                finals(&hb, &lengths)
            ]);
        } else {
            let hb_aligned = reverse_time(&hb, &lengths);
            input = hf
                .iter()
                .zip(&hb_aligned)
                .map(|(a, b)| concatenate![Axis(1), *a, *b])
                .collect();
        }
        traces.push((tf, tb));
    }
    let top = top.expect("at least one layer");
    let packed_out = match &p.projection {
        Some(proj) => top.dot(&proj.weight.t()) + &proj.bias,
        None => top.clone(),
    };
    let mut out = Array2::zeros(packed_out.raw_dim());
    for (row, &i) in order.iter().enumerate() {
        out.row_mut(i).assign(&packed_out.row(row));
    }
    (
        out,
        NetTrace {
            lengths,
            order,
            layers: traces,
            top,
        },
    )
}

/// Backpropagates `d_out` (one row per batch item, caller's order) into
/// `grads`; returns the packed gradient on the first-layer inputs when
/// `want_dx` is set.
pub(crate) fn net_backward(
    p: &RecurrentParams,
    trace: &NetTrace,
    d_out: ArrayView2<'_, f64>,
    grads: &mut RecurrentParams,
    want_dx: bool,
) -> Option<TimeMajor> {
    let h = p.hidden();
    let d_out = d_out.select(Axis(0), &trace.order);
    let d_top = match (&p.projection, &mut grads.projection) {
        (Some(proj), Some(gproj)) => {
            gproj.weight += &d_out.t().dot(&trace.top);
            gproj.bias += &d_out.sum_axis(Axis(0));
            d_out.dot(&proj.weight)
        }
        _ => d_out,
    };
    let lengths = &trace.lengths;
    let mut d_final_f = d_top.slice(s![.., 0..h]).to_owned();
    let mut d_final_b = d_top.slice(s![.., h..]).to_owned();
    let mut d_seq: Option<(TimeMajor, TimeMajor)> = None;
    let mut dx_out = None;
    for l in (0..p.layers.len()).rev() {
        let (tf, tb) = &trace.layers[l];
        let need_dx = l > 0 || want_dx;
        let (seq_f, seq_b) = match &d_seq {
            Some((f, b)) => (Some(f.as_slice()), Some(b.as_slice())),
            None => (None, None),
        };
        let glayer = &mut grads.layers[l];
        let dxf = gru_backward(
            &p.layers[l].forward,
            tf,
            seq_f,
            d_final_f.view(),
            &mut glayer.forward,
            need_dx,
        );
        let dxb = gru_backward(
            &p.layers[l].backward,
            tb,
            seq_b,
            d_final_b.view(),
            &mut glayer.backward,
            need_dx,
        );
        if !need_dx {
            break;
        }
        let dxf = dxf.expect("requested");
        let dxb_aligned = reverse_time(&dxb.expect("requested"), lengths);
        let dx: TimeMajor = dxf.iter().zip(&dxb_aligned).map(|(a, b)| a + b).collect();
        if l == 0 {
            dx_out = Some(dx);
        } else {
            // Split the lower layer's output gradient into its two directions.
            let f: TimeMajor = dx
                .iter()
                .map(|d| d.slice(s![.., 0..h]).to_owned())
                .collect();
            let b_aligned: TimeMajor = dx.iter().map(|d| d.slice(s![.., h..]).to_owned()).collect();
            let b = reverse_time(&b_aligned, lengths);
            d_seq = Some((f, b));
            d_final_f = Array2::zeros((lengths.len(), h));
            d_final_b = Array2::zeros((lengths.len(), h));
        }
    }
    dx_out
}
