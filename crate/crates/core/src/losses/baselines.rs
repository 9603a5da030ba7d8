//! Pair- and triplet-based reference losses: contrastive, triplet and the
//! two-view triplet. Triplet negatives are sampled inside the batch.

use super::gpw::{LossResult, SimilarityGrad};
use super::partition::{partition, SelfPairPolicy};
use super::LossError;
use crate::math::{build_similarity, SimilarityKind};
use ndarray::{Array2, ArrayView2};
use rand::Rng;

pub const DEFAULT_MARGIN: f64 = 0.5;

fn check_margin(margin: f64) -> Result<(), LossError> {
    if (0.0..=2.0).contains(&margin) {
        Ok(())
    } else {
        Err(LossError::InvalidMargin(margin))
    }
}

/// An `(anchor, positive, negative)` index triple.
pub type Triplet = (usize, usize, usize);

/// One triplet per (anchor, other same-class item) pair, with the negative
/// drawn uniformly from the anchor's negatives.
pub fn sample_triplets<R: Rng + ?Sized>(classes: &[usize], rng: &mut R) -> Vec<Triplet> {
    let sets = partition(classes, SelfPairPolicy::Exclude);
    let mut out = Vec::new();
    for i in 0..classes.len() {
        let neg = &sets.negatives[i];
        if neg.is_empty() {
            continue;
        }
        for &j in &sets.positives[i] {
            out.push((i, j, neg[rng.random_range(0..neg.len())]));
        }
    }
    out
}

/// One negative per anchor, drawn uniformly from the anchor's negatives.
/// Anchors without negatives are skipped.
pub fn sample_anchor_negatives<R: Rng + ?Sized>(
    classes: &[usize],
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let sets = partition(classes, SelfPairPolicy::Exclude);
    let mut out = Vec::new();
    for (i, neg) in sets.negatives.iter().enumerate() {
        if !neg.is_empty() {
            out.push((i, neg[rng.random_range(0..neg.len())]));
        }
    }
    out
}

/// Pulls positives towards `S = 1` and hinges negatives above `margin`;
/// each side is averaged over its pairs.
pub fn contrastive(
    awes: ArrayView2<'_, f64>,
    classes: &[usize],
    margin: f64,
) -> Result<LossResult, LossError> {
    check_margin(margin)?;
    let n = classes.len();
    if n != awes.nrows() {
        return Err(LossError::LengthMismatch {
            expected: n,
            found: awes.nrows(),
        });
    }
    let s = build_similarity(awes, None, SimilarityKind::Single)?;
    let sets = partition(classes, SelfPairPolicy::Exclude);
    let num_pos: usize = sets.positives.iter().map(Vec::len).sum();
    let num_neg: usize = sets.negatives.iter().map(Vec::len).sum();
    if num_pos + num_neg == 0 {
        return Err(LossError::EmptyLoss("no pairs in batch"));
    }
    let mut gp = Array2::zeros((n, n));
    let mut gn = Array2::zeros((n, n));
    let mut value = 0.0;
    for i in 0..n {
        for &j in &sets.positives[i] {
            let w = 1.0 / num_pos as f64;
            value += w * (1.0 - s.get(i, j));
            gp[[i, j]] -= w;
        }
        for &k in &sets.negatives[i] {
            let w = 1.0 / num_neg as f64;
            let h = s.get(i, k) - margin;
            if h > 0.0 {
                value += w * h;
                gn[[i, k]] += w;
            }
        }
    }
    Ok(LossResult {
        value,
        grad_s_p: SimilarityGrad {
            kind: SimilarityKind::Single,
            grad: gp,
        },
        grad_s_n: SimilarityGrad {
            kind: SimilarityKind::Single,
            grad: gn,
        },
    })
}

/// Mean hinge `max(0, margin + S_ik - S_ij)` over the given triplets.
pub fn triplet(
    awes: ArrayView2<'_, f64>,
    triplets: &[Triplet],
    margin: f64,
) -> Result<LossResult, LossError> {
    check_margin(margin)?;
    if triplets.is_empty() {
        return Err(LossError::EmptyLoss("no valid triplet in batch"));
    }
    let n = awes.nrows();
    let s = build_similarity(awes, None, SimilarityKind::Single)?;
    let w = 1.0 / triplets.len() as f64;
    let mut gp = Array2::zeros((n, n));
    let mut gn = Array2::zeros((n, n));
    let mut value = 0.0;
    for &(i, j, k) in triplets {
        let h = margin + s.get(i, k) - s.get(i, j);
        if h > 0.0 {
            value += w * h;
            gp[[i, j]] -= w;
            gn[[i, k]] += w;
        }
    }
    Ok(LossResult {
        value,
        grad_s_p: SimilarityGrad {
            kind: SimilarityKind::Single,
            grad: gp,
        },
        grad_s_n: SimilarityGrad {
            kind: SimilarityKind::Single,
            grad: gn,
        },
    })
}

/// Sum of two cross-view triplet terms over sampled `(anchor, negative)` pairs:
/// the acoustic anchor against its own and another item's text embedding, and
/// the text anchor against its own and another item's acoustic embedding.
///
/// Both terms are expressed on the shared `S_ij = cos(f_i, g_j)` matrix; the
/// text-anchored similarities `cos(g_i, f_k)` are its transposed entries.
pub fn mv_triplet(
    awes: ArrayView2<'_, f64>,
    agwes: ArrayView2<'_, f64>,
    pairs: &[(usize, usize)],
    margin: f64,
) -> Result<LossResult, LossError> {
    check_margin(margin)?;
    if pairs.is_empty() {
        return Err(LossError::EmptyLoss("no valid triplet in batch"));
    }
    let n = awes.nrows();
    let s = build_similarity(awes, Some(agwes), SimilarityKind::ProxyPn)?;
    let w = 1.0 / pairs.len() as f64;
    let mut gp = Array2::zeros((n, n));
    let mut gn = Array2::zeros((n, n));
    let mut value = 0.0;
    for &(i, k) in pairs {
        // acoustic anchor: cos(f_i, g_i) vs cos(f_i, g_k)
        let h0 = margin + s.get(i, k) - s.get(i, i);
        if h0 > 0.0 {
            value += w * h0;
            gp[[i, i]] -= w;
            gn[[i, k]] += w;
        }
        // text anchor: cos(g_i, f_i) vs cos(g_i, f_k) = S_ki
        let h2 = margin + s.get(k, i) - s.get(i, i);
        if h2 > 0.0 {
            value += w * h2;
            gp[[i, i]] -= w;
            gn[[k, i]] += w;
        }
    }
    Ok(LossResult {
        value,
        grad_s_p: SimilarityGrad {
            kind: SimilarityKind::ProxyPn,
            grad: gp,
        },
        grad_s_n: SimilarityGrad {
            kind: SimilarityKind::ProxyPn,
            grad: gn,
        },
    })
}
