use super::ap::{average_precision, ApResult, ScoredPairSet};
use super::EvalError;
use crate::encoders::FeatureSequence;
use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use std::cmp::Ordering;

/// Frames with norm below this are treated as the zero vector: their cosine
/// with anything is 0, so their frame cost is 1.
pub const FRAME_NORM_FLOOR: f64 = 1e-12;

/// Rows scaled to unit norm; rows under [`FRAME_NORM_FLOOR`] become zero.
fn unit_rows(a: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = a.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let n = row.dot(&row).sqrt();
        if n < FRAME_NORM_FLOOR {
            row.fill(0.0);
        } else {
            row /= n;
        }
    }
    out
}

/// `1 − cos` between every frame of `a` and every frame of `b`.
pub fn frame_costs(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    unit_costs(&unit_rows(a), &unit_rows(b))
}

/// For unit rows `1 − cos = ‖u − v‖² / 2`, which is exactly zero for equal
/// frames; zero rows cost 1 against everything.
fn unit_costs(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let zero = |r: ndarray::ArrayView1<'_, f64>| r.iter().all(|&v| v == 0.0);
    let za: Vec<bool> = a.rows().into_iter().map(zero).collect();
    let zb: Vec<bool> = b.rows().into_iter().map(zero).collect();
    Array2::from_shape_fn((a.nrows(), b.nrows()), |(i, j)| {
        if za[i] || zb[j] {
            return 1.0;
        }
        let d: f64 = a
            .row(i)
            .iter()
            .zip(b.row(j))
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        (0.5 * d).min(2.0)
    })
}

/// `(total cost, path length)`, ordered by cost then length.
type PathScore = (f64, usize);

fn better(a: PathScore, b: PathScore) -> bool {
    match a.0.partial_cmp(&b.0) {
        Some(Ordering::Less) => true,
        Some(Ordering::Equal) => a.1 < b.1,
        _ => false,
    }
}

/// Aligns with steps `(1,0)`, `(0,1)`, `(1,1)` from the first frame pair to
/// the last, minimizing total frame cost (ties to the shorter path), and
/// returns the total cost divided by the number of aligned frame pairs.
pub fn dtw_normalized_cost(costs: ArrayView2<'_, f64>) -> f64 {
    let (n, m) = costs.dim();
    assert!(n > 0 && m > 0, "alignment needs nonempty sequences");
    let mut prev: Vec<PathScore> = vec![(f64::INFINITY, 0); m];
    let mut cur: Vec<PathScore> = vec![(f64::INFINITY, 0); m];
    for i in 0..n {
        for j in 0..m {
            let c = costs[[i, j]];
            let best = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                let mut best = (f64::INFINITY, usize::MAX);
                let cands = [
                    (i > 0).then(|| prev[j]),
                    (j > 0).then(|| cur[j - 1]),
                    (i > 0 && j > 0).then(|| prev[j - 1]),
                ];
                for cand in cands.into_iter().flatten() {
                    if better(cand, best) {
                        best = cand;
                    }
                }
                best
            };
            cur[j] = (c + best.0, best.1 + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (total, len) = prev[m - 1];
    total / len as f64
}

/// Negated normalized alignment cost; 0 is the maximum.
pub fn dtw_similarity(a: &FeatureSequence, b: &FeatureSequence) -> Result<f64, EvalError> {
    if a.feature_dim() != b.feature_dim() {
        return Err(EvalError::DimensionMismatch {
            expected: a.feature_dim(),
            found: b.feature_dim(),
        });
    }
    let costs = frame_costs(a.frames().view(), b.frames().view());
    Ok(-dtw_normalized_cost(costs.view()))
}

/// Acoustic word discrimination with DTW similarities over raw features.
pub fn dtw_acoustic_ap(seqs: &[FeatureSequence], classes: &[usize]) -> Result<ApResult, EvalError> {
    if seqs.len() != classes.len() {
        return Err(EvalError::LengthMismatch {
            scores: seqs.len(),
            labels: classes.len(),
        });
    }
    if seqs.len() < 2 {
        return Err(EvalError::TooFewItems(seqs.len()));
    }
    let f = seqs[0].feature_dim();
    if let Some(s) = seqs.iter().find(|s| s.feature_dim() != f) {
        return Err(EvalError::DimensionMismatch {
            expected: f,
            found: s.feature_dim(),
        });
    }
    let units: Vec<Array2<f64>> = seqs.iter().map(|s| unit_rows(s.frames().view())).collect();
    let rows: Vec<Vec<f64>> = (0..seqs.len())
        .into_par_iter()
        .map(|i| {
            (i + 1..seqs.len())
                .map(|j| {
                    let c = unit_costs(&units[i], &units[j]);
                    -dtw_normalized_cost(c.view())
                })
                .collect()
        })
        .collect();
    let mut pairs = ScoredPairSet::default();
    for (i, row) in rows.into_iter().enumerate() {
        for (k, s) in row.into_iter().enumerate() {
            pairs.scores.push(s);
            pairs.labels.push(classes[i] == classes[i + 1 + k]);
        }
    }
    Ok(ApResult {
        ap: average_precision(&pairs)?,
        num_pairs: pairs.len(),
    })
}
