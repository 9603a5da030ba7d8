use super::EvalError;
use crate::math::{build_similarity, cross_cosine, SimilarityKind};
use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Scores with binary same-word labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoredPairSet {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

impl ScoredPairSet {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self, EvalError> {
        if scores.len() != labels.len() {
            return Err(EvalError::LengthMismatch {
                scores: scores.len(),
                labels: labels.len(),
            });
        }
        Ok(Self { scores, labels })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn num_positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

/// Area under the precision-recall curve traced by lowering a threshold
/// through the distinct scores: `Σ_k (R_k − R_{k−1}) P_k`. Items with equal
/// scores cross the threshold together, so the result does not depend on
/// input order. Without ties this is the mean, over positives in descending
/// score order, of the precision at each positive's rank.
pub fn average_precision(pairs: &ScoredPairSet) -> Result<f64, EvalError> {
    if pairs.scores.iter().any(|s| s.is_nan()) {
        return Err(EvalError::NonFinite);
    }
    let total_pos = pairs.num_positives();
    if total_pos == 0 {
        return Err(EvalError::NoPositives);
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs.scores[b].total_cmp(&pairs.scores[a]));
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut ap = 0.0;
    let mut k = 0;
    while k < order.len() {
        let s = pairs.scores[order[k]];
        let mut group_tp = 0;
        while k < order.len() && pairs.scores[order[k]] == s {
            group_tp += usize::from(pairs.labels[order[k]]);
            seen += 1;
            k += 1;
        }
        if group_tp > 0 {
            tp += group_tp;
            ap += group_tp as f64 * (tp as f64 / seen as f64);
        }
    }
    Ok(ap / total_pos as f64)
}

/// AP together with the size of the scored pair universe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    pub ap: f64,
    pub num_pairs: usize,
}

fn pair_universe(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Acoustic word discrimination: every unordered AWE pair scored by cosine.
pub fn acoustic_ap(awes: ArrayView2<'_, f64>, classes: &[usize]) -> Result<ApResult, EvalError> {
    check_items(awes, classes)?;
    let s = cosine_matrix(awes)?;
    let n = classes.len();
    let mut pairs = ScoredPairSet {
        scores: Vec::with_capacity(pair_universe(n)),
        labels: Vec::with_capacity(pair_universe(n)),
    };
    for i in 0..n {
        for j in i + 1..n {
            pairs.scores.push(s[[i, j]]);
            pairs.labels.push(classes[i] == classes[j]);
        }
    }
    Ok(ApResult {
        ap: average_precision(&pairs)?,
        num_pairs: pairs.len(),
    })
}

/// Acoustic AP on a seeded uniform sample of `max_pairs` unordered pairs.
/// Falls back to all pairs when the universe is no larger than the sample.
pub fn acoustic_ap_sampled(
    awes: ArrayView2<'_, f64>,
    classes: &[usize],
    max_pairs: usize,
    seed: u64,
) -> Result<ApResult, EvalError> {
    check_items(awes, classes)?;
    let n = classes.len();
    let universe = pair_universe(n);
    if universe <= max_pairs {
        return acoustic_ap(awes, classes);
    }
    let s = cosine_matrix(awes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = sample(&mut rng, universe, max_pairs).into_vec();
    picked.sort_unstable();
    let mut pairs = ScoredPairSet::default();
    let mut next = picked.into_iter().peekable();
    let mut flat = 0;
    'outer: for i in 0..n {
        for j in i + 1..n {
            match next.peek() {
                None => break 'outer,
                Some(&k) if k == flat => {
                    pairs.scores.push(s[[i, j]]);
                    pairs.labels.push(classes[i] == classes[j]);
                    next.next();
                }
                _ => {}
            }
            flat += 1;
        }
    }
    Ok(ApResult {
        ap: average_precision(&pairs)?,
        num_pairs: pairs.len(),
    })
}

/// Cross-view word discrimination: every (AWE, class AGWE) pair scored by
/// cosine, positive when the classes match. `agwes` holds one row per entry
/// of `agwe_classes`.
pub fn crossview_ap(
    awes: ArrayView2<'_, f64>,
    classes: &[usize],
    agwes: ArrayView2<'_, f64>,
    agwe_classes: &[usize],
) -> Result<ApResult, EvalError> {
    if agwes.nrows() != agwe_classes.len() {
        return Err(EvalError::LengthMismatch {
            scores: agwes.nrows(),
            labels: agwe_classes.len(),
        });
    }
    if awes.nrows() != classes.len() {
        return Err(EvalError::LengthMismatch {
            scores: awes.nrows(),
            labels: classes.len(),
        });
    }
    let proxies: HashSet<usize> = agwe_classes.iter().copied().collect();
    if proxies.len() != agwe_classes.len() {
        return Err(EvalError::DuplicateProxy);
    }
    if let Some(&c) = classes.iter().find(|c| !proxies.contains(c)) {
        return Err(EvalError::MissingProxy(c));
    }
    let s = cross_cosine(awes, agwes)?;
    let mut pairs = ScoredPairSet::default();
    for (i, &ci) in classes.iter().enumerate() {
        for (j, &cj) in agwe_classes.iter().enumerate() {
            pairs.scores.push(s[[i, j]]);
            pairs.labels.push(ci == cj);
        }
    }
    Ok(ApResult {
        ap: average_precision(&pairs)?,
        num_pairs: pairs.len(),
    })
}

fn check_items(awes: ArrayView2<'_, f64>, classes: &[usize]) -> Result<(), EvalError> {
    if awes.nrows() != classes.len() {
        return Err(EvalError::LengthMismatch {
            scores: awes.nrows(),
            labels: classes.len(),
        });
    }
    if classes.len() < 2 {
        return Err(EvalError::TooFewItems(classes.len()));
    }
    Ok(())
}

fn cosine_matrix(awes: ArrayView2<'_, f64>) -> Result<Array2<f64>, EvalError> {
    Ok(build_similarity(awes, None, SimilarityKind::Single)?.entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    /// Threshold sweep over every distinct score.
    fn sweep_oracle(scores: &[f64], labels: &[bool]) -> f64 {
        let total = labels.iter().filter(|&&l| l).count() as f64;
        let mut thresholds: Vec<f64> = scores.to_vec();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let (mut ap, mut prev_recall) = (0.0, 0.0);
        for t in thresholds {
            let sel: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= t).collect();
            let tp = sel.iter().filter(|&&i| labels[i]).count() as f64;
            let recall = tp / total;
            ap += (recall - prev_recall) * (tp / sel.len() as f64);
            prev_recall = recall;
        }
        ap
    }

    fn ap(scores: &[f64], labels: &[u8]) -> f64 {
        let l = labels.iter().map(|&b| b == 1).collect();
        average_precision(&ScoredPairSet::new(scores.to_vec(), l).unwrap()).unwrap()
    }

    #[test]
    fn documented_examples() {
        assert_eq!(ap(&[0.9, 0.8, 0.7], &[1, 1, 0]), 1.0);
        assert!((ap(&[0.9, 0.8, 0.7], &[1, 0, 1]) - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(ap(&[0.1, 0.5, -3.0], &[1, 1, 1]), 1.0);
    }

    #[test]
    fn ties_enter_together() {
        // One positive and one negative tied at the top: precision 1/2.
        assert_eq!(ap(&[0.5, 0.5], &[1, 0]), 0.5);
        assert_eq!(ap(&[0.5, 0.5], &[0, 1]), 0.5);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let none = ScoredPairSet::new(vec![0.1, 0.2], vec![false, false]).unwrap();
        assert!(matches!(
            average_precision(&none),
            Err(EvalError::NoPositives)
        ));
        assert!(ScoredPairSet::new(vec![0.1], vec![]).is_err());
    }

    #[test]
    fn matches_sweep_oracle_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..500 {
            let n = rng.random_range(1..=8);
            let scores: Vec<f64> = (0..n)
                .map(|_| rng.random_range(0..4) as f64 / 4.0)
                .collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
            labels[0] = true;
            let got =
                average_precision(&ScoredPairSet::new(scores.clone(), labels.clone()).unwrap())
                    .unwrap();
            assert!((got - sweep_oracle(&scores, &labels)).abs() < 1e-12);
        }
    }

    #[test]
    fn invariant_under_increasing_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scores: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
        let a = average_precision(&ScoredPairSet::new(scores.clone(), labels.clone()).unwrap());
        let t: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() + 1.0).collect();
        let b = average_precision(&ScoredPairSet::new(t, labels).unwrap());
        assert_eq!(a.unwrap(), b.unwrap());
    }

    #[test]
    fn collapsed_orthogonal_classes_are_perfect() {
        let f = array![[1.0, 0.0], [2.0, 0.0], [0.0, 1.0], [0.0, 0.5]];
        let r = acoustic_ap(f.view(), &[0, 0, 1, 1]).unwrap();
        assert_eq!(r.ap, 1.0);
        assert_eq!(r.num_pairs, 6);
    }

    #[test]
    fn hand_placed_inversion() {
        // Angles 0, 10, 60 and 80 degrees; classes {0, 2} and {1, 3}.
        let f = array![
            [1.0, 0.0],
            [0.984_807_753, 0.173_648_178],
            [0.5, 0.866_025_404],
            [0.173_648_178, 0.984_807_753]
        ];
        let classes = [0, 1, 0, 1];
        let r = acoustic_ap(f.view(), &classes).unwrap();
        // Pair order by angular gap: (0,1)10 (2,3)20 (1,2)50 (0,2)60 (1,3)70 (0,3)80.
        // Positives (0,2) at rank 4 and (1,3) at rank 5.
        let expected = (1.0 / 4.0 + 2.0 / 5.0) / 2.0;
        assert!((r.ap - expected).abs() < 1e-12);
    }

    #[test]
    fn random_embeddings_sit_near_base_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let classes: Vec<usize> = (0..200).map(|i| i / 4).collect();
        let f = Array2::from_shape_fn((200, 16), |_| rng.random_range(-1.0..1.0));
        let r = acoustic_ap(f.view(), &classes).unwrap();
        let base = (50.0 * 6.0) / (200.0 * 199.0 / 2.0);
        assert!(r.ap < 3.0 * base + 0.01, "{} vs {base}", r.ap);
    }

    #[test]
    fn sampled_mode_is_seeded_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let classes: Vec<usize> = (0..40).map(|i| i / 4).collect();
        let f = Array2::from_shape_fn((40, 4), |_| rng.random_range(-1.0..1.0));
        let a = acoustic_ap_sampled(f.view(), &classes, 300, 9).unwrap();
        let b = acoustic_ap_sampled(f.view(), &classes, 300, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num_pairs, 300);
        let all = acoustic_ap_sampled(f.view(), &classes, 10_000, 9).unwrap();
        assert_eq!(all, acoustic_ap(f.view(), &classes).unwrap());
    }

    #[test]
    fn crossview_perfect_and_missing_proxy() {
        let g = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let f = array![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
        let r = crossview_ap(f.view(), &[0, 2, 1], g.view(), &[0, 1, 2]).unwrap();
        assert_eq!(r.ap, 1.0);
        assert_eq!(r.num_pairs, 9);
        assert!(matches!(
            crossview_ap(f.view(), &[0, 2, 5], g.view(), &[0, 1, 2]),
            Err(EvalError::MissingProxy(5))
        ));
    }

    #[test]
    fn crossview_hand_built_inversion() {
        let g = array![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]];
        // AWE of class 0 leans toward class 1's proxy.
        let f = array![[0.6, 0.8], [0.0, 1.0], [-1.0, 0.1]];
        let classes = [0, 1, 2];
        let s = build_similarity(f.view(), Some(g.view()), SimilarityKind::ProxyPn)
            .unwrap()
            .entries;
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                scores.push(s[[i, j]]);
                labels.push(classes[i] == j);
            }
        }
        let r = crossview_ap(f.view(), &classes, g.view(), &[0, 1, 2]).unwrap();
        assert!((r.ap - sweep_oracle(&scores, &labels)).abs() < 1e-12);
        assert!(r.ap < 1.0);
    }

    #[test]
    fn random_crossview_is_near_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = 20;
        let g = Array2::from_shape_fn((k, 16), |_| rng.random_range(-1.0..1.0));
        let classes: Vec<usize> = (0..200).map(|i| i % k).collect();
        let f = Array2::from_shape_fn((200, 16), |_| rng.random_range(-1.0..1.0));
        let ids: Vec<usize> = (0..k).collect();
        let r = crossview_ap(f.view(), &classes, g.view(), &ids).unwrap();
        assert!(r.ap < 3.0 / k as f64 + 0.02, "{}", r.ap);
    }
}
