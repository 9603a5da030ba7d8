//! The per-set functions of the pair weighting framework. Each term sums over
//! anchors `i` a function of the similarities `S_ij` for `j` in the anchor's
//! set, and returns the value together with `∂/∂S`.
//!
//! Positive polarity acts on `λ - S_ij` (pulling pairs together), negative
//! polarity on `S_ik - λ` (pushing pairs apart). Empty sets contribute zero.

use super::LossError;
use crate::math::{else_fn, else_weights, lse, sigmoid, softmax, softplus};
use ndarray::{Array2, ArrayView2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    /// `dz/dS` for the signed argument `z = scale * (±S ∓ λ)`.
    fn sign(self) -> f64 {
        match self {
            Polarity::Positive => -1.0,
            Polarity::Negative => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermOutput {
    pub value: f64,
    pub grad: Array2<f64>,
}

fn check_scale(scale: f64) -> Result<(), LossError> {
    if scale > 0.0 && scale.is_finite() {
        Ok(())
    } else {
        Err(LossError::InvalidScale(scale))
    }
}

fn margin_args(
    s: ArrayView2<'_, f64>,
    i: usize,
    set: &[usize],
    polarity: Polarity,
    scale: f64,
    lambda: f64,
) -> Vec<f64> {
    let sign = polarity.sign();
    set.iter()
        .map(|&j| scale * sign * (s[[i, j]] - lambda))
        .collect()
}

/// Mean-softplus: `Σ_i 1/|X_i| Σ_{j∈X_i} log(1 + e^{z_ij})`.
pub fn msp_term(
    s: ArrayView2<'_, f64>,
    sets: &[Vec<usize>],
    polarity: Polarity,
    scale: f64,
    lambda: f64,
) -> Result<TermOutput, LossError> {
    check_scale(scale)?;
    let mut grad = Array2::zeros(s.raw_dim());
    let mut value = 0.0;
    let sign = polarity.sign();
    for (i, set) in sets.iter().enumerate() {
        if set.is_empty() {
            continue;
        }
        let inv = 1.0 / set.len() as f64;
        let zs = margin_args(s, i, set, polarity, scale, lambda);
        value += inv * zs.iter().map(|&z| softplus(z)).sum::<f64>();
        for (&j, &z) in set.iter().zip(&zs) {
            grad[[i, j]] += inv * scale * sign * sigmoid(z);
        }
    }
    Ok(TermOutput { value, grad })
}

/// Extended log-sum-exp with the `1/scale` prefactor:
/// `Σ_i (1/scale) log(1 + Σ_{j∈X_i} e^{z_ij})`.
pub fn else_term(
    s: ArrayView2<'_, f64>,
    sets: &[Vec<usize>],
    polarity: Polarity,
    scale: f64,
    lambda: f64,
) -> Result<TermOutput, LossError> {
    check_scale(scale)?;
    let mut grad = Array2::zeros(s.raw_dim());
    let mut value = 0.0;
    let sign = polarity.sign();
    for (i, set) in sets.iter().enumerate() {
        if set.is_empty() {
            continue;
        }
        let zs = margin_args(s, i, set, polarity, scale, lambda);
        value += else_fn(&zs) / scale;
        for (&j, w) in set.iter().zip(else_weights(&zs)) {
            grad[[i, j]] += sign * w;
        }
    }
    Ok(TermOutput { value, grad })
}

/// Margin-free log-sum-exp with the `1/scale` prefactor:
/// `Σ_i (1/scale) LSE_{j∈X_i}(±scale·S_ij)`.
pub fn lse_term(
    s: ArrayView2<'_, f64>,
    sets: &[Vec<usize>],
    polarity: Polarity,
    scale: f64,
) -> Result<TermOutput, LossError> {
    check_scale(scale)?;
    let mut grad = Array2::zeros(s.raw_dim());
    let mut value = 0.0;
    let sign = polarity.sign();
    for (i, set) in sets.iter().enumerate() {
        if set.is_empty() {
            continue;
        }
        let zs: Vec<f64> = set.iter().map(|&j| scale * sign * s[[i, j]]).collect();
        value += lse(&zs)? / scale;
        for (&j, w) in set.iter().zip(softmax(&zs)) {
            grad[[i, j]] += sign * w;
        }
    }
    Ok(TermOutput { value, grad })
}

/// Scaled mean similarity, negated for positives: `Σ_i ∓scale · mean_{j∈X_i} S_ij`.
pub fn neg_mean_term(
    s: ArrayView2<'_, f64>,
    sets: &[Vec<usize>],
    polarity: Polarity,
    scale: f64,
) -> Result<TermOutput, LossError> {
    check_scale(scale)?;
    let mut grad = Array2::zeros(s.raw_dim());
    let mut value = 0.0;
    let sign = polarity.sign();
    for (i, set) in sets.iter().enumerate() {
        if set.is_empty() {
            continue;
        }
        let w = sign * scale / set.len() as f64;
        for &j in set {
            value += w * s[[i, j]];
            grad[[i, j]] += w;
        }
    }
    Ok(TermOutput { value, grad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::partition::{partition, SelfPairPolicy};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Term<'a> = dyn Fn(ArrayView2<'_, f64>) -> TermOutput + 'a;

    fn fd_check(term: &Term<'_>, s: &Array2<f64>) -> f64 {
        let analytic = term(s.view()).grad;
        let eps = 1e-6;
        let mut worst = 0.0_f64;
        let scale = analytic
            .iter()
            .fold(0.0_f64, |m, g| m.max(g.abs()))
            .max(1e-9);
        for idx in ndarray::indices(s.raw_dim()) {
            let mut p = s.clone();
            p[idx] += eps;
            let mut m = s.clone();
            m[idx] -= eps;
            let numeric = (term(p.view()).value - term(m.view()).value) / (2.0 * eps);
            worst = worst.max((numeric - analytic[idx]).abs() / scale);
        }
        worst
    }

    fn random_s(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn msp_examples() {
        let s = array![[0.5]];
        let out = msp_term(s.view(), &[vec![0]], Polarity::Positive, 2.0, 0.5).unwrap();
        assert!((out.value - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((out.grad[[0, 0]] + 1.0).abs() < 1e-12);

        let s = array![[0.9]];
        let out = msp_term(s.view(), &[vec![0]], Polarity::Positive, 2.0, 0.5).unwrap();
        assert!((out.value - 0.371_100_1).abs() < 1e-6);

        assert!(matches!(
            msp_term(s.view(), &[vec![0]], Polarity::Positive, 0.0, 0.5),
            Err(LossError::InvalidScale(_))
        ));
    }

    #[test]
    fn else_examples() {
        let s = array![[0.3, 0.8], [0.1, 0.1]];
        let empty = else_term(s.view(), &[vec![], vec![]], Polarity::Positive, 2.0, 0.5).unwrap();
        assert_eq!(empty.value, 0.0);
        assert!(empty.grad.iter().all(|&g| g == 0.0));

        let single = else_term(s.view(), &[vec![1], vec![]], Polarity::Positive, 2.0, 0.5).unwrap();
        let msp = msp_term(s.view(), &[vec![1], vec![]], Polarity::Positive, 2.0, 0.5).unwrap();
        assert!((single.value - msp.value / 2.0).abs() < 1e-14);

        let tied = else_term(
            s.view(),
            &[vec![], vec![0, 1]],
            Polarity::Negative,
            50.0,
            0.5,
        )
        .unwrap();
        assert_eq!(tied.grad[[1, 0]], tied.grad[[1, 1]]);
        let total = tied.grad[[1, 0]] + tied.grad[[1, 1]];
        assert!((tied.grad[[1, 0]] - total / 2.0).abs() < 1e-15);
        assert!(total < 1.0);
    }

    #[test]
    fn lse_and_neg_mean_examples() {
        let s = array![[0.0]];
        let out = lse_term(s.view(), &[vec![0]], Polarity::Negative, 1.0).unwrap();
        assert_eq!(out.value, 0.0);

        let s = array![[0.4, 0.4, 0.4]];
        let out = neg_mean_term(s.view(), &[vec![0, 1, 2]], Polarity::Positive, 2.0).unwrap();
        assert!((out.value + 2.0 * 0.4).abs() < 1e-15);
        for j in 0..3 {
            assert!((out.grad[[0, j]] + 2.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn all_terms_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let s = random_s(&mut rng, 8);
            let classes: Vec<usize> = (0..8).map(|_| rng.random_range(0..3)).collect();
            let sets = partition(&classes, SelfPairPolicy::Include);
            let (pos, neg) = (sets.positives.clone(), sets.negatives.clone());
            let terms: Vec<Box<Term<'_>>> = vec![
                Box::new(|s| msp_term(s, &pos, Polarity::Positive, 2.0, 0.5).unwrap()),
                Box::new(|s| msp_term(s, &neg, Polarity::Negative, 50.0, 0.5).unwrap()),
                Box::new(|s| else_term(s, &pos, Polarity::Positive, 2.0, 0.5).unwrap()),
                Box::new(|s| else_term(s, &neg, Polarity::Negative, 50.0, 0.5).unwrap()),
                Box::new(|s| lse_term(s, &pos, Polarity::Positive, 2.0).unwrap()),
                Box::new(|s| lse_term(s, &neg, Polarity::Negative, 50.0).unwrap()),
                Box::new(|s| neg_mean_term(s, &pos, Polarity::Positive, 2.0).unwrap()),
                Box::new(|s| neg_mean_term(s, &neg, Polarity::Negative, 50.0).unwrap()),
            ];
            for (k, term) in terms.iter().enumerate() {
                let err = fd_check(term.as_ref(), &s);
                assert!(err < 1e-6, "term {k}: {err}");
            }
        }
    }

    #[test]
    fn gradient_signs_follow_polarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_s(&mut rng, 8);
        let classes: Vec<usize> = (0..8).map(|i| i % 3).collect();
        let sets = partition(&classes, SelfPairPolicy::Exclude);
        let pos = [
            msp_term(s.view(), &sets.positives, Polarity::Positive, 2.0, 0.5).unwrap(),
            else_term(s.view(), &sets.positives, Polarity::Positive, 2.0, 0.5).unwrap(),
            lse_term(s.view(), &sets.positives, Polarity::Positive, 2.0).unwrap(),
            neg_mean_term(s.view(), &sets.positives, Polarity::Positive, 2.0).unwrap(),
        ];
        for out in &pos {
            assert!(out.grad.iter().all(|&g| g <= 0.0));
        }
        let neg = [
            msp_term(s.view(), &sets.negatives, Polarity::Negative, 50.0, 0.5).unwrap(),
            else_term(s.view(), &sets.negatives, Polarity::Negative, 50.0, 0.5).unwrap(),
            lse_term(s.view(), &sets.negatives, Polarity::Negative, 50.0).unwrap(),
            neg_mean_term(s.view(), &sets.negatives, Polarity::Negative, 50.0).unwrap(),
        ];
        for out in &neg {
            assert!(out.grad.iter().all(|&g| g >= 0.0));
        }
    }

    #[test]
    fn else_gradient_mass_is_subnormalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let s = random_s(&mut rng, 6);
            let classes: Vec<usize> = (0..6).map(|_| rng.random_range(0..2)).collect();
            let sets = partition(&classes, SelfPairPolicy::Include);
            for (set, pol, scale) in [
                (&sets.positives, Polarity::Positive, 2.0),
                (&sets.negatives, Polarity::Negative, 50.0),
            ] {
                let out = else_term(s.view(), set, pol, scale, 0.5).unwrap();
                for row in out.grad.rows() {
                    let mass: f64 = row.iter().map(|g| g.abs()).sum();
                    assert!(mass < 1.0 && mass <= scale);
                }
            }
        }
    }
}
