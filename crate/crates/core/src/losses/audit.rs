//! Central finite-difference verification of analytic gradients.

use super::objective::Objective;
use super::LossError;
use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Below this gradient magnitude the audit reports absolute error.
pub const ABSOLUTE_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMode {
    /// `max |a - n| / max(‖a‖∞, ‖n‖∞)`
    Relative,
    /// `max |a - n|`, used when both gradients vanish.
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientComparison {
    pub error: f64,
    pub mode: ErrorMode,
    /// Flat index of the worst coordinate.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares an analytic gradient with a numeric one coordinate-wise,
/// normalizing by the largest gradient magnitude.
pub fn compare_gradients(analytic: &[f64], numeric: &[f64]) -> GradientComparison {
    assert_eq!(analytic.len(), numeric.len());
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0_f64, |m, g| m.max(g.abs()));
    let (mut worst, mut worst_index) = (0.0_f64, 0);
    for (k, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        let d = (a - n).abs();
        if d > worst || d.is_nan() {
            worst = d;
            worst_index = k;
        }
    }
    let mode = if scale < ABSOLUTE_FLOOR {
        ErrorMode::Absolute
    } else {
        ErrorMode::Relative
    };
    let error = match mode {
        ErrorMode::Absolute => worst,
        ErrorMode::Relative => worst / scale,
    };
    GradientComparison {
        error,
        mode,
        worst_index,
        analytic: analytic.get(worst_index).copied().unwrap_or(0.0),
        numeric: numeric.get(worst_index).copied().unwrap_or(0.0),
    }
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn central_difference<F>(mut f: F, x: &[f64], eps: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        probe[k] = x[k] + eps;
        let plus = f(&probe);
        probe[k] = x[k] - eps;
        let minus = f(&probe);
        probe[k] = x[k];
        out.push((plus - minus) / (2.0 * eps));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Acoustic,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub max_error: f64,
    pub mode: ErrorMode,
    pub view: View,
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Perturbs every coordinate of every embedding by `±eps` and reports the
/// worst disagreement with the analytic gradient. Sampling-based objectives
/// are re-seeded with `seed` on every evaluation so the sampled triplets stay
/// fixed across probes.
pub fn finite_difference_audit(
    objective: &Objective,
    awes: ArrayView2<'_, f64>,
    agwes: Option<ArrayView2<'_, f64>>,
    classes: &[usize],
    seed: u64,
    eps: f64,
) -> Result<AuditReport, LossError> {
    if !(1e-8..=1e-4).contains(&eps) {
        return Err(LossError::InvalidSpec(format!(
            "finite-difference step {eps} outside [1e-8, 1e-4]"
        )));
    }
    let eval = |f: ArrayView2<'_, f64>, g: Option<ArrayView2<'_, f64>>| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        objective.evaluate(f, g, classes, &mut rng)
    };
    let base = eval(awes, agwes)?;
    let (n, d) = awes.dim();

    let mut analytic: Vec<f64> = base.grad_awes.iter().copied().collect();
    let f0: Vec<f64> = awes.iter().copied().collect();
    let mut failure = None;
    let mut numeric = central_difference(
        |x| {
            let f = Array2::from_shape_vec((n, d), x.to_vec()).expect("shape");
            match eval(f.view(), agwes) {
                Ok(e) => e.value(),
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        &f0,
        eps,
    );
    if let (Some(g), Some(gg)) = (agwes, base.grad_agwes.as_ref()) {
        analytic.extend(gg.iter().copied());
        let g0: Vec<f64> = g.iter().copied().collect();
        let (m, e) = g.dim();
        numeric.extend(central_difference(
            |x| {
                let gx = Array2::from_shape_vec((m, e), x.to_vec()).expect("shape");
                match eval(awes, Some(gx.view())) {
                    Ok(ev) => ev.value(),
                    Err(err) => {
                        failure.get_or_insert(err);
                        f64::NAN
                    }
                }
            },
            &g0,
            eps,
        ));
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let cmp = compare_gradients(&analytic, &numeric);
    let (view, flat) = if cmp.worst_index < n * d {
        (View::Acoustic, cmp.worst_index)
    } else {
        (View::Text, cmp.worst_index - n * d)
    };
    Ok(AuditReport {
        max_error: cmp.error,
        mode: cmp.mode,
        view,
        row: flat / d,
        col: flat % d,
        analytic: cmp.analytic,
        numeric: cmp.numeric,
    })
}
