use super::TrainError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(shapes: &[usize]) -> Self {
        Self {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of every tensor in `params`.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamState,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<(), TrainError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(TrainError::ShapeMismatch(format!(
            "{} parameter tensors, {} gradient tensors, {} moment buffers",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (k, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.m[k].len() {
            return Err(TrainError::ShapeMismatch(format!(
                "tensor {k}: {} parameters, {} gradients, {} moments",
                p.len(),
                g.len(),
                state.m[k].len()
            )));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(p: &mut Vec<f64>, g: &[f64], state: &mut AdamState, lr: f64) {
        adam_step(
            &mut [p.as_mut_slice()],
            &[g],
            state,
            lr,
            &AdamConfig::default(),
        )
        .unwrap();
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(&[2]);
        for _ in 0..10 {
            run(&mut p, &[0.0, 0.0], &mut s, 0.1);
        }
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_lr_against_the_sign() {
        let mut p = vec![0.0, 0.0, 0.0];
        let mut s = AdamState::new(&[3]);
        let g = [3.0, -0.5, 1e-3];
        run(&mut p, &g, &mut s, 0.01);
        // m̂ = g and v̂ = g², so Δ = −lr·g/(|g| + ε).
        for (pi, gi) in p.iter().zip(g) {
            let expected = -0.01 * gi / (gi.abs() + 1e-8);
            assert!((pi - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_gradient_steps_approach_lr() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(&[1]);
        let mut last = 0.0;
        for _ in 0..5000 {
            let before = p[0];
            run(&mut p, &[0.7], &mut s, 1e-3);
            last = before - p[0];
        }
        assert!((last - 1e-3).abs() < 1e-9, "{last}");
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = vec![0.0, 1.0];
        let mut s = AdamState::new(&[2]);
        let r = adam_step(
            &mut [p.as_mut_slice()],
            &[&[1.0][..]],
            &mut s,
            0.1,
            &AdamConfig::default(),
        );
        assert!(matches!(r, Err(TrainError::ShapeMismatch(_))));
    }
}
