//! Finite-difference audit of every trainable objective and of both
//! encoders' parameter gradients.

use crate::encoders::{
    acoustic_backward, acoustic_forward, init_params, text_backward, text_forward, CharSequence,
    EncoderConfig, EncoderError, EncoderParams, FeatureSequence, Mode,
};
use crate::losses::audit::{central_difference, compare_gradients, finite_difference_audit};
use crate::losses::{asymmetric_grid_cells, AuditReport, LossError, LossSpec, Objective};
use crate::seed::{derive_seed, stream_rng};
use crate::train::{table, GridEntry};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("invalid audit configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    pub seed: u64,
    /// Random batches per objective.
    pub batches: usize,
    pub classes_per_batch: usize,
    pub per_class: usize,
    pub dim: usize,
    pub loss_step: f64,
    pub loss_tolerance: f64,
    /// End-to-end encoder cases.
    pub encoder_cases: usize,
    pub encoder_step: f64,
    pub encoder_tolerance: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            batches: 100,
            classes_per_batch: 4,
            per_class: 2,
            dim: 6,
            loss_step: 1e-6,
            loss_tolerance: 1e-5,
            encoder_cases: 4,
            encoder_step: 1e-5,
            encoder_tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditTarget {
    Embeddings,
    AcousticEncoder,
    TextEncoder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub name: String,
    pub target: AuditTarget,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Worst embedding-gradient disagreement, for objective entries.
    pub worst: Option<AuditReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSuiteReport {
    pub config: AuditConfig,
    pub entries: Vec<AuditEntry>,
    pub passed: bool,
}

impl AuditSuiteReport {
    pub fn failures(&self) -> impl Iterator<Item = &AuditEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }
}

/// Every trainable objective of the comparison tables plus the asymmetric
/// grid cells, each once, in table order.
pub fn audited_objectives() -> Vec<(String, Objective)> {
    let mut entries: Vec<GridEntry> = (1..=4).flat_map(|n| table(n).expect("table")).collect();
    entries.extend(
        asymmetric_grid_cells()
            .into_iter()
            .map(|s: LossSpec| GridEntry::new(s.to_string(), Some(s.into()))),
    );
    let mut out: Vec<(String, Objective)> = Vec::new();
    for e in entries {
        if let Some(obj) = e.objective {
            if !out.iter().any(|(_, o)| *o == obj) {
                out.push((e.name, obj));
            }
        }
    }
    out
}

/// Random class-grouped batch with one proxy row per item, shared within a
/// class.
fn random_batch<R: Rng + ?Sized>(
    m: usize,
    k: usize,
    d: usize,
    rng: &mut R,
) -> (Array2<f64>, Array2<f64>, Vec<usize>) {
    let n = m * k;
    let classes: Vec<usize> = (0..n).map(|i| i / k).collect();
    let awes = Array2::from_shape_simple_fn((n, d), || rng.sample(StandardNormal));
    let protos: Array2<f64> = Array2::from_shape_simple_fn((m, d), || rng.sample(StandardNormal));
    let agwes = Array2::from_shape_fn((n, d), |(i, j)| protos[[classes[i], j]]);
    (awes, agwes, classes)
}

fn audit_objective(
    name: &str,
    objective: &Objective,
    cfg: &AuditConfig,
    stream: u64,
) -> Result<AuditEntry, AuditError> {
    let mut rng = stream_rng(cfg.seed, stream);
    let mut worst: Option<AuditReport> = None;
    for _ in 0..cfg.batches {
        let (awes, agwes, classes) =
            random_batch(cfg.classes_per_batch, cfg.per_class, cfg.dim, &mut rng);
        let g = objective.uses_text().then(|| agwes.view());
        let r = finite_difference_audit(
            objective,
            awes.view(),
            g,
            &classes,
            rng.random(),
            cfg.loss_step,
        )?;
        if worst
            .as_ref()
            .is_none_or(|w| r.max_error > w.max_error || r.max_error.is_nan())
        {
            worst = Some(r);
        }
    }
    let max_error = worst.as_ref().map_or(0.0, |w| w.max_error);
    Ok(AuditEntry {
        name: name.to_string(),
        target: AuditTarget::Embeddings,
        cases: cfg.batches,
        max_error,
        tolerance: cfg.loss_tolerance,
        passed: max_error < cfg.loss_tolerance,
        worst,
    })
}

fn small_encoder_config(layers: usize) -> EncoderConfig {
    EncoderConfig {
        feature_dim: 3,
        alphabet_size: 5,
        char_dim: 2,
        hidden: 3,
        layers,
        project: true,
        embedding_dim: 4,
        dropout: 0.4,
    }
}

fn flat(tensors: Vec<&[f64]>) -> Vec<f64> {
    tensors.into_iter().flatten().copied().collect()
}

fn set_flat(tensors: Vec<&mut [f64]>, x: &[f64]) {
    for (v, &s) in tensors.into_iter().flatten().zip(x) {
        *v = s;
    }
}

/// One end-to-end case: the asymmetric-proxy loss on a random batch of
/// sequences and words. Returns the worst acoustic and text parameter
/// gradient errors.
fn encoder_case(cfg: &AuditConfig, case: usize) -> Result<(f64, f64), AuditError> {
    let seed = derive_seed(cfg.seed, 5000 + case as u64);
    let mut rng = stream_rng(seed, 0);
    let enc = small_encoder_config(1 + case % 2);
    let mut params = init_params(&enc, seed)?;
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    let (m, k) = (3, 2);
    let classes: Vec<usize> = (0..m * k).map(|i| i / k).collect();
    let xs: Vec<FeatureSequence> = (0..m * k)
        .map(|_| {
            let t = rng.random_range(1..=6);
            FeatureSequence::new(Array2::from_shape_simple_fn((t, enc.feature_dim), || {
                rng.random_range(-1.5..1.5)
            }))
        })
        .collect::<Result<_, _>>()?;
    let words: Vec<CharSequence> = (0..m)
        .map(|_| {
            let len = rng.random_range(1..=5);
            let chars = (0..len)
                .map(|_| rng.random_range(0..enc.alphabet_size as u32))
                .collect();
            CharSequence::new(chars, enc.alphabet_size)
        })
        .collect::<Result<_, _>>()?;
    let ts: Vec<&CharSequence> = classes.iter().map(|&c| &words[c]).collect();
    let objective: Objective = LossSpec::asymmetric_proxy().into();
    let dropout_seed: u64 = rng.random();

    let loss = |p: &EncoderParams, want: bool| -> Result<(f64, Vec<f64>, Vec<f64>), AuditError> {
        let mut drop_rng = stream_rng(dropout_seed, 0);
        let (f, a_cache) = acoustic_forward(&xs, p, Mode::Train, &mut drop_rng)?;
        let (g, t_cache) = text_forward(&ts, p)?;
        let mut loss_rng = stream_rng(dropout_seed, 1);
        let eval = objective.evaluate(f.view(), Some(g.view()), &classes, &mut loss_rng)?;
        if !want {
            return Ok((eval.value(), Vec::new(), Vec::new()));
        }
        let mut grads = p.zero_grads();
        acoustic_backward(p, &a_cache, eval.grad_awes.view(), &mut grads.acoustic)?;
        let gg = eval.grad_agwes.as_ref().expect("multi-view objective");
        text_backward(p, &t_cache, gg.view(), &mut grads.text)?;
        Ok((
            eval.value(),
            flat(grads.acoustic.tensors()),
            flat(grads.text.tensors()),
        ))
    };

    let (_, ga, gt) = loss(&params, true)?;
    let mut failure = None;
    let mut probe = params.clone();
    let x0 = flat(params.acoustic.tensors());
    let na = central_difference(
        |x| {
            set_flat(probe.acoustic.tensors_mut(), x);
            loss(&probe, false).map_or_else(
                |e| {
                    failure.get_or_insert(e);
                    f64::NAN
                },
                |r| r.0,
            )
        },
        &x0,
        cfg.encoder_step,
    );
    set_flat(probe.acoustic.tensors_mut(), &x0);
    let y0 = flat(params.text.tensors());
    let nt = central_difference(
        |y| {
            set_flat(probe.text.tensors_mut(), y);
            loss(&probe, false).map_or_else(
                |e| {
                    failure.get_or_insert(e);
                    f64::NAN
                },
                |r| r.0,
            )
        },
        &y0,
        cfg.encoder_step,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((
        compare_gradients(&ga, &na).error,
        compare_gradients(&gt, &nt).error,
    ))
}

/// Runs the full audit: every objective on `batches` random batches, then
/// `encoder_cases` end-to-end parameter checks.
pub fn run_audit(cfg: &AuditConfig) -> Result<AuditSuiteReport, AuditError> {
    if cfg.batches == 0 || cfg.classes_per_batch < 2 || cfg.per_class < 2 || cfg.dim < 2 {
        return Err(AuditError::InvalidConfig(
            "need at least one batch of two classes with two items each, in two dimensions".into(),
        ));
    }
    let mut entries = Vec::new();
    for (i, (name, obj)) in audited_objectives().iter().enumerate() {
        entries.push(audit_objective(name, obj, cfg, i as u64)?);
    }
    let (mut acoustic, mut text) = (0.0_f64, 0.0_f64);
    for case in 0..cfg.encoder_cases {
        let (a, t) = encoder_case(cfg, case)?;
        acoustic = if a.is_nan() { a } else { acoustic.max(a) };
        text = if t.is_nan() { t } else { text.max(t) };
    }
    for (name, target, err) in [
        ("acoustic encoder", AuditTarget::AcousticEncoder, acoustic),
        ("text encoder", AuditTarget::TextEncoder, text),
    ] {
        entries.push(AuditEntry {
            name: name.to_string(),
            target,
            cases: cfg.encoder_cases,
            max_error: err,
            tolerance: cfg.encoder_tolerance,
            passed: err < cfg.encoder_tolerance,
            worst: None,
        });
    }
    let passed = entries.iter().all(|e| e.passed);
    Ok(AuditSuiteReport {
        config: cfg.clone(),
        entries,
        passed,
    })
}
