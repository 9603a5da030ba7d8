use super::adam::{adam_step, AdamState};
use super::config::TrainConfig;
use super::TrainError;
use crate::data::{sample_batch, Dataset, Item, Split};
use crate::encoders::{
    acoustic_backward, acoustic_forward, init_params, save_checkpoint, text_backward, text_forward,
    CharSequence, Checkpoint, EncoderError, EncoderParams, FeatureSequence, Mode,
};
use crate::eval::{
    acoustic_ap, acoustic_ap_sampled, crossview_ap, dtw_acoustic_ap, write_curve, CurvePoint,
    EvalError, EvalReport, Task,
};
use crate::losses::LossError;
use crate::seed::{derive_seed, stream_rng};
use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

/// Items encoded per forward call during evaluation.
const EVAL_CHUNK: usize = 256;

const STREAM_INIT: u64 = 0;
const STREAM_DATA: u64 = 1;
const STREAM_DROPOUT: u64 = 2;
const STREAM_LOSS: u64 = 3;
const STREAM_EVAL: u64 = 4;

/// Dev metrics after one epoch; epoch 0 is the untrained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean batch loss over the epoch; absent for epoch 0.
    pub train_loss: Option<f64>,
    pub dev_acoustic_ap: f64,
    /// Absent for objectives that never train the text encoder.
    pub dev_crossview_ap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub config: TrainConfig,
    pub dataset_seed: u64,
    pub steps_per_epoch: usize,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_dev_acoustic_ap: f64,
    /// Test evaluation of the selected checkpoint.
    pub test: Vec<EvalReport>,
    pub test_acoustic_ap: f64,
    pub test_crossview_ap: Option<f64>,
}

impl RunRecord {
    pub fn curve(&self) -> Vec<CurvePoint> {
        self.epochs
            .iter()
            .map(|e| CurvePoint {
                epoch: e.epoch,
                dev_acoustic_ap: e.dev_acoustic_ap,
            })
            .collect()
    }
}

/// A finished run: its record, the selected parameters and per-epoch wall
/// clock (kept apart from the record so records stay reproducible).
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub record: RunRecord,
    pub best: Checkpoint,
    pub epoch_seconds: Vec<f64>,
}

/// State at the moment a run produced a non-finite value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub max_abs_grad: f64,
    pub params_finite: bool,
    pub completed_epochs: Vec<EpochRecord>,
}

/// Divergence report plus the parameters that produced it.
#[derive(Debug, Clone)]
pub struct Divergence {
    pub report: DivergenceReport,
    pub params: EncoderParams,
}

/// Human-readable objective name.
pub fn objective_label(cfg: &TrainConfig) -> String {
    use crate::losses::Objective;
    match &cfg.objective {
        Objective::Gpw { .. } => cfg.objective.loss_spec().expect("gpw").to_string(),
        Objective::Contrastive { .. } => "Contrastive".into(),
        Objective::Triplet { .. } => "Triplet".into(),
        Objective::MvTriplet { .. } => "MV Triplet".into(),
    }
}

/// Acoustic embeddings of `items` in eval mode.
pub fn embed_items(params: &EncoderParams, items: &[Item]) -> Result<Array2<f64>, TrainError> {
    let mut rng = stream_rng(0, STREAM_EVAL);
    let mut parts = Vec::new();
    for chunk in items.chunks(EVAL_CHUNK) {
        let xs: Vec<&FeatureSequence> = chunk.iter().map(|i| &i.features).collect();
        parts.push(acoustic_forward(&xs, params, Mode::Eval, &mut rng)?.0);
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    Ok(concatenate(Axis(0), &views).expect("matching widths"))
}

/// One text embedding per class, in the order given.
pub fn embed_classes(
    params: &EncoderParams,
    dataset: &Dataset,
    classes: &[usize],
) -> Result<Array2<f64>, TrainError> {
    let mut parts = Vec::new();
    for chunk in classes.chunks(EVAL_CHUNK) {
        let ts: Vec<CharSequence> = chunk.iter().map(|&c| dataset.class_chars(c)).collect();
        parts.push(text_forward(&ts, params)?.0);
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    Ok(concatenate(Axis(0), &views).expect("matching widths"))
}

fn distinct_sorted(classes: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut v: Vec<usize> = classes.collect();
    v.sort_unstable();
    v.dedup();
    v
}

struct SplitEval {
    acoustic: crate::eval::ApResult,
    crossview: Option<crate::eval::ApResult>,
}

fn evaluate_split(
    params: &EncoderParams,
    dataset: &Dataset,
    split: Split,
    with_text: bool,
    max_pairs: Option<usize>,
    seed: u64,
) -> Result<SplitEval, TrainError> {
    let items = dataset.split(split);
    let classes: Vec<usize> = items.iter().map(|i| i.class).collect();
    let awes = embed_items(params, items)?;
    let acoustic = match max_pairs {
        Some(m) => acoustic_ap_sampled(awes.view(), &classes, m, seed)?,
        None => acoustic_ap(awes.view(), &classes)?,
    };
    let crossview = if with_text {
        let ids = distinct_sorted(classes.iter().copied());
        let agwes = embed_classes(params, dataset, &ids)?;
        Some(crossview_ap(awes.view(), &classes, agwes.view(), &ids)?)
    } else {
        None
    };
    Ok(SplitEval {
        acoustic,
        crossview,
    })
}

/// Reports for `params` on one split: acoustic AP over all pairs and
/// cross-view AP, plus the raw-feature DTW baseline when `dtw` is set.
pub fn evaluate_params(
    params: &EncoderParams,
    dataset: &Dataset,
    split: Split,
    dtw: bool,
    seed: u64,
) -> Result<Vec<EvalReport>, TrainError> {
    let r = evaluate_split(params, dataset, split, true, None, seed)?;
    let mut out = vec![EvalReport {
        task: Task::Acoustic,
        split,
        ap: r.acoustic.ap,
        num_pairs: r.acoustic.num_pairs,
        seed,
    }];
    if let Some(c) = r.crossview {
        out.push(EvalReport {
            task: Task::Crossview,
            split,
            ap: c.ap,
            num_pairs: c.num_pairs,
            seed,
        });
    }
    if dtw {
        let items = dataset.split(split);
        let seqs: Vec<FeatureSequence> = items.iter().map(|i| i.features.clone()).collect();
        let classes: Vec<usize> = items.iter().map(|i| i.class).collect();
        let d = dtw_acoustic_ap(&seqs, &classes)?;
        out.push(EvalReport {
            task: Task::DtwAcoustic,
            split,
            ap: d.ap,
            num_pairs: d.num_pairs,
            seed,
        });
    }
    Ok(out)
}

fn max_abs(tensors: &[&[f64]]) -> f64 {
    tensors.iter().flat_map(|t| t.iter()).fold(0.0_f64, |m, v| {
        if v.is_nan() {
            f64::NAN
        } else {
            m.max(v.abs())
        }
    })
}

/// Trains on `dataset.train`, evaluates on dev after every `eval_every`
/// epochs (and before training, as epoch 0), keeps the parameters with the
/// highest dev acoustic AP (earliest on ties) and evaluates them on test.
///
/// Random streams: the run seed derives independent streams for
/// initialization, batch sampling, dropout masks and triplet sampling.
pub fn train(config: &TrainConfig, dataset: &Dataset) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if config.encoder.feature_dim != dataset.spec.feature_dim {
        return Err(TrainError::InvalidConfig(format!(
            "encoder expects {} features but the dataset has {}",
            config.encoder.feature_dim, dataset.spec.feature_dim
        )));
    }
    if config.encoder.alphabet_size < dataset.lexicon.alphabet_size {
        return Err(TrainError::InvalidConfig(
            "encoder alphabet is smaller than the dataset alphabet".into(),
        ));
    }
    let n = config.batch_size();
    let steps = dataset.train.len() / n;
    if steps == 0 {
        return Err(TrainError::InvalidConfig(format!(
            "training split of {} items is smaller than one batch of {n}",
            dataset.train.len()
        )));
    }
    let with_text = config.objective.uses_text();
    let mut params = init_params(&config.encoder, derive_seed(config.seed, STREAM_INIT))?;
    let mut data_rng = stream_rng(config.seed, STREAM_DATA);
    let mut dropout_rng = stream_rng(config.seed, STREAM_DROPOUT);
    let mut loss_rng = stream_rng(config.seed, STREAM_LOSS);
    let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let mut adam = AdamState::new(&shapes);

    let dev_seed = derive_seed(config.seed, STREAM_EVAL);
    let dev = |p: &EncoderParams| {
        evaluate_split(
            p,
            dataset,
            Split::Dev,
            with_text,
            config.max_dev_pairs,
            dev_seed,
        )
    };
    let initial = dev(&params)?;
    let mut epochs = vec![EpochRecord {
        epoch: 0,
        train_loss: None,
        dev_acoustic_ap: initial.acoustic.ap,
        dev_crossview_ap: initial.crossview.map(|r| r.ap),
    }];
    let mut best = (0usize, initial.acoustic.ap, params.clone());
    let mut epoch_seconds = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let mut loss_sum = 0.0;
        for step in 0..steps {
            let batch = sample_batch(
                &dataset.train,
                config.classes_per_batch,
                config.per_class,
                &mut data_rng,
            )?;
            let xs: Vec<&FeatureSequence> = batch
                .indices
                .iter()
                .map(|&i| &dataset.train[i].features)
                .collect();
            let (awes, a_cache) = acoustic_forward(&xs, &params, Mode::Train, &mut dropout_rng)?;

            // One text embedding per distinct class, broadcast to its items.
            let text = if with_text {
                let ids = distinct_sorted(batch.classes.iter().copied());
                let ts: Vec<CharSequence> = ids.iter().map(|&c| dataset.class_chars(c)).collect();
                let (unique, t_cache) = text_forward(&ts, &params)?;
                let rows: Vec<usize> = batch
                    .classes
                    .iter()
                    .map(|c| ids.binary_search(c).expect("class present"))
                    .collect();
                Some((unique.select(Axis(0), &rows), rows, t_cache, ids.len()))
            } else {
                None
            };
            let agwes = text.as_ref().map(|(g, ..)| g.view());
            let embeddings_finite = awes.iter().all(|v| v.is_finite())
                && agwes.is_none_or(|g| g.iter().all(|v| v.is_finite()));
            if !embeddings_finite {
                return Err(diverged(epoch, step, f64::NAN, f64::NAN, &params, &epochs));
            }
            let eval = match config
                .objective
                .evaluate(awes.view(), agwes, &batch.classes, &mut loss_rng)
                .map_err(TrainError::from)
            {
                Ok(e) => e,
                Err(e) if is_numeric(&e) => {
                    return Err(diverged(epoch, step, f64::NAN, f64::NAN, &params, &epochs));
                }
                Err(e) => return Err(e),
            };
            let loss = eval.value();

            let mut grads = params.zero_grads();
            let grad_ok = loss.is_finite()
                && eval.grad_awes.iter().all(|v| v.is_finite())
                && eval
                    .grad_agwes
                    .as_ref()
                    .is_none_or(|g| g.iter().all(|v| v.is_finite()));
            if grad_ok {
                acoustic_backward(
                    &params,
                    &a_cache,
                    eval.grad_awes.view(),
                    &mut grads.acoustic,
                )?;
                if let (Some((_, rows, t_cache, m)), Some(g)) = (&text, &eval.grad_agwes) {
                    let mut d_unique = Array2::zeros((*m, g.ncols()));
                    for (item, &r) in rows.iter().enumerate() {
                        let mut row = d_unique.row_mut(r);
                        row += &g.row(item);
                    }
                    text_backward(&params, t_cache, d_unique.view(), &mut grads.text)?;
                }
            }
            let g_max = max_abs(&grads.tensors());
            if !grad_ok || !g_max.is_finite() {
                return Err(diverged(epoch, step, loss, g_max, &params, &epochs));
            }
            {
                let g_view = grads.tensors();
                let mut p_view = params.tensors_mut();
                adam_step(&mut p_view, &g_view, &mut adam, config.lr, &config.adam)?;
            }
            if !params.all_finite() {
                return Err(diverged(epoch, step, loss, g_max, &params, &epochs));
            }
            loss_sum += loss;
        }
        epoch_seconds.push(started.elapsed().as_secs_f64());

        if epoch % config.eval_every == 0 || epoch == config.epochs {
            let r = match dev(&params) {
                Ok(r) => r,
                Err(e) if is_numeric(&e) => {
                    return Err(diverged(epoch, steps, f64::NAN, f64::NAN, &params, &epochs));
                }
                Err(e) => return Err(e),
            };
            if r.acoustic.ap > best.1 {
                best = (epoch, r.acoustic.ap, params.clone());
            }
            epochs.push(EpochRecord {
                epoch,
                train_loss: Some(loss_sum / steps as f64),
                dev_acoustic_ap: r.acoustic.ap,
                dev_crossview_ap: r.crossview.map(|c| c.ap),
            });
        }
    }

    let (best_epoch, best_dev, best_params) = best;
    let test_seed = derive_seed(config.seed, STREAM_EVAL + 1);
    let t = evaluate_split(
        &best_params,
        dataset,
        Split::Test,
        with_text,
        None,
        test_seed,
    )?;
    let mut test = vec![EvalReport {
        task: Task::Acoustic,
        split: Split::Test,
        ap: t.acoustic.ap,
        num_pairs: t.acoustic.num_pairs,
        seed: config.seed,
    }];
    if let Some(c) = t.crossview {
        test.push(EvalReport {
            task: Task::Crossview,
            split: Split::Test,
            ap: c.ap,
            num_pairs: c.num_pairs,
            seed: config.seed,
        });
    }
    let record = RunRecord {
        label: objective_label(config),
        config: config.clone(),
        dataset_seed: dataset.spec.seed,
        steps_per_epoch: steps,
        epochs,
        best_epoch,
        best_dev_acoustic_ap: best_dev,
        test,
        test_acoustic_ap: t.acoustic.ap,
        test_crossview_ap: t.crossview.map(|c| c.ap),
    };
    Ok(TrainOutcome {
        record,
        best: Checkpoint::new(best_params, best_epoch),
        epoch_seconds,
    })
}

/// Non-finite intermediate values, as opposed to malformed inputs.
fn is_numeric(e: &TrainError) -> bool {
    use crate::math::MathError;
    matches!(
        e,
        TrainError::Loss(LossError::Math(MathError::NonFinite(_)))
            | TrainError::Eval(EvalError::NonFinite)
            | TrainError::Eval(EvalError::Math(MathError::NonFinite(_)))
            | TrainError::Encoder(EncoderError::NonFinite(_))
    )
}

fn diverged(
    epoch: usize,
    step: usize,
    loss: f64,
    max_abs_grad: f64,
    params: &EncoderParams,
    epochs: &[EpochRecord],
) -> TrainError {
    TrainError::Diverged(Box::new(Divergence {
        report: DivergenceReport {
            epoch,
            step,
            loss,
            max_abs_grad,
            params_finite: params.all_finite(),
            completed_epochs: epochs.to_vec(),
        },
        params: params.clone(),
    }))
}

/// File names inside a run directory.
pub const RECORD_FILE: &str = "record.json";
pub const CURVE_FILE: &str = "curve.csv";
pub const CHECKPOINT_FILE: &str = "model.json";
pub const TIMINGS_FILE: &str = "timings.json";

/// Writes the record, learning curve, selected checkpoint and timings.
pub fn write_run(dir: &Path, outcome: &TrainOutcome) -> Result<(), TrainError> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join(RECORD_FILE), &outcome.record)?;
    write_curve(&dir.join(CURVE_FILE), &outcome.record.curve())?;
    save_checkpoint(&dir.join(CHECKPOINT_FILE), &outcome.best)?;
    write_json(&dir.join(TIMINGS_FILE), &outcome.epoch_seconds)?;
    Ok(())
}

/// Writes the divergence report and the offending parameters.
pub fn write_divergence(dir: &Path, d: &Divergence) -> Result<(), TrainError> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("divergence.json"), &d.report)?;
    save_checkpoint(
        &dir.join("diverged-model.json"),
        &Checkpoint::new(d.params.clone(), d.report.epoch),
    )?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), TrainError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
