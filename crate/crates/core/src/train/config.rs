use super::adam::AdamConfig;
use super::TrainError;
use crate::encoders::EncoderConfig;
use crate::losses::{LossSpec, Objective};
use serde::{Deserialize, Serialize};

/// Everything that determines a training run besides the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub objective: Objective,
    pub lr: f64,
    pub epochs: usize,
    /// Classes per batch (`M`).
    pub classes_per_batch: usize,
    /// Instances per class (`K`).
    pub per_class: usize,
    pub seed: u64,
    /// Dev evaluation period in epochs; the last epoch is always evaluated.
    pub eval_every: usize,
    /// Pair budget for dev acoustic AP; all pairs when absent.
    pub max_dev_pairs: Option<usize>,
    pub encoder: EncoderConfig,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            objective: LossSpec::asymmetric_proxy().into(),
            lr: 1e-3,
            epochs: 30,
            classes_per_batch: 16,
            per_class: 4,
            seed: 0,
            eval_every: 1,
            max_dev_pairs: None,
            encoder: EncoderConfig::default(),
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive and finite");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.classes_per_batch < 2 || self.per_class < 1 {
            return bad("a batch needs at least two classes and one instance per class");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be at least 1");
        }
        if self.max_dev_pairs == Some(0) {
            return bad("max_dev_pairs must be positive");
        }
        let a = &self.adam;
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return bad("adam betas must lie in [0, 1) and eps must be positive");
        }
        self.objective.validate()?;
        self.encoder.validate()?;
        Ok(())
    }

    pub fn batch_size(&self) -> usize {
        self.classes_per_batch * self.per_class
    }

    pub fn from_toml(text: &str) -> Result<Self, TrainError> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("train config serializes")
    }
}
