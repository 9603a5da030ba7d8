use super::lexicon::{build_lexicon, Lexicon};
use super::render::{render_instance, PrototypeTable, RenderParams};
use super::{stream_rng, DataError};
use crate::encoders::{CharSequence, FeatureSequence};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Generation parameters. Seen words contribute `instances_per_word`
/// training instances plus `eval_instances_per_word` instances to each of
/// dev and test; eval-only words appear in dev and test only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub words: usize,
    pub eval_only_words: usize,
    pub instances_per_word: usize,
    pub eval_instances_per_word: usize,
    pub min_word_len: usize,
    pub max_word_len: usize,
    pub alphabet_size: usize,
    pub feature_dim: usize,
    pub base_duration: usize,
    pub duration_jitter: usize,
    pub noise_sigma: f64,
    pub speaker_sigma: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            words: 200,
            eval_only_words: 20,
            instances_per_word: 40,
            eval_instances_per_word: 3,
            min_word_len: 3,
            max_word_len: 8,
            alphabet_size: 26,
            feature_dim: 40,
            base_duration: 3,
            duration_jitter: 1,
            noise_sigma: 0.25,
            speaker_sigma: 0.3,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::InvalidSpec(m.to_string()));
        if self.words < 2 {
            return bad("at least two seen words are required");
        }
        if self.instances_per_word == 0 {
            return bad("instances_per_word must be positive");
        }
        if self.eval_instances_per_word == 0 {
            return bad("eval_instances_per_word must be positive");
        }
        if self.feature_dim == 0 || self.base_duration == 0 {
            return bad("feature_dim and base_duration must be positive");
        }
        for s in [self.noise_sigma, self.speaker_sigma] {
            if !(s >= 0.0 && s.is_finite()) {
                return bad("noise levels must be finite and nonnegative");
            }
        }
        Ok(())
    }

    pub fn render_params(&self) -> RenderParams {
        RenderParams {
            base_duration: self.base_duration,
            duration_jitter: self.duration_jitter,
            noise_sigma: self.noise_sigma,
            speaker_sigma: self.speaker_sigma,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, DataError> {
        let spec: Self = toml::from_str(text).map_err(|e| DataError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One multi-view instance `(x, t, c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub features: FeatureSequence,
    pub chars: CharSequence,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub lexicon: Lexicon,
    pub train: Vec<Item>,
    pub dev: Vec<Item>,
    pub test: Vec<Item>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[Item] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.lexicon.len()
    }

    /// Character sequence of a class; the text-view input shared by all of
    /// its instances.
    pub fn class_chars(&self, class: usize) -> CharSequence {
        self.lexicon.chars(class)
    }
}

/// Generates every split. Instance `k` in the global enumeration (train,
/// then dev, then test; word-major within a split) draws from its own
/// derived stream, so generation is parallel yet bit-reproducible.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset, DataError> {
    spec.validate()?;
    let total_words = spec.words + spec.eval_only_words;
    let lexicon = build_lexicon(
        total_words,
        spec.min_word_len,
        spec.max_word_len,
        spec.alphabet_size,
        spec.seed,
    )?;
    let table = PrototypeTable::generate(spec.alphabet_size, spec.feature_dim, spec.seed);
    let params = spec.render_params();

    let mut plan: Vec<(Split, usize)> = Vec::new();
    for class in 0..spec.words {
        plan.extend(std::iter::repeat_n(
            (Split::Train, class),
            spec.instances_per_word,
        ));
    }
    for split in [Split::Dev, Split::Test] {
        for class in 0..total_words {
            plan.extend(std::iter::repeat_n(
                (split, class),
                spec.eval_instances_per_word,
            ));
        }
    }
    let chars: Vec<CharSequence> = (0..total_words).map(|c| lexicon.chars(c)).collect();
    let rendered: Vec<(Split, Item)> = plan
        .par_iter()
        .enumerate()
        .map(|(k, &(split, class))| {
            let mut rng = stream_rng(spec.seed, 2 + k as u64);
            let features = render_instance(chars[class].chars(), &table, &params, &mut rng)?;
            Ok((
                split,
                Item {
                    features,
                    chars: chars[class].clone(),
                    class,
                },
            ))
        })
        .collect::<Result<_, DataError>>()?;

    let mut ds = Dataset {
        spec: spec.clone(),
        lexicon,
        train: Vec::new(),
        dev: Vec::new(),
        test: Vec::new(),
    };
    for (split, item) in rendered {
        match split {
            Split::Train => ds.train.push(item),
            Split::Dev => ds.dev.push(item),
            Split::Test => ds.test.push(item),
        }
    }
    Ok(ds)
}
