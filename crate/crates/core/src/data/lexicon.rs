use super::{stream_rng, DataError};
use crate::encoders::CharSequence;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Distinct words over the first `alphabet_size` lowercase letters. The class
/// id of a word is its index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub words: Vec<String>,
    pub alphabet_size: usize,
    pub seed: u64,
}

impl Lexicon {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn chars(&self, class: usize) -> CharSequence {
        let ids = self.words[class]
            .bytes()
            .map(|b| u32::from(b - b'a'))
            .collect();
        CharSequence::new(ids, self.alphabet_size).expect("lexicon words are valid")
    }
}

/// Number of strings with lengths in `min_len..=max_len`, saturating.
pub fn count_strings(alphabet_size: usize, min_len: usize, max_len: usize) -> u128 {
    let a = alphabet_size as u128;
    (min_len..=max_len)
        .map(|l| a.checked_pow(l as u32).unwrap_or(u128::MAX))
        .fold(0u128, |s, c| s.saturating_add(c))
}

/// Draws `num_words` distinct strings: each length uniform in the range, each
/// character uniform over the alphabet, duplicates rejected.
pub fn build_lexicon(
    num_words: usize,
    min_len: usize,
    max_len: usize,
    alphabet_size: usize,
    seed: u64,
) -> Result<Lexicon, DataError> {
    if !(2..=26).contains(&alphabet_size) {
        return Err(DataError::InvalidSpec(
            "alphabet size must lie in 2..=26".into(),
        ));
    }
    if num_words < 2 {
        return Err(DataError::InvalidSpec(
            "at least two words are required".into(),
        ));
    }
    if min_len == 0 || min_len > max_len {
        return Err(DataError::InvalidSpec(
            "word lengths must satisfy 1 <= min <= max".into(),
        ));
    }
    let available = count_strings(alphabet_size, min_len, max_len);
    if (num_words as u128) > available {
        return Err(DataError::LexiconTooSmall {
            requested: num_words,
            available,
        });
    }
    let mut rng = stream_rng(seed, 0);
    let mut seen = HashSet::with_capacity(num_words);
    let mut words = Vec::with_capacity(num_words);
    while words.len() < num_words {
        let len = rng.random_range(min_len..=max_len);
        let w: String = (0..len)
            .map(|_| char::from(b'a' + rng.random_range(0..alphabet_size) as u8))
            .collect();
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    Ok(Lexicon {
        words,
        alphabet_size,
        seed,
    })
}
