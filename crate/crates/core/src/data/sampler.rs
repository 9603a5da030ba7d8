use super::dataset::Item;
use super::DataError;
use rand::seq::index::sample;
use rand::Rng;
use std::collections::BTreeMap;

/// Replacement draws allowed per batch for classes with fewer than `K`
/// instances before sampling gives up.
pub const RESAMPLE_CAP: usize = 100;

/// `M` classes with exactly `K` instances each, grouped by class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiViewBatch {
    /// Positions in the split.
    pub indices: Vec<usize>,
    pub classes: Vec<usize>,
}

impl MultiViewBatch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Draws `M` distinct classes uniformly, then `K` distinct instances of each
/// uniformly. A drawn class with fewer than `K` instances is replaced by a
/// fresh uniform draw among unused classes, at most [`RESAMPLE_CAP`] times.
pub fn sample_batch<R: Rng + ?Sized>(
    items: &[Item],
    classes_per_batch: usize,
    per_class: usize,
    rng: &mut R,
) -> Result<MultiViewBatch, DataError> {
    let unavailable = |reason: String| DataError::BatchUnavailable {
        classes: classes_per_batch,
        per_class,
        reason,
    };
    if classes_per_batch == 0 || per_class == 0 {
        return Err(unavailable("batch dimensions must be positive".into()));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        by_class.entry(item.class).or_default().push(i);
    }
    let pools: Vec<&Vec<usize>> = by_class.values().collect();
    let labels: Vec<usize> = by_class.keys().copied().collect();
    if pools.len() < classes_per_batch {
        return Err(unavailable(format!(
            "split has only {} classes",
            pools.len()
        )));
    }
    let mut used = vec![false; pools.len()];
    let mut chosen = Vec::with_capacity(classes_per_batch);
    for c in sample(rng, pools.len(), classes_per_batch) {
        used[c] = true;
        chosen.push(c);
    }
    let mut resamples = 0;
    for slot in 0..chosen.len() {
        while pools[chosen[slot]].len() < per_class {
            resamples += 1;
            if resamples > RESAMPLE_CAP {
                return Err(unavailable(format!(
                    "more than {RESAMPLE_CAP} drawn classes had fewer than {per_class} instances"
                )));
            }
            let free: Vec<usize> = (0..pools.len()).filter(|&c| !used[c]).collect();
            if free.is_empty() {
                return Err(unavailable("no unused classes left to resample".into()));
            }
            let c = free[rng.random_range(0..free.len())];
            used[c] = true;
            chosen[slot] = c;
        }
    }
    let mut batch = MultiViewBatch {
        indices: Vec::with_capacity(classes_per_batch * per_class),
        classes: Vec::with_capacity(classes_per_batch * per_class),
    };
    for c in chosen {
        let pool = pools[c];
        for k in sample(rng, pool.len(), per_class) {
            batch.indices.push(pool[k]);
            batch.classes.push(labels[c]);
        }
    }
    Ok(batch)
}
