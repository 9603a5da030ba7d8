/// Whether an anchor counts itself among its positives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelfPairPolicy {
    /// Single-view matrices: `cos(f_i, f_i) = 1` carries no signal.
    Exclude,
    /// Multi-view matrices: `cos(f_i, g_i)` is the anchor-to-own-proxy pair.
    Include,
}

/// Per-anchor positive and negative index sets of a batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexPartition {
    pub positives: Vec<Vec<usize>>,
    pub negatives: Vec<Vec<usize>>,
}

impl IndexPartition {
    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }
}

pub fn partition(classes: &[usize], policy: SelfPairPolicy) -> IndexPartition {
    let n = classes.len();
    let mut positives = Vec::with_capacity(n);
    let mut negatives = Vec::with_capacity(n);
    for (i, &ci) in classes.iter().enumerate() {
        let mut p = Vec::new();
        let mut q = Vec::new();
        for (j, &cj) in classes.iter().enumerate() {
            if cj != ci {
                q.push(j);
            } else if j != i || policy == SelfPairPolicy::Include {
                p.push(j);
            }
        }
        positives.push(p);
        negatives.push(q);
    }
    IndexPartition {
        positives,
        negatives,
    }
}
