//! Deterministic K-fold cross-validation plans.
//!
//! Each fold designates a disjoint test set; the remaining samples are split
//! 0.8/0.2 into train and validation. Plans are pure functions of
//! `(n, k, seed, labels)` and serialize to JSON for run reproducibility.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub test_indices: Vec<usize>,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldAssignment>,
}

impl FoldPlan {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<FoldPlan> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Chunk sizes for one group: `len / k` everywhere plus one extra in the
/// `len % k` folds starting at `cursor` (wrapping). Rotating the cursor
/// across groups keeps the overall fold sizes within one of each other even
/// when several class remainders stack up; with a single group the extras
/// land in the first `n % k` folds.
fn chunk_sizes(len: usize, k: usize, cursor: usize) -> Vec<usize> {
    let base = len / k;
    let extra = len % k;
    let mut sizes = vec![base; k];
    for j in 0..extra {
        sizes[(cursor + j) % k] += 1;
    }
    sizes
}

/// Builds a K-fold plan over `n` samples.
///
/// Indices are shuffled by a ChaCha stream seeded with `seed`. Without
/// labels the shuffled sequence is chunked directly; with labels each class
/// is chunked independently so per-fold class ratios match the global ratio
/// within one sample. Validation is the tail of each fold's shuffled
/// non-test sequence, sized to `round(0.2 * non_test_len)`.
pub fn make_fold_plan(
    n: usize,
    k: usize,
    seed: u64,
    stratify_labels: Option<&[usize]>,
) -> Result<FoldPlan> {
    if k < 2 || k > n {
        return Err(Error::InvalidFoldCount { k, n });
    }
    if let Some(labels) = stratify_labels {
        if labels.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} samples",
                labels.len(),
                n
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Per-class shuffled index sequences. Without stratification there is a
    // single group holding every index.
    let groups: Vec<Vec<usize>> = match stratify_labels {
        None => {
            let mut indices: Vec<usize> = (0..n).collect();
            indices.shuffle(&mut rng);
            vec![indices]
        }
        Some(labels) => {
            let mut distinct: Vec<usize> = labels.to_vec();
            distinct.sort_unstable();
            distinct.dedup();
            distinct
                .into_iter()
                .map(|label| {
                    let mut indices: Vec<usize> =
                        (0..n).filter(|&i| labels[i] == label).collect();
                    indices.shuffle(&mut rng);
                    indices
                })
                .collect()
        }
    };

    // Chunk boundaries per group, with the extra-sample window rotating
    // from group to group.
    let mut extra_cursor = 0usize;
    let group_chunks: Vec<Vec<Vec<usize>>> = groups
        .iter()
        .map(|group| {
            let mut chunks = Vec::with_capacity(k);
            let mut start = 0;
            for size in chunk_sizes(group.len(), k, extra_cursor) {
                chunks.push(group[start..start + size].to_vec());
                start += size;
            }
            extra_cursor = (extra_cursor + group.len() % k) % k;
            chunks
        })
        .collect();

    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let mut test_indices = Vec::new();
        let mut non_test = Vec::new();
        for chunks in &group_chunks {
            for (i, chunk) in chunks.iter().enumerate() {
                if i == fold {
                    test_indices.extend_from_slice(chunk);
                } else {
                    non_test.extend_from_slice(chunk);
                }
            }
        }
        // The validation tail is drawn from a fold-derived shuffle of the
        // non-test sequence, not from the per-class concatenation order.
        let mut fold_rng =
            ChaCha8Rng::seed_from_u64(seeds::derive(seed, fold as u64 + 1));
        non_test.shuffle(&mut fold_rng);

        let val_len = (0.2 * non_test.len() as f64).round() as usize;
        let validation_indices = non_test.split_off(non_test.len() - val_len);
        folds.push(FoldAssignment {
            test_indices,
            train_indices: non_test,
            validation_indices,
        });
    }

    Ok(FoldPlan { k, seed, folds })
}
