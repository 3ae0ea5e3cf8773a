//! Class-imbalance correction: stratified fold assignment and SMOTE.
//!
//! Design discussions are the minority class in every dataset we work with
//! (roughly 14% on average), so naive cross-validation folds and unbalanced
//! training sets both distort results. [`stratified_folds`] keeps the class
//! ratio (nearly) equal across folds; [`smote`] synthesizes minority points
//! as convex combinations of minority nearest neighbors until the classes
//! reach a target ratio.
//!
//! Both operations are pure functions of their input and seed. They must only
//! ever see *training* partitions — the protocol executor enforces that test
//! data is never balanced.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vectorize::SparseVec;

/// Errors raised by balancing operations.
#[derive(Debug, Error)]
pub enum BalanceError {
    #[error("fold count must be at least 2, got {k}")]
    TooFewFolds { k: usize },
    #[error("class {class} has only {count} members, fewer than k={k} folds")]
    ClassSmallerThanK { class: u8, count: usize, k: usize },
    #[error("minority class needs at least 2 members for SMOTE, got {count}")]
    MinorityTooSmall { count: usize },
    #[error("features and labels disagree in length: {features} vs {labels}")]
    LengthMismatch { features: usize, labels: usize },
}

/// Assignment of every instance to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    /// `fold_of[i]` is the fold index of instance `i`, in `[0, k)`.
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    /// Instance indices of the test partition of `fold`.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    /// Instance indices outside `fold` (the training partition).
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    /// Number of instances in each fold.
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified k-fold assignment.
///
/// Within each class the instances are shuffled by `seed`; the shuffled
/// class-0 sequence followed by the shuffled class-1 sequence is then dealt
/// round-robin into folds. Because each class occupies one contiguous run of
/// deal positions, both fold sizes and per-fold class counts differ by at
/// most one — e.g. 1000 instances with 224 positives at k=10 gives ten folds
/// of exactly 100 instances holding 22 or 23 positives each.
pub fn stratified_folds(
    labels: &[u8],
    k: usize,
    seed: u64,
) -> Result<FoldAssignment, BalanceError> {
    if k < 2 {
        return Err(BalanceError::TooFewFolds { k });
    }
    let mut class0: Vec<usize> = Vec::new();
    let mut class1: Vec<usize> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l == 1 {
            class1.push(i);
        } else {
            class0.push(i);
        }
    }
    for (class, members) in [(0u8, &class0), (1u8, &class1)] {
        if members.len() < k {
            return Err(BalanceError::ClassSmallerThanK { class, count: members.len(), k });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    class0.shuffle(&mut rng);
    class1.shuffle(&mut rng);

    let mut fold_of = vec![0usize; labels.len()];
    for (pos, &inst) in class0.iter().chain(class1.iter()).enumerate() {
        fold_of[inst] = pos % k;
    }
    Ok(FoldAssignment { k, fold_of })
}

/// Unstratified k-fold assignment: one seeded shuffle of all instances, dealt
/// round-robin. Fold sizes still differ by at most one, but class ratios are
/// whatever the shuffle produces.
pub fn plain_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment, BalanceError> {
    if k < 2 {
        return Err(BalanceError::TooFewFolds { k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut fold_of = vec![0usize; n];
    for (pos, &inst) in order.iter().enumerate() {
        fold_of[inst] = pos % k;
    }
    Ok(FoldAssignment { k, fold_of })
}

/// SMOTE settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteParams {
    pub k_neighbors: usize,
    /// Desired minority/majority ratio after oversampling.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteParams {
    fn default() -> Self {
        SmoteParams { k_neighbors: 5, target_ratio: 1.0, seed: 0 }
    }
}

/// Synthetic minority oversampling.
///
/// New points are `x + u · (x_nn − x)` with `u ~ Uniform(0,1)` and `x_nn` one
/// of the `k_neighbors` Euclidean-nearest minority points; exactly enough are
/// synthesized to reach `target_ratio` (parity by default). Originals are
/// returned unchanged, in order, with synthetics appended. Base points cycle
/// through the minority class in index order, so the synthetic count is exact
/// by construction. `k_neighbors` larger than minority−1 is clamped with a
/// warning.
pub fn smote(
    features: &[SparseVec],
    labels: &[u8],
    params: &SmoteParams,
) -> Result<(Vec<SparseVec>, Vec<u8>), BalanceError> {
    if features.len() != labels.len() {
        return Err(BalanceError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    // On an exact tie there is no deficit, so the branch choice is moot.
    let (minority, majority, minority_label) =
        if pos.len() <= neg.len() { (&pos, &neg, 1u8) } else { (&neg, &pos, 0u8) };
    if minority.len() < 2 {
        return Err(BalanceError::MinorityTooSmall { count: minority.len() });
    }
    let target = (params.target_ratio * majority.len() as f64).round() as usize;
    let deficit = target.saturating_sub(minority.len());
    let mut out_x: Vec<SparseVec> = features.to_vec();
    let mut out_y: Vec<u8> = labels.to_vec();
    if deficit == 0 {
        return Ok((out_x, out_y));
    }

    let mut k = params.k_neighbors;
    if k >= minority.len() {
        k = minority.len() - 1;
        log::warn!(
            "SMOTE k_neighbors={} >= minority size {}; clamping to {}",
            params.k_neighbors,
            minority.len(),
            k
        );
    }

    // k nearest minority neighbors of each minority point, excluding itself;
    // ties broken by instance index for determinism.
    let norms: Vec<f64> = minority.iter().map(|&i| features[i].norm_sq()).collect();
    let mut neighbors: Vec<Vec<usize>> = Vec::with_capacity(minority.len());
    for (a, &ia) in minority.iter().enumerate() {
        let mut dists: Vec<(f64, usize)> = Vec::with_capacity(minority.len() - 1);
        for (b, &ib) in minority.iter().enumerate() {
            if a == b {
                continue;
            }
            let d2 = norms[a] + norms[b] - 2.0 * features[ia].dot_sparse(&features[ib]);
            dists.push((d2.max(0.0), b));
        }
        dists.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
        neighbors.push(dists.into_iter().take(k).map(|(_, b)| b).collect());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for s in 0..deficit {
        let base = s % minority.len();
        let nn = neighbors[base][rng.gen_range(0..neighbors[base].len())];
        let u: f64 = rng.gen::<f64>();
        out_x.push(interpolate(&features[minority[base]], &features[minority[nn]], u));
        out_y.push(minority_label);
    }
    Ok((out_x, out_y))
}

/// `x + u · (y − x)` over the union of sparse supports; exact zeros are
/// dropped so synthetic vectors stay sparse.
fn interpolate(x: &SparseVec, y: &SparseVec, u: f64) -> SparseVec {
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(x.entries.len() + y.entries.len());
    let (mut a, mut b) = (0, 0);
    while a < x.entries.len() || b < y.entries.len() {
        let ia = x.entries.get(a).map(|e| e.0);
        let ib = y.entries.get(b).map(|e| e.0);
        let (i, xv, yv) = match (ia, ib) {
            (Some(ia), Some(ib)) if ia == ib => {
                let r = (ia, x.entries[a].1, y.entries[b].1);
                a += 1;
                b += 1;
                r
            }
            (Some(ia), Some(ib)) if ia < ib => {
                let r = (ia, x.entries[a].1, 0.0);
                a += 1;
                r
            }
            (Some(_), Some(ib)) => {
                let r = (ib, 0.0, y.entries[b].1);
                b += 1;
                r
            }
            (Some(ia), None) => {
                let r = (ia, x.entries[a].1, 0.0);
                a += 1;
                r
            }
            (None, Some(ib)) => {
                let r = (ib, 0.0, y.entries[b].1);
                b += 1;
                r
            }
            (None, None) => unreachable!(),
        };
        let v = xv + u * (yv - xv);
        if v != 0.0 {
            entries.push((i, v));
        }
    }
    SparseVec { entries }
}
