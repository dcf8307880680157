//! KNN classification and k-fold cross-validation accuracy — the
//! wrapper fitness function driving the search.
//!
//! Distances are squared Euclidean over the selected features only,
//! which ranks neighbors identically to Euclidean. Neighbor ties are
//! broken by class id and vote ties by the smaller class id, so results
//! do not depend on training-row order.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crate::dataset::DatasetView;
use crate::error::{Error, Result};

/// A fixed-length 0/1 feature-selection vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    bits: Vec<bool>,
    ones: usize,
}

impl BinaryMask {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        let ones = bits.iter().filter(|&&b| b).count();
        BinaryMask { bits, ones }
    }

    pub fn zeros(len: usize) -> Self {
        BinaryMask {
            bits: vec![false; len],
            ones: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones_count(&self) -> usize {
        self.ones
    }

    pub fn selects_nothing(&self) -> bool {
        self.ones == 0
    }

    pub fn bit(&self, j: usize) -> bool {
        self.bits[j]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn selected_indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(j, _)| j)
            .collect()
    }

    /// Indices selected in `self` but not in `old` (0 -> 1 transitions).
    pub fn newly_selected(&self, old: &BinaryMask) -> Vec<usize> {
        self.bits
            .iter()
            .zip(old.bits.iter())
            .enumerate()
            .filter(|(_, (&new, &old))| new && !old)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Squared distance over `sel`, abandoning the sum once it exceeds
/// `cutoff` (the partial sum is already enough to discard the candidate).
fn masked_sq_dist(a: &[f64], b: &[f64], sel: &[usize], cutoff: f64) -> f64 {
    let mut s = 0.0;
    for &j in sel {
        let d = a[j] - b[j];
        s += d * d;
        if s > cutoff {
            return s;
        }
    }
    s
}

/// Keeps the k smallest (distance, class) pairs seen so far, ordered
/// lexicographically. Pairs equal in both fields are interchangeable for
/// voting, which is what makes predictions row-order independent.
struct NearestSet {
    k: usize,
    entries: Vec<(f64, u32)>,
}

impl NearestSet {
    fn new(k: usize) -> Self {
        NearestSet {
            k,
            entries: Vec::with_capacity(k),
        }
    }

    fn cutoff(&self) -> f64 {
        if self.entries.len() < self.k {
            f64::INFINITY
        } else {
            self.entries[self.k - 1].0
        }
    }

    fn offer(&mut self, dist: f64, class: u32) {
        let candidate = (dist, class);
        if self.entries.len() == self.k {
            let worst = *self.entries.last().unwrap();
            if (candidate.0, candidate.1) >= (worst.0, worst.1) {
                return;
            }
            self.entries.pop();
        }
        let at = self
            .entries
            .partition_point(|&(d, c)| (d, c) <= (candidate.0, candidate.1));
        self.entries.insert(at, candidate);
    }

    /// Majority class among the kept neighbors; vote ties go to the
    /// smaller class id.
    fn vote(&self, class_count: usize) -> u32 {
        let mut counts = vec![0u32; class_count];
        for &(_, class) in &self.entries {
            counts[class as usize] += 1;
        }
        let mut best = 0u32;
        for class in 1..class_count as u32 {
            if counts[class as usize] > counts[best as usize] {
                best = class;
            }
        }
        best
    }
}

fn predict_among<'a>(
    train: &DatasetView,
    positions: impl Iterator<Item = &'a usize>,
    query: &[f64],
    sel: &[usize],
    k: usize,
    class_count: usize,
) -> u32 {
    let mut nearest = NearestSet::new(k);
    for &pos in positions {
        let cutoff = nearest.cutoff();
        let d2 = masked_sq_dist(train.feature(pos), query, sel, cutoff);
        if d2 > cutoff {
            continue;
        }
        nearest.offer(d2, train.label(pos));
    }
    nearest.vote(class_count)
}

/// Classifies `query` by majority vote among its k nearest training rows,
/// measuring distance over the selected features only.
pub fn knn_predict(train: &DatasetView, query: &[f64], mask: &BinaryMask, k: usize) -> Result<u32> {
    if mask.selects_nothing() {
        return Err(Error::InvalidArgument(
            "knn_predict requires a non-empty mask".into(),
        ));
    }
    if mask.len() != train.feature_count() {
        return Err(Error::MaskLength {
            mask: mask.len(),
            features: train.feature_count(),
        });
    }
    if query.len() != train.feature_count() {
        return Err(Error::InvalidArgument(format!(
            "query has {} features, expected {}",
            query.len(),
            train.feature_count()
        )));
    }
    if k == 0 || k > train.len() {
        return Err(Error::InvalidArgument(format!(
            "k must be in 1..={}, got {k}",
            train.len()
        )));
    }
    let sel = mask.selected_indices();
    let positions: Vec<usize> = (0..train.len()).collect();
    Ok(predict_among(
        train,
        positions.iter(),
        query,
        &sel,
        k,
        train.dataset().class_count(),
    ))
}

/// Accuracy of every `test` row classified against the full `train` view.
/// Does not touch any evaluation counter; an empty mask scores 0.
pub fn test_accuracy(
    train: &DatasetView,
    test: &DatasetView,
    mask: &BinaryMask,
    k: usize,
) -> Result<f64> {
    if mask.selects_nothing() {
        return Ok(0.0);
    }
    if mask.len() != train.feature_count() {
        return Err(Error::MaskLength {
            mask: mask.len(),
            features: train.feature_count(),
        });
    }
    if test.feature_count() != train.feature_count() {
        return Err(Error::InvalidArgument(
            "train and test views disagree on feature count".into(),
        ));
    }
    if k == 0 || k > train.len() {
        return Err(Error::InvalidArgument(format!(
            "k must be in 1..={}, got {k}",
            train.len()
        )));
    }
    let sel = mask.selected_indices();
    let positions: Vec<usize> = (0..train.len()).collect();
    let class_count = train.dataset().class_count();
    let mut correct = 0usize;
    for i in 0..test.len() {
        let predicted = predict_among(train, positions.iter(), test.feature(i), &sel, k, class_count);
        if predicted == test.label(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Cross-validated KNN accuracy with a monotone evaluation tally.
///
/// Every call to [`FitnessEvaluator::cv_accuracy`] counts one function
/// evaluation, cache hit or not, so budget accounting is identical with
/// and without the cache.
pub struct FitnessEvaluator {
    train: DatasetView,
    k: usize,
    fold_members: Vec<Vec<usize>>,
    complements: Vec<Vec<usize>>,
    fes: AtomicU64,
    cache: Option<Mutex<HashMap<BinaryMask, f64>>>,
}

impl FitnessEvaluator {
    /// `train` must carry a fold assignment; each fold's complement must
    /// hold at least `k` rows.
    pub fn new(train: DatasetView, k: usize, cache: bool) -> Result<Self> {
        let folds = train.fold_count().ok_or_else(|| {
            Error::InvalidArgument("evaluator requires a view with folds assigned".into())
        })?;
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let mut fold_members = vec![Vec::new(); folds];
        for i in 0..train.len() {
            fold_members[train.fold_of(i).unwrap()].push(i);
        }
        let mut complements = vec![Vec::new(); folds];
        for (f, members) in complements.iter_mut().enumerate() {
            for (other, rows) in fold_members.iter().enumerate() {
                if other != f {
                    members.extend_from_slice(rows);
                }
            }
            if members.len() < k {
                return Err(Error::InvalidArgument(format!(
                    "fold {f} leaves only {} neighbor rows, fewer than k={k}",
                    members.len()
                )));
            }
        }
        Ok(FitnessEvaluator {
            train,
            k,
            fold_members,
            complements,
            fes: AtomicU64::new(0),
            cache: cache.then(|| Mutex::new(HashMap::new())),
        })
    }

    pub fn train_view(&self) -> &DatasetView {
        &self.train
    }

    pub fn k_neighbors(&self) -> usize {
        self.k
    }

    pub fn fold_count(&self) -> usize {
        self.fold_members.len()
    }

    pub fn feature_count(&self) -> usize {
        self.train.feature_count()
    }

    /// Function evaluations consumed so far.
    pub fn fes(&self) -> u64 {
        self.fes.load(Ordering::Relaxed)
    }

    /// Cross-validated accuracy of the subset: each fold is classified
    /// using the remaining folds as neighbors, and correct counts are
    /// pooled over all rows (micro average). Counts one evaluation; an
    /// empty mask scores 0 without classifying anything.
    pub fn cv_accuracy(&self, mask: &BinaryMask) -> f64 {
        self.fes.fetch_add(1, Ordering::Relaxed);
        if mask.selects_nothing() {
            return 0.0;
        }
        debug_assert_eq!(mask.len(), self.train.feature_count());
        if let Some(cache) = &self.cache {
            if let Some(&hit) = cache.lock().unwrap().get(mask) {
                return hit;
            }
        }
        let sel = mask.selected_indices();
        let class_count = self.train.dataset().class_count();
        let mut correct = 0usize;
        for (f, members) in self.fold_members.iter().enumerate() {
            let neighbors = &self.complements[f];
            for &q in members {
                let predicted = predict_among(
                    &self.train,
                    neighbors.iter(),
                    self.train.feature(q),
                    &sel,
                    self.k,
                    class_count,
                );
                if predicted == self.train.label(q) {
                    correct += 1;
                }
            }
        }
        let accuracy = correct as f64 / self.train.len() as f64;
        if let Some(cache) = &self.cache {
            cache.lock().unwrap().insert(mask.clone(), accuracy);
        }
        accuracy
    }

    /// Evaluates a batch of masks, optionally on a worker pool. The
    /// result order matches the input order regardless of worker count.
    pub fn cv_accuracy_batch(
        &self,
        masks: &[BinaryMask],
        pool: Option<&rayon::ThreadPool>,
    ) -> Vec<f64> {
        use rayon::prelude::*;
        match pool {
            Some(pool) => pool.install(|| masks.par_iter().map(|m| self.cv_accuracy(m)).collect()),
            None => masks.iter().map(|m| self.cv_accuracy(m)).collect(),
        }
    }
}
