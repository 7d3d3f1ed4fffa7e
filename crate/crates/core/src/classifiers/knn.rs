use std::cmp::Ordering;
use std::sync::Arc;

use super::{ClassifierError, TrainingSet};
use crate::dataset::Label;
use crate::matrix::squared_distance;

/// Total order on `(squared distance, training index)`.
#[inline]
pub(crate) fn neighbor_order(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` nearest rows of `train` to `query`, closest first. Equal
/// distances resolve toward the lower training index. `skip` excludes one row.
pub(crate) fn nearest(
    train: &TrainingSet,
    query: &[f64],
    k: usize,
    skip: Option<usize>,
) -> Vec<(f64, usize)> {
    let mut all: Vec<(f64, usize)> = (0..train.len())
        .filter(|&i| Some(i) != skip)
        .map(|i| (squared_distance(train.row(i), query), i))
        .collect();
    select_smallest(&mut all, k);
    all
}

/// Keeps the `k` smallest entries of `items`, sorted.
pub(crate) fn select_smallest(items: &mut Vec<(f64, usize)>, k: usize) {
    if k < items.len() {
        items.select_nth_unstable_by(k, neighbor_order);
        items.truncate(k);
    }
    items.sort_unstable_by(neighbor_order);
}

pub(crate) fn check_neighbors(
    name: &'static str,
    k: usize,
    n: usize,
) -> Result<(), ClassifierError> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(ClassifierError::InvalidNeighbors {
            name,
            value: k,
            reason: "must be a positive odd number".into(),
        });
    }
    if k > n {
        return Err(ClassifierError::InvalidNeighbors {
            name,
            value: k,
            reason: format!("exceeds the {n} training records"),
        });
    }
    Ok(())
}

/// Brute-force k-nearest-neighbor classifier over Euclidean distance.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub(crate) train: Arc<TrainingSet>,
    pub(crate) k: usize,
}

impl KnnModel {
    pub fn fit(train: Arc<TrainingSet>, k: usize) -> Result<KnnModel, ClassifierError> {
        check_neighbors("k", k, train.len())?;
        Ok(KnnModel { train, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn training_set(&self) -> &TrainingSet {
        &self.train
    }

    /// Majority label among the `k` nearest training vectors.
    pub fn classify(&self, query: &[f64]) -> Result<Label, ClassifierError> {
        self.train.check_dim(query)?;
        let neighbors = nearest(&self.train, query, self.k, None);
        let falls = neighbors
            .iter()
            .filter(|&&(_, i)| self.train.label(i) == Label::Fall)
            .count();
        Ok(if 2 * falls > neighbors.len() {
            Label::Fall
        } else {
            Label::Adl
        })
    }
}
