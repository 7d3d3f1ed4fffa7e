//! Extended nearest neighbor (ENN) classification.
//!
//! ENN looks both ways: at the query's own nearest neighbors, and at the
//! training records that would count the query among *their* nearest
//! neighbors. For every candidate class `c` the query is tentatively labeled
//! `c` and the generalized class-wise statistic
//!
//! ```text
//! T(c) = Σ_i  1 / (n_i · e) · Σ_{s in class i} #{ neighbors among the e-NN of s that share class i }
//! ```
//!
//! is evaluated over the training set augmented with the query. The class
//! with the larger `T(c)` wins; an exact tie goes to FALL. `n_i` is the
//! training count of class `i`.
//!
//! Preprocessing stores each training record's `e` nearest neighbors, the
//! squared distance to the `e`-th one, and how many of them share its label.
//! A query only changes the neighbor list of records it lands inside of, so
//! classification costs one pass of distances plus an `O(n)` update.
//!
//! Neighbor order is `(squared distance, index)` with the query indexed after
//! every training record, so a query at exactly the `e`-th distance does not
//! displace the incumbent.

use std::sync::Arc;

use super::knn::{check_neighbors, nearest};
use super::{ClassifierError, TrainingSet};
use crate::dataset::Label;
use crate::matrix::squared_distance;

#[derive(Debug, Clone, PartialEq)]
pub struct EnnModel {
    pub(crate) train: Arc<TrainingSet>,
    pub(crate) e: usize,
    /// `e` nearest training neighbors of each training record, closest first.
    pub(crate) neighbor_lists: Vec<Vec<u32>>,
    /// Squared distance from each record to its `e`-th neighbor.
    pub(crate) radius: Vec<f64>,
    /// Neighbors sharing the record's own label.
    pub(crate) same_class: Vec<u32>,
    pub(crate) class_counts: [usize; 2],
}

/// Per-class sums `Σ_{s in class i} same_class[s]`.
fn class_sums(labels: &[Label], same_class: &[u32]) -> [u64; 2] {
    let mut sums = [0u64; 2];
    for (label, &count) in labels.iter().zip(same_class) {
        sums[label.index()] += u64::from(count);
    }
    sums
}

/// Picks the class with the larger statistic. `counts[c][i]` is the
/// numerator for class `i` when the query is labeled `c`; comparison is done
/// exactly on integers, cross-multiplying the `1/n_i` weights.
pub(crate) fn decide(counts: [[u64; 2]; 2], class_counts: [usize; 2]) -> Label {
    let (n_adl, n_fall) = (class_counts[0] as u128, class_counts[1] as u128);
    let score = |c: usize| u128::from(counts[c][0]) * n_fall + u128::from(counts[c][1]) * n_adl;
    if score(Label::Fall.index()) >= score(Label::Adl.index()) {
        Label::Fall
    } else {
        Label::Adl
    }
}

impl EnnModel {
    /// Builds the neighbor map for `train`. Costs `O(n² · dim)`.
    pub fn preprocess(train: Arc<TrainingSet>, e: usize) -> Result<EnnModel, ClassifierError> {
        let n = train.len();
        if e >= n {
            return Err(ClassifierError::InvalidNeighbors {
                name: "e",
                value: e,
                reason: format!("must be below the {n} training records"),
            });
        }
        check_neighbors("e", e, n)?;
        let class_counts = train.class_counts();
        if class_counts.contains(&0) {
            return Err(ClassifierError::SingleClass);
        }

        let mut neighbor_lists = Vec::with_capacity(n);
        let mut radius = Vec::with_capacity(n);
        let mut same_class = Vec::with_capacity(n);
        for i in 0..n {
            let nn = nearest(&train, train.row(i), e, Some(i));
            let own = train.label(i);
            same_class.push(nn.iter().filter(|&&(_, j)| train.label(j) == own).count() as u32);
            radius.push(nn[e - 1].0);
            neighbor_lists.push(nn.iter().map(|&(_, j)| j as u32).collect());
        }
        Ok(EnnModel {
            train,
            e,
            neighbor_lists,
            radius,
            same_class,
            class_counts,
        })
    }

    pub fn e(&self) -> usize {
        self.e
    }

    pub fn neighbor_lists(&self) -> &[Vec<u32>] {
        &self.neighbor_lists
    }

    pub fn class_counts(&self) -> [usize; 2] {
        self.class_counts
    }

    pub fn training_set(&self) -> &TrainingSet {
        &self.train
    }

    pub fn classify(&self, query: &[f64]) -> Result<Label, ClassifierError> {
        self.train.check_dim(query)?;
        let n = self.train.len();
        let labels = self.train.labels();
        let distances: Vec<f64> = (0..n)
            .map(|s| squared_distance(self.train.row(s), query))
            .collect();

        // Query's own e nearest neighbors.
        let mut own: Vec<(f64, usize)> = distances.iter().copied().zip(0..n).collect();
        super::knn::select_smallest(&mut own, self.e);
        let mut query_hits = [0u64; 2];
        for &(_, j) in &own {
            query_hits[labels[j].index()] += 1;
        }

        // counts[c][i]: numerator of class i when the query is labeled c.
        let base = class_sums(labels, &self.same_class);
        let mut counts = [base, base];
        for s in 0..n {
            if distances[s] >= self.radius[s] {
                continue;
            }
            let own_class = labels[s].index();
            let displaced = self.neighbor_lists[s][self.e - 1] as usize;
            let lost = u64::from(labels[displaced].index() == own_class);
            for (c, row) in counts.iter_mut().enumerate() {
                row[own_class] = row[own_class] - lost + u64::from(c == own_class);
            }
        }
        for (c, row) in counts.iter_mut().enumerate() {
            row[c] += query_hits[c];
        }
        Ok(decide(counts, self.class_counts))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use Label::{Adl, Fall};

    fn set(points: &[&[f64]], labels: &[Label]) -> Arc<TrainingSet> {
        Arc::new(TrainingSet::new(Matrix::from_rows(points), labels.to_vec()).unwrap())
    }

    #[test]
    fn collinear_neighbors() {
        let t = set(&[&[0.0], &[1.0], &[3.0]], &[Adl, Fall, Adl]);
        let m = EnnModel::preprocess(t, 1).unwrap();
        assert_eq!(m.neighbor_lists(), &[vec![1], vec![0], vec![1]]);
    }

    #[test]
    fn duplicate_of_a_fall_is_fall() {
        let t = set(
            &[&[0.0, 0.0], &[0.2, 0.1], &[4.0, 4.0], &[4.1, 3.9]],
            &[Adl, Adl, Fall, Fall],
        );
        let m = EnnModel::preprocess(t, 1).unwrap();
        assert_eq!(m.classify(&[4.0, 4.0]).unwrap(), Fall);
        assert_eq!(m.classify(&[0.0, 0.0]).unwrap(), Adl);
    }

    #[test]
    fn errors() {
        let t = set(&[&[0.0], &[1.0], &[3.0]], &[Adl, Fall, Adl]);
        assert!(EnnModel::preprocess(t.clone(), 3).is_err());
        assert!(EnnModel::preprocess(t.clone(), 2).is_err());
        let single = set(&[&[0.0], &[1.0], &[3.0]], &[Adl, Adl, Adl]);
        assert_eq!(
            EnnModel::preprocess(single, 1),
            Err(ClassifierError::SingleClass)
        );
        let m = EnnModel::preprocess(t, 1).unwrap();
        assert!(m.classify(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn tie_goes_to_fall() {
        assert_eq!(decide([[3, 3], [3, 3]], [5, 5]), Fall);
        assert_eq!(decide([[4, 3], [3, 3]], [5, 5]), Adl);
        // 2/4 + 1/2 vs 1/4 + 2/2 with n = (4, 2)
        assert_eq!(decide([[2, 1], [1, 2]], [4, 2]), Fall);
    }
}
