//! Binary decision tree (CART, Gini impurity).
//!
//! Greedy growth with no depth limit and no pruning. Candidate thresholds are
//! midpoints between consecutive distinct values of a feature. Values below
//! the threshold go left, the rest go right. Split quality is compared exactly
//! on integer class counts, so ties resolve to the lowest feature index and
//! then the lowest threshold.

use super::{ClassifierError, TrainingSet};
use crate::dataset::Label;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        label: Label,
        /// Training records reaching this leaf, `[ADL, FALL]`.
        counts: [u32; 2],
    },
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BdtModel {
    pub(crate) nodes: Vec<Node>,
    pub(crate) dim: usize,
}

/// Weighted impurity `a_l b_l / n_l + a_r b_r / n_r` as an exact fraction.
#[derive(Debug, Clone, Copy)]
struct SplitScore {
    num: u128,
    den: u128,
}

impl SplitScore {
    fn new(left: [u64; 2], right: [u64; 2]) -> Self {
        let (nl, nr) = (
            u128::from(left[0] + left[1]),
            u128::from(right[0] + right[1]),
        );
        let pl = u128::from(left[0]) * u128::from(left[1]);
        let pr = u128::from(right[0]) * u128::from(right[1]);
        SplitScore {
            num: pl * nr + pr * nl,
            den: nl * nr,
        }
    }

    fn better_than(&self, other: &SplitScore) -> bool {
        self.num * other.den < other.num * self.den
    }
}

/// Majority label; an even split goes to FALL.
fn majority(counts: [u64; 2]) -> Label {
    if counts[1] >= counts[0] {
        Label::Fall
    } else {
        Label::Adl
    }
}

/// Midpoint strictly above `lo` and at most `hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo * 0.5 + hi * 0.5;
    if mid > lo && mid <= hi {
        mid
    } else {
        hi
    }
}

struct Builder<'a> {
    train: &'a TrainingSet,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> [u64; 2] {
        let mut c = [0u64; 2];
        for &i in idx {
            c[self.train.label(i).index()] += 1;
        }
        c
    }

    /// Best `(feature, threshold)` for the records in `idx`, if any split exists.
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let total = self.counts(idx);
        let mut best: Option<(SplitScore, usize, f64)> = None;
        let mut column: Vec<(f64, Label)> = Vec::with_capacity(idx.len());
        for f in 0..self.train.dim() {
            column.clear();
            column.extend(
                idx.iter()
                    .map(|&i| (self.train.row(i)[f], self.train.label(i))),
            );
            column.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = [0u64; 2];
            for w in 0..column.len() - 1 {
                left[column[w].1.index()] += 1;
                let (lo, hi) = (column[w].0, column[w + 1].0);
                if lo == hi {
                    continue;
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                let score = SplitScore::new(left, right);
                let improves = match &best {
                    None => true,
                    Some((b, _, _)) => score.better_than(b),
                };
                if improves {
                    best = Some((score, f, midpoint(lo, hi)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn placeholder(&mut self) -> usize {
        self.nodes.push(Node::Leaf {
            label: Label::Fall,
            counts: [0, 0],
        });
        self.nodes.len() - 1
    }

    /// Grows the tree with an explicit work stack; depth is unbounded.
    fn grow(&mut self, root: Vec<usize>) {
        let slot = self.placeholder();
        let mut work = vec![(slot, root)];
        while let Some((slot, idx)) = work.pop() {
            let counts = self.counts(&idx);
            let split = if counts[0] == 0 || counts[1] == 0 {
                None
            } else {
                // None here means identical vectors with mixed labels.
                self.best_split(&idx)
            };
            let Some((feature, threshold)) = split else {
                self.nodes[slot] = Node::Leaf {
                    label: majority(counts),
                    counts: [counts[0] as u32, counts[1] as u32],
                };
                continue;
            };
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
                .into_iter()
                .partition(|&i| self.train.row(i)[feature] < threshold);
            let left = self.placeholder();
            let right = self.placeholder();
            self.nodes[slot] = Node::Split {
                feature: feature as u32,
                threshold,
                left: left as u32,
                right: right as u32,
            };
            work.push((right, right_idx));
            work.push((left, left_idx));
        }
    }
}

impl BdtModel {
    pub fn train(train: &TrainingSet) -> Result<BdtModel, ClassifierError> {
        if train.is_empty() {
            return Err(ClassifierError::EmptyTrainingSet);
        }
        let mut builder = Builder {
            train,
            nodes: Vec::new(),
        };
        builder.grow((0..train.len()).collect());
        Ok(BdtModel {
            nodes: builder.nodes,
            dim: train.dim(),
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        let mut deepest = 0;
        let mut work = vec![(0usize, 0usize)];
        while let Some((i, d)) = work.pop() {
            match &self.nodes[i] {
                Node::Leaf { .. } => deepest = deepest.max(d),
                Node::Split { left, right, .. } => {
                    work.push((*left as usize, d + 1));
                    work.push((*right as usize, d + 1));
                }
            }
        }
        deepest
    }

    pub fn classify(&self, query: &[f64]) -> Result<Label, ClassifierError> {
        if query.len() != self.dim {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.dim,
                found: query.len(),
            });
        }
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { label, .. } => return Ok(*label),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if query[*feature as usize] < *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}
