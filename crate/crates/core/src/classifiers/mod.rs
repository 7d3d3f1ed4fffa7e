//! KNN, ENN and decision-tree classifiers plus the 2-of-3 voting machine.
//!
//! All distances are Euclidean (compared squared). Features are used as-is.

pub mod bdt;
pub mod codec;
pub mod enn;
pub mod knn;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Label;
use crate::matrix::Matrix;

pub use bdt::{BdtModel, Node};
pub use codec::{ModelBundle, TrainedModel};
pub use enn::EnnModel;
pub use knn::KnnModel;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifierError {
    #[error("query has {found} features, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid {name}={value}: {reason}")]
    InvalidNeighbors {
        name: &'static str,
        value: usize,
        reason: String,
    },
    #[error("training set has {rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training set contains a single class")]
    SingleClass,
    #[error("model file: {0}")]
    Format(String),
}

/// Feature rows with their labels. Shared by the instance-based models.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    matrix: Matrix,
    labels: Vec<Label>,
}

impl TrainingSet {
    pub fn new(matrix: Matrix, labels: Vec<Label>) -> Result<Self, ClassifierError> {
        if matrix.rows() != labels.len() {
            return Err(ClassifierError::LabelCount {
                rows: matrix.rows(),
                labels: labels.len(),
            });
        }
        Ok(TrainingSet { matrix, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for l in &self.labels {
            c[l.index()] += 1;
        }
        c
    }

    pub(crate) fn check_dim(&self, query: &[f64]) -> Result<(), ClassifierError> {
        if query.len() != self.dim() {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.dim(),
                found: query.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Knn,
    Enn,
    Bdt,
    Vm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::Knn,
        ClassifierKind::Enn,
        ClassifierKind::Bdt,
        ClassifierKind::Vm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "KNN",
            ClassifierKind::Enn => "ENN",
            ClassifierKind::Bdt => "BDT",
            ClassifierKind::Vm => "VM",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "knn" => Ok(ClassifierKind::Knn),
            "enn" => Ok(ClassifierKind::Enn),
            "bdt" => Ok(ClassifierKind::Bdt),
            "vm" => Ok(ClassifierKind::Vm),
            other => Err(format!("unknown classifier `{other}`")),
        }
    }
}

/// 2-of-3 majority.
pub fn vote(knn: Label, enn: Label, bdt: Label) -> Label {
    let falls = [knn, enn, bdt]
        .iter()
        .filter(|&&l| l == Label::Fall)
        .count();
    if falls >= 2 {
        Label::Fall
    } else {
        Label::Adl
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Votes {
    pub knn: Label,
    pub enn: Label,
    pub bdt: Label,
}

/// Output of the voting machine for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub votes: Votes,
    /// Wall-clock nanoseconds for `[KNN, ENN, BDT, VM]`; VM is the sum of the
    /// three plus the vote itself.
    pub latency_ns: [u64; 4],
}

/// Neighbor counts for the instance-based models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborParams {
    pub k: usize,
    pub e: usize,
}

impl NeighborParams {
    /// K = E = 3, used for the feature-combination sweep.
    pub const SWEEP: NeighborParams = NeighborParams { k: 3, e: 3 };
    /// K = E = 5, the tuned values.
    pub const TUNED: NeighborParams = NeighborParams { k: 5, e: 5 };
}

impl Default for NeighborParams {
    fn default() -> Self {
        NeighborParams::TUNED
    }
}

/// KNN, ENN and BDT trained on the same data.
#[derive(Debug, Clone, PartialEq)]
pub struct VotingModel {
    pub knn: KnnModel,
    pub enn: EnnModel,
    pub bdt: BdtModel,
}

impl VotingModel {
    pub fn train(
        train: TrainingSet,
        params: NeighborParams,
    ) -> Result<VotingModel, ClassifierError> {
        let train = Arc::new(train);
        Ok(VotingModel {
            knn: KnnModel::fit(train.clone(), params.k)?,
            enn: EnnModel::preprocess(train.clone(), params.e)?,
            bdt: BdtModel::train(&train)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.bdt.dim()
    }

    pub fn params(&self) -> NeighborParams {
        NeighborParams {
            k: self.knn.k(),
            e: self.enn.e(),
        }
    }

    /// Runs all three classifiers and the vote, timing each one.
    pub fn predict(&self, query: &[f64]) -> Result<Prediction, ClassifierError> {
        let t0 = Instant::now();
        let knn = self.knn.classify(query)?;
        let t1 = Instant::now();
        let enn = self.enn.classify(query)?;
        let t2 = Instant::now();
        let bdt = self.bdt.classify(query)?;
        let t3 = Instant::now();
        let label = vote(knn, enn, bdt);
        let t4 = Instant::now();
        let ns = |a: Instant, b: Instant| (b - a).as_nanos() as u64;
        Ok(Prediction {
            label,
            votes: Votes { knn, enn, bdt },
            latency_ns: [ns(t0, t1), ns(t1, t2), ns(t2, t3), ns(t0, t4)],
        })
    }
}
