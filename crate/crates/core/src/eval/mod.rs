//! Monte-Carlo cross-validation, metrics and the parameter sweeps.
//!
//! Every fold draws a fresh seeded train/test split, trains the selected
//! classifiers on the training part and classifies each test record one at a
//! time. Confusion counts are kept per fold; the reported metrics are the
//! arithmetic means of the per-fold metrics.
//!
//! Feature extraction is a pure per-record function, so features are computed
//! once for the whole dataset and each fold selects its rows.

pub mod report;
pub mod sweep;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{
    vote, BdtModel, ClassifierError, ClassifierKind, EnnModel, KnnModel, NeighborParams,
    TrainingSet,
};
use crate::dataset::{split_indices, Dataset, DatasetError, Label, SplitSpec};
use crate::features::{FeatureConfig, FeatureError, FeaturePipeline};
use crate::matrix::Matrix;

pub use report::Format;
pub use sweep::{sweep_features, sweep_neighbors, table5_combinations, SweepRow, SweepTable};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: ClassifierError,
    },
    #[error("no classifier selected")]
    NoClassifier,
    #[error("{0}")]
    Config(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Binary confusion counts with FALL as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Fall, Label::Fall) => self.tp += 1,
            (Label::Fall, Label::Adl) => self.fn_ += 1,
            (Label::Adl, Label::Fall) => self.fp += 1,
            (Label::Adl, Label::Adl) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Recall,
    Precision,
    F1,
    Specificity,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Accuracy,
        Metric::Recall,
        Metric::Precision,
        Metric::F1,
        Metric::Specificity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Recall => "recall",
            Metric::Precision => "precision",
            Metric::F1 => "f1",
            Metric::Specificity => "specificity",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The five metrics as percentages; `None` where a denominator is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub specificity: Option<f64>,
}

impl Metrics {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Accuracy => self.accuracy,
            Metric::Recall => self.recall,
            Metric::Precision => self.precision,
            Metric::F1 => self.f1,
            Metric::Specificity => self.specificity,
        }
    }

    fn set(&mut self, m: Metric, v: Option<f64>) {
        match m {
            Metric::Accuracy => self.accuracy = v,
            Metric::Recall => self.recall = v,
            Metric::Precision => self.precision = v,
            Metric::F1 => self.f1 = v,
            Metric::Specificity => self.specificity = v,
        }
    }

    pub fn has_undefined(&self) -> bool {
        Metric::ALL.iter().any(|&m| self.get(m).is_none())
    }

    /// Per-metric arithmetic mean. A metric undefined in any fold stays
    /// undefined in the mean.
    pub fn mean(all: &[Metrics]) -> Metrics {
        let mut out = Metrics::default();
        if all.is_empty() {
            return out;
        }
        for m in Metric::ALL {
            let values: Option<Vec<f64>> = all.iter().map(|x| x.get(m)).collect();
            out.set(m, values.map(|v| v.iter().sum::<f64>() / v.len() as f64));
        }
        out
    }
}

fn percent(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

/// Accuracy, recall, precision, F1 and specificity from confusion counts.
///
/// F1 is the harmonic mean of precision and recall, computed as
/// `2·tp / (2·tp + fp + fn)`; it is defined whenever both of its inputs are.
pub fn compute_metrics(c: &ConfusionCounts) -> Metrics {
    let recall = percent(c.tp, c.tp + c.fn_);
    let precision = percent(c.tp, c.tp + c.fp);
    let f1 = match (precision, recall) {
        (Some(_), Some(_)) => percent(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
        _ => None,
    };
    Metrics {
        accuracy: percent(c.tp + c.tn, c.total()),
        recall,
        precision,
        f1,
        specificity: percent(c.tn, c.tn + c.fp),
    }
}

/// Everything `run_protocol` needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub features: FeatureConfig,
    pub classifiers: Vec<ClassifierKind>,
    pub params: NeighborParams,
    pub split: SplitSpec,
    /// Worker threads for fold-level parallelism.
    #[serde(skip)]
    pub threads: usize,
}

impl EvalConfig {
    pub fn new(features: FeatureConfig, split: SplitSpec) -> Self {
        EvalConfig {
            features,
            classifiers: ClassifierKind::ALL.to_vec(),
            params: NeighborParams::TUNED,
            split,
            threads: 1,
        }
    }
}

/// Description of the data a report was computed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub records: usize,
    pub record_len: usize,
    pub fs: f64,
    pub class_counts: ClassCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub adl: usize,
    pub fall: usize,
}

impl ClassCounts {
    fn of(labels: impl IntoIterator<Item = Label>) -> Self {
        let mut c = ClassCounts { adl: 0, fall: 0 };
        for l in labels {
            match l {
                Label::Adl => c.adl += 1,
                Label::Fall => c.fall += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub index: usize,
    pub train: ClassCounts,
    pub test: ClassCounts,
    pub counts: BTreeMap<ClassifierKind, ConfusionCounts>,
    pub metrics: BTreeMap<ClassifierKind, Metrics>,
    #[serde(skip)]
    pub timing: FoldTiming,
}

/// Wall-clock measurements for one fold. Never part of the deterministic report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FoldTiming {
    /// Total nanoseconds spent classifying the fold's test records.
    pub classify_ns: BTreeMap<ClassifierKind, u128>,
    pub enn_preprocess_ns: u128,
    pub bdt_train_ns: u128,
}

/// Mean timings over all folds, in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    /// Mean feature-extraction time per record.
    pub feature_ms_per_record: f64,
    /// Mean single-record classification time per classifier.
    pub classify_ms_per_record: BTreeMap<ClassifierKind, f64>,
    /// Mean ENN preprocessing time per fold.
    pub enn_preprocess_ms: Option<f64>,
    /// Mean tree-growing time per fold.
    pub bdt_train_ms: Option<f64>,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dataset: DatasetSummary,
    pub config: EvalConfig,
    pub folds: Vec<FoldResult>,
    /// Per-classifier metrics averaged over folds.
    pub mean: BTreeMap<ClassifierKind, Metrics>,
    pub timing: TimingSummary,
}

impl EvalReport {
    /// True when any fold has a metric with a zero denominator.
    pub fn has_undefined_metric(&self) -> bool {
        self.folds
            .iter()
            .any(|f| f.metrics.values().any(Metrics::has_undefined))
    }

    pub fn mean_metric(&self, kind: ClassifierKind, metric: Metric) -> Option<f64> {
        self.mean.get(&kind).and_then(|m| m.get(metric))
    }
}

/// Features for a whole dataset plus their extraction cost.
#[derive(Debug, Clone)]
pub struct PreparedFeatures {
    pub matrix: Matrix,
    pub labels: Vec<Label>,
    pub feature_ns_per_record: f64,
}

impl PreparedFeatures {
    pub fn extract(ds: &Dataset, cfg: &FeatureConfig) -> Result<Self, EvalError> {
        let pipeline = FeaturePipeline::new(cfg, ds.expected_length())?;
        let mut data = Vec::with_capacity(ds.len() * pipeline.vector_len());
        let start = Instant::now();
        for r in ds.records() {
            data.extend(pipeline.extract_values(r)?);
        }
        let elapsed = start.elapsed().as_nanos() as f64;
        Ok(PreparedFeatures {
            matrix: Matrix::new(ds.len(), pipeline.vector_len(), data),
            labels: ds.labels(),
            feature_ns_per_record: elapsed / ds.len() as f64,
        })
    }
}

/// Runs the cross-validation protocol on `ds`.
pub fn run_protocol(ds: &Dataset, cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    let prepared = PreparedFeatures::extract(ds, &cfg.features)?;
    run_prepared(ds, &prepared, cfg)
}

/// Runs the protocol on features that were already extracted from `ds`.
pub fn run_prepared(
    ds: &Dataset,
    prepared: &PreparedFeatures,
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    if cfg.classifiers.is_empty() {
        return Err(EvalError::NoClassifier);
    }
    cfg.split.validate()?;
    let n = prepared.labels.len();
    let train_size = cfg.split.train_size(n);
    if train_size == 0 || train_size >= n {
        return Err(EvalError::Config(format!(
            "a {} split of {n} records leaves an empty train or test set",
            cfg.split.train_fraction
        )));
    }
    let threads = cfg.threads.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| EvalError::ThreadPool(e.to_string()))?;
    let folds: Vec<FoldResult> = pool.install(|| {
        (0..cfg.split.folds)
            .into_par_iter()
            .map(|fold| run_fold(prepared, cfg, fold))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let mut kinds = cfg.classifiers.clone();
    kinds.sort_unstable();
    kinds.dedup();
    let mean = kinds
        .iter()
        .map(|k| {
            let per_fold: Vec<Metrics> = folds.iter().map(|f| f.metrics[k]).collect();
            (*k, Metrics::mean(&per_fold))
        })
        .collect();
    let timing = summarize_timing(&folds, &kinds, prepared.feature_ns_per_record, threads);
    Ok(EvalReport {
        dataset: DatasetSummary {
            name: ds.name.clone(),
            records: ds.len(),
            record_len: ds.expected_length(),
            fs: ds.fs(),
            class_counts: ClassCounts::of(ds.labels()),
        },
        config: EvalConfig {
            classifiers: kinds,
            threads,
            ..cfg.clone()
        },
        folds,
        mean,
        timing,
    })
}

fn summarize_timing(
    folds: &[FoldResult],
    kinds: &[ClassifierKind],
    feature_ns: f64,
    threads: usize,
) -> TimingSummary {
    let ms = |ns: f64| ns / 1e6;
    let tested: f64 = folds
        .iter()
        .map(|f| (f.test.adl + f.test.fall) as f64)
        .sum();
    let classify_ms_per_record = kinds
        .iter()
        .map(|k| {
            let total: u128 = folds.iter().map(|f| f.timing.classify_ns[k]).sum();
            (*k, ms(total as f64 / tested))
        })
        .collect();
    let per_fold = |get: fn(&FoldTiming) -> u128| {
        let total: u128 = folds.iter().map(|f| get(&f.timing)).sum();
        ms(total as f64 / folds.len() as f64)
    };
    let uses = |k: ClassifierKind| kinds.contains(&k) || kinds.contains(&ClassifierKind::Vm);
    TimingSummary {
        feature_ms_per_record: ms(feature_ns),
        classify_ms_per_record,
        enn_preprocess_ms: uses(ClassifierKind::Enn).then(|| per_fold(|t| t.enn_preprocess_ns)),
        bdt_train_ms: uses(ClassifierKind::Bdt).then(|| per_fold(|t| t.bdt_train_ns)),
        threads,
    }
}

/// Classifies once, returning the label and the elapsed nanoseconds.
fn timed(
    f: impl FnOnce() -> Result<Label, ClassifierError>,
) -> Result<(Label, u128), ClassifierError> {
    let t = Instant::now();
    let label = f()?;
    Ok((label, t.elapsed().as_nanos()))
}

fn run_fold(
    prepared: &PreparedFeatures,
    cfg: &EvalConfig,
    fold: usize,
) -> Result<FoldResult, EvalError> {
    let n = prepared.labels.len();
    let (train_idx, test_idx) = split_indices(n, &cfg.split, fold)?;
    let train_labels: Vec<Label> = train_idx.iter().map(|&i| prepared.labels[i]).collect();
    let fold_err = |source| EvalError::Fold { fold, source };
    let train = std::sync::Arc::new(
        TrainingSet::new(prepared.matrix.select(&train_idx), train_labels.clone())
            .map_err(fold_err)?,
    );

    let wants = |k: ClassifierKind| {
        cfg.classifiers.contains(&k) || cfg.classifiers.contains(&ClassifierKind::Vm)
    };
    let mut timing = FoldTiming::default();
    let knn = if wants(ClassifierKind::Knn) {
        Some(KnnModel::fit(train.clone(), cfg.params.k).map_err(fold_err)?)
    } else {
        None
    };
    let enn = if wants(ClassifierKind::Enn) {
        let t = Instant::now();
        let m = EnnModel::preprocess(train.clone(), cfg.params.e).map_err(fold_err)?;
        timing.enn_preprocess_ns = t.elapsed().as_nanos();
        Some(m)
    } else {
        None
    };
    let bdt = if wants(ClassifierKind::Bdt) {
        let t = Instant::now();
        let m = BdtModel::train(&train).map_err(fold_err)?;
        timing.bdt_train_ns = t.elapsed().as_nanos();
        Some(m)
    } else {
        None
    };

    let mut kinds = cfg.classifiers.clone();
    kinds.sort_unstable();
    kinds.dedup();
    let mut counts: BTreeMap<ClassifierKind, ConfusionCounts> = kinds
        .iter()
        .map(|&k| (k, ConfusionCounts::default()))
        .collect();
    let mut elapsed: BTreeMap<ClassifierKind, u128> = kinds.iter().map(|&k| (k, 0)).collect();
    for &i in &test_idx {
        let query = prepared.matrix.row(i);
        let truth = prepared.labels[i];
        let knn_out = knn
            .as_ref()
            .map(|m| timed(|| m.classify(query)))
            .transpose()
            .map_err(fold_err)?;
        let enn_out = enn
            .as_ref()
            .map(|m| timed(|| m.classify(query)))
            .transpose()
            .map_err(fold_err)?;
        let bdt_out = bdt
            .as_ref()
            .map(|m| timed(|| m.classify(query)))
            .transpose()
            .map_err(fold_err)?;
        for (kind, out) in [
            (ClassifierKind::Knn, knn_out),
            (ClassifierKind::Enn, enn_out),
            (ClassifierKind::Bdt, bdt_out),
        ] {
            if let (Some(c), Some((label, ns))) = (counts.get_mut(&kind), out) {
                c.record(truth, label);
                *elapsed.entry(kind).or_default() += ns;
            }
        }
        if let (Some(c), Some((k, k_ns)), Some((e, e_ns)), Some((b, b_ns))) = (
            counts.get_mut(&ClassifierKind::Vm),
            knn_out,
            enn_out,
            bdt_out,
        ) {
            let t = Instant::now();
            let label = vote(k, e, b);
            let vote_ns = t.elapsed().as_nanos();
            c.record(truth, label);
            *elapsed.entry(ClassifierKind::Vm).or_default() += k_ns + e_ns + b_ns + vote_ns;
        }
    }
    timing.classify_ns = elapsed;

    let metrics = counts
        .iter()
        .map(|(&k, c)| (k, compute_metrics(c)))
        .collect();
    Ok(FoldResult {
        index: fold,
        train: ClassCounts::of(train_labels),
        test: ClassCounts::of(test_idx.iter().map(|&i| prepared.labels[i])),
        counts,
        metrics,
        timing,
    })
}
