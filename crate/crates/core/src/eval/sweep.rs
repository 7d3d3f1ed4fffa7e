//! Neighbor-count and feature-combination sweeps.
//!
//! A sweep is a sequence of protocol runs sharing one split specification,
//! so every value is evaluated on exactly the same folds.

use std::fmt::Write as _;

use serde::Serialize;

use super::report::{exact_cell, percent_cell, text_table, Format};
use super::{run_prepared, EvalConfig, EvalError, EvalReport, Metric, Metrics, PreparedFeatures};
use crate::classifiers::{ClassifierKind, NeighborParams};
use crate::dataset::{Dataset, SplitSpec};
use crate::features::{Extractor, FeatureConfig, WaveletSpec};

/// One swept value for one classifier, with its fold-averaged metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub classifier: ClassifierKind,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    /// Name of the swept parameter, e.g. `neighbors` or `features`.
    pub parameter: &'static str,
    pub rows: Vec<SweepRow>,
    /// The full report behind every swept value, in sweep order.
    pub reports: Vec<(String, EvalReport)>,
}

impl SweepTable {
    fn push(&mut self, param: String, report: EvalReport) {
        for (&classifier, metrics) in &report.mean {
            self.rows.push(SweepRow {
                param: param.clone(),
                classifier,
                metrics: *metrics,
            });
        }
        self.reports.push((param, report));
    }

    pub fn get(&self, param: &str, classifier: ClassifierKind) -> Option<&Metrics> {
        self.rows
            .iter()
            .find(|r| r.param == param && r.classifier == classifier)
            .map(|r| &r.metrics)
    }

    pub fn has_undefined_metric(&self) -> bool {
        self.reports.iter().any(|(_, r)| r.has_undefined_metric())
    }

    /// CSV has one `(param, classifier, metric, value)` row per cell; text
    /// pivots accuracy by classifier; JSON lists the rows.
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["param", "classifier", "metric", "value"])
                    .expect("in-memory csv");
                for row in &self.rows {
                    for m in Metric::ALL {
                        w.write_record([
                            row.param.as_str(),
                            row.classifier.name(),
                            m.name(),
                            &exact_cell(row.metrics.get(m)),
                        ])
                        .expect("in-memory csv");
                    }
                }
                String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
            }
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&serde_json::json!({
                    "parameter": self.parameter,
                    "rows": self.rows,
                }))
                .expect("sweep serializes");
                s.push('\n');
                s
            }
            Format::Text => {
                let mut kinds: Vec<ClassifierKind> =
                    self.rows.iter().map(|r| r.classifier).collect();
                kinds.sort_unstable();
                kinds.dedup();
                let mut header = vec![self.parameter];
                header.extend(kinds.iter().map(|k| k.name()));
                let rows: Vec<Vec<String>> =
                    self.reports
                        .iter()
                        .map(|(param, _)| {
                            let mut row = vec![param.clone()];
                            row.extend(kinds.iter().map(|&k| {
                                percent_cell(self.get(param, k).and_then(|m| m.accuracy))
                            }));
                            row
                        })
                        .collect();
                let mut out = String::new();
                let _ = writeln!(out, "Mean accuracy (%) by {}", self.parameter);
                out.push_str(&text_table(&header, &rows));
                out
            }
        }
    }
}

/// Odd values `1, 3, ..., max`.
pub fn odd_values(max: usize) -> Vec<usize> {
    (1..=max).step_by(2).collect()
}

/// Runs KNN with `k = v` and ENN with `e = v` for each value.
pub fn sweep_neighbors(
    ds: &Dataset,
    features: &FeatureConfig,
    split: SplitSpec,
    values: &[usize],
    threads: usize,
) -> Result<SweepTable, EvalError> {
    if values.is_empty() {
        return Err(EvalError::Config(
            "neighbor sweep needs at least one value".into(),
        ));
    }
    if let Some(v) = values.iter().find(|&&v| v == 0 || v % 2 == 0) {
        return Err(EvalError::Config(format!(
            "neighbor counts must be odd and positive, got {v}"
        )));
    }
    split.validate()?;
    let train_size = split.train_size(ds.len());
    let max = *values.iter().max().expect("non-empty");
    if max >= train_size {
        return Err(EvalError::Config(format!(
            "largest neighbor count {max} must be below the training-set size {train_size}"
        )));
    }
    let prepared = PreparedFeatures::extract(ds, features)?;
    let mut table = SweepTable {
        parameter: "neighbors",
        rows: Vec::new(),
        reports: Vec::new(),
    };
    for &v in values {
        let cfg = EvalConfig {
            features: features.clone(),
            classifiers: vec![ClassifierKind::Knn, ClassifierKind::Enn],
            params: NeighborParams { k: v, e: v },
            split,
            threads,
        };
        table.push(v.to_string(), run_prepared(ds, &prepared, &cfg)?);
    }
    Ok(table)
}

/// Runs all four classifiers once per feature combination.
pub fn sweep_features(
    ds: &Dataset,
    combos: &[(String, FeatureConfig)],
    split: SplitSpec,
    params: NeighborParams,
    threads: usize,
) -> Result<SweepTable, EvalError> {
    if combos.is_empty() {
        return Err(EvalError::Config(
            "feature sweep needs at least one combination".into(),
        ));
    }
    let mut table = SweepTable {
        parameter: "features",
        rows: Vec::new(),
        reports: Vec::new(),
    };
    for (name, features) in combos {
        let cfg = EvalConfig {
            features: features.clone(),
            classifiers: ClassifierKind::ALL.to_vec(),
            params,
            split,
            threads,
        };
        let prepared = PreparedFeatures::extract(ds, features)?;
        table.push(name.clone(), run_prepared(ds, &prepared, &cfg)?);
    }
    Ok(table)
}

/// The seventeen feature combinations of the feature-selection study, from
/// the weakest single feature to the selected set.
pub fn table5_combinations(wavelet: WaveletSpec) -> Vec<(String, FeatureConfig)> {
    use Extractor::*;
    let rows: [(&str, &[Extractor]); 17] = [
        ("Total|SVM|", &[TotalAbsSvm]),
        ("SMA", &[Sma]),
        ("SVM", &[Svm]),
        ("SMA&SVM", &[Sma, Svm]),
        ("Range", &[Range]),
        ("Raw", &[Raw]),
        ("CWT", &[Cwt]),
        ("SMA,SE,SVM", &[Sma, Se, Svm]),
        ("CWT&SVM", &[Cwt, Svm]),
        ("SE", &[Se]),
        ("CWT&SE", &[Cwt, Se]),
        ("CWT&SMA", &[Cwt, Sma]),
        ("CWT&Total|SVM|", &[Cwt, TotalAbsSvm]),
        ("SMA,SE,Range", &[Sma, Se, Range]),
        ("CWT,SVM,Total|SVM|,SMA,Range,SE", &Extractor::ENGINEERED),
        ("CWT,SE,SMA,Total|SVM|", &[Cwt, Se, Sma, TotalAbsSvm]),
        ("CWT,SE,SMA,SVM", &[Cwt, Se, Sma, Svm]),
    ];
    rows.iter()
        .map(|(name, ex)| {
            let cfg =
                FeatureConfig::new(ex.iter().copied(), wavelet).expect("non-empty combination");
            (name.to_string(), cfg)
        })
        .collect()
}
