//! Text, CSV and JSON renderings of an [`EvalReport`].
//!
//! The report body is a pure function of the data, configuration and seed,
//! so reruns produce byte-identical files. Wall-clock timings vary between
//! runs and are rendered separately by [`render_timing`].

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use serde_json::json;

use super::{EvalReport, Metric, Metrics};
use crate::fmt_f64;

/// Placeholder for a metric with a zero denominator.
pub const UNDEFINED: &str = "—";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Text => "txt",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!(
                "unknown format `{other}` (expected text, csv or json)"
            )),
        }
    }
}

/// Two-decimal percentage for tables, or the undefined marker.
pub fn percent_cell(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |v| format!("{v:.2}"))
}

/// Full-precision value for machine-readable output, or the undefined marker.
pub fn exact_cell(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), fmt_f64)
}

/// Aligned plain-text table: first column left-aligned, the rest right-aligned.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut s = String::new();
        for (i, cell) in cells.enumerate() {
            let pad = widths[i].saturating_sub(cell.chars().count());
            if i > 0 {
                s.push_str("  ");
            }
            if i == 0 {
                s.push_str(cell);
                s.extend(std::iter::repeat_n(' ', pad));
            } else {
                s.extend(std::iter::repeat_n(' ', pad));
                s.push_str(cell);
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(&mut header.iter().copied());
    let rule: Vec<String> = widths.iter().take(cols).map(|w| "-".repeat(*w)).collect();
    line(&mut rule.iter().map(String::as_str));
    for row in rows {
        line(&mut row.iter().map(String::as_str));
    }
    out
}

fn config_lines(report: &EvalReport) -> Vec<(&'static str, String)> {
    let d = &report.dataset;
    let c = &report.config;
    let w = &c.features.wavelet;
    let classifiers: Vec<&str> = c.classifiers.iter().map(|k| k.name()).collect();
    vec![
        ("dataset", d.name.clone()),
        (
            "records",
            format!(
                "{} (ADL {}, FALL {}), L={}, fs={} Hz",
                d.records,
                d.class_counts.adl,
                d.class_counts.fall,
                d.record_len,
                fmt_f64(d.fs)
            ),
        ),
        ("features", c.features.names()),
        (
            "wavelet",
            format!(
                "{} scale={} resolution={}",
                w.family,
                fmt_f64(w.scale),
                w.tabulation_resolution
            ),
        ),
        ("classifiers", classifiers.join(",")),
        ("neighbors", format!("k={} e={}", c.params.k, c.params.e)),
        (
            "split",
            format!(
                "folds={} train_fraction={} seed={}",
                c.split.folds,
                fmt_f64(c.split.train_fraction),
                c.split.seed
            ),
        ),
    ]
}

fn metric_cells(m: &Metrics, cell: fn(Option<f64>) -> String) -> Vec<String> {
    Metric::ALL.iter().map(|&x| cell(m.get(x))).collect()
}

/// Renders the deterministic part of the report.
pub fn render(report: &EvalReport, format: Format) -> String {
    match format {
        Format::Text => render_text(report),
        Format::Csv => render_csv(report),
        Format::Json => render_json(report),
    }
}

fn render_text(report: &EvalReport) -> String {
    let mut out = String::from("Fall detection evaluation\n\n");
    for (k, v) in config_lines(report) {
        let _ = writeln!(out, "{k:<12} {v}");
    }

    out.push_str("\nPer fold\n");
    let header = [
        "fold",
        "train ADL",
        "train FALL",
        "test ADL",
        "test FALL",
        "classifier",
        "tp",
        "fp",
        "tn",
        "fn",
        "accuracy",
        "recall",
        "precision",
        "f1",
        "specificity",
    ];
    let mut rows = Vec::new();
    for f in &report.folds {
        for (kind, c) in &f.counts {
            let mut row = vec![
                f.index.to_string(),
                f.train.adl.to_string(),
                f.train.fall.to_string(),
                f.test.adl.to_string(),
                f.test.fall.to_string(),
                kind.name().to_string(),
                c.tp.to_string(),
                c.fp.to_string(),
                c.tn.to_string(),
                c.fn_.to_string(),
            ];
            row.extend(metric_cells(&f.metrics[kind], percent_cell));
            rows.push(row);
        }
    }
    out.push_str(&text_table(&header, &rows));

    let _ = writeln!(out, "\nMean over {} folds (%)", report.folds.len());
    let rows: Vec<Vec<String>> = report
        .mean
        .iter()
        .map(|(kind, m)| {
            let mut row = vec![kind.name().to_string()];
            row.extend(metric_cells(m, percent_cell));
            row
        })
        .collect();
    out.push_str(&text_table(
        &[
            "classifier",
            "accuracy",
            "recall",
            "precision",
            "f1",
            "specificity",
        ],
        &rows,
    ));
    if report.has_undefined_metric() {
        let _ = writeln!(
            out,
            "\n{UNDEFINED} marks a metric whose denominator is zero in at least one fold."
        );
    }
    out
}

fn render_csv(report: &EvalReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut echo = String::new();
    for (k, v) in config_lines(report) {
        let _ = writeln!(echo, "# {k}: {v}");
    }
    let header = [
        "scope",
        "classifier",
        "train_adl",
        "train_fall",
        "test_adl",
        "test_fall",
        "tp",
        "fp",
        "tn",
        "fn",
        "accuracy",
        "recall",
        "precision",
        "f1",
        "specificity",
    ];
    w.write_record(header).expect("in-memory csv");
    for f in &report.folds {
        for (kind, c) in &f.counts {
            let mut row = vec![
                f.index.to_string(),
                kind.name().to_string(),
                f.train.adl.to_string(),
                f.train.fall.to_string(),
                f.test.adl.to_string(),
                f.test.fall.to_string(),
                c.tp.to_string(),
                c.fp.to_string(),
                c.tn.to_string(),
                c.fn_.to_string(),
            ];
            row.extend(metric_cells(&f.metrics[kind], exact_cell));
            w.write_record(&row).expect("in-memory csv");
        }
    }
    for (kind, m) in &report.mean {
        let mut row = vec!["mean".to_string(), kind.name().to_string()];
        row.extend(std::iter::repeat_n(String::new(), 8));
        row.extend(metric_cells(m, exact_cell));
        w.write_record(&row).expect("in-memory csv");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv");
    echo + &body
}

#[derive(Serialize)]
struct JsonFold<'a> {
    index: usize,
    train: &'a super::ClassCounts,
    test: &'a super::ClassCounts,
    counts:
        &'a std::collections::BTreeMap<crate::classifiers::ClassifierKind, super::ConfusionCounts>,
    metrics: &'a std::collections::BTreeMap<crate::classifiers::ClassifierKind, Metrics>,
}

fn render_json(report: &EvalReport) -> String {
    let folds: Vec<JsonFold> = report
        .folds
        .iter()
        .map(|f| JsonFold {
            index: f.index,
            train: &f.train,
            test: &f.test,
            counts: &f.counts,
            metrics: &f.metrics,
        })
        .collect();
    let value = json!({
        "dataset": report.dataset,
        "config": report.config,
        "folds": folds,
        "mean": report.mean,
    });
    let mut s = serde_json::to_string_pretty(&value).expect("report serializes");
    s.push('\n');
    s
}

/// Renders the wall-clock measurements of a run.
pub fn render_timing(report: &EvalReport, format: Format) -> String {
    let t = &report.timing;
    let mut rows: Vec<(String, String, Option<f64>)> = vec![(
        "feature_extraction_ms_per_record".into(),
        String::new(),
        Some(t.feature_ms_per_record),
    )];
    for (kind, ms) in &t.classify_ms_per_record {
        rows.push((
            "classify_ms_per_record".into(),
            kind.name().into(),
            Some(*ms),
        ));
    }
    rows.push((
        "enn_preprocess_ms_per_fold".into(),
        String::new(),
        t.enn_preprocess_ms,
    ));
    rows.push((
        "bdt_train_ms_per_fold".into(),
        String::new(),
        t.bdt_train_ms,
    ));
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(t).expect("timing serializes");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["quantity", "classifier", "ms"])
                .expect("in-memory csv");
            for (q, c, v) in &rows {
                w.write_record([q.as_str(), c.as_str(), &exact_cell(*v)])
                    .expect("in-memory csv");
            }
            String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
        }
        Format::Text => {
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|(q, c, v)| {
                    vec![
                        q.clone(),
                        c.clone(),
                        v.map_or_else(|| UNDEFINED.to_string(), |v| format!("{v:.4}")),
                    ]
                })
                .collect();
            format!(
                "Timing (wall clock, {} thread{})\n{}",
                t.threads,
                if t.threads == 1 { "" } else { "s" },
                text_table(&["quantity", "classifier", "ms"], &cells)
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_alignment() {
        let t = text_table(
            &["name", "v"],
            &[
                vec!["a".into(), "1.00".into()],
                vec!["bbb".into(), "—".into()],
            ],
        );
        assert_eq!(t, "name     v\n----  ----\na     1.00\nbbb      —\n");
    }

    #[test]
    fn cells() {
        assert_eq!(percent_cell(Some(99.0749)), "99.07");
        assert_eq!(percent_cell(None), "—");
        assert_eq!(exact_cell(Some(0.1)), "0.1");
        assert_eq!("JSON".parse::<Format>(), Ok(Format::Json));
        assert!("xml".parse::<Format>().is_err());
    }
}
