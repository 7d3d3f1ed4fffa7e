//! Acceptance checks, one `PASS` / `FAIL` / `BLOCKED` line per criterion.
//!
//! Criteria on the UniMiB SHAR fall data need the dataset converted to the
//! canonical CSV (see `scripts/unimib_to_csv.py`); point
//! `FALLKIT_UNIMIB_CSV` at it. Without it those criteria report `BLOCKED`.
//! The process fails on any `FAIL`, and on `BLOCKED` too when
//! `FALLKIT_ACCEPTANCE_STRICT=1`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use common::*;
use fallkit::classifiers::{
    ClassifierKind, EnnModel, KnnModel, ModelBundle, NeighborParams, TrainingSet, VotingModel,
};
use fallkit::dataset::{Dataset, Label, Record, SplitSpec};
use fallkit::eval::report::{render, Format};
use fallkit::eval::sweep::{sweep_features, sweep_neighbors, table5_combinations};
use fallkit::eval::{
    compute_metrics, run_protocol, ConfusionCounts, EvalConfig, EvalReport, Metric,
};
use fallkit::features::{
    cwt_single_scale, signal_energy, FeatureConfig, FeaturePipeline, WaveletFamily, WaveletSpec,
};
use fallkit::gateway::{detect, Counters, Detector, WindowPolicy};
use fallkit::synth::{self, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Blocked(String),
}

fn unimib() -> Result<Dataset, String> {
    let Some(path) = std::env::var_os("FALLKIT_UNIMIB_CSV") else {
        return Err(
            "UniMiB SHAR data not available (set FALLKIT_UNIMIB_CSV to the converted CSV)".into(),
        );
    };
    Dataset::load_canonical(&path)
        .map_err(|e| format!("cannot load {}: {e}", path.to_string_lossy()))
}

fn split(train_fraction: f64, folds: usize) -> SplitSpec {
    SplitSpec {
        train_fraction,
        folds,
        seed: 0,
    }
}

/// `(name, observed, target, tolerance)` rows, all of which must hold.
fn within(rows: &[(&str, f64, f64, f64)]) -> Outcome {
    let text: Vec<String> = rows
        .iter()
        .map(|(n, got, want, tol)| format!("{n} {got:.2} (target {want}±{tol})"))
        .collect();
    if rows
        .iter()
        .all(|(_, got, want, tol)| (got - want).abs() <= *tol)
    {
        Outcome::Pass(text.join(", "))
    } else {
        Outcome::Fail(text.join(", "))
    }
}

fn mean(report: &EvalReport, kind: ClassifierKind, metric: Metric) -> f64 {
    report.mean_metric(kind, metric).unwrap_or(f64::NAN)
}

fn best_set_five_fold() -> Outcome {
    let ds = match unimib() {
        Ok(ds) => ds,
        Err(e) => return Outcome::Blocked(e),
    };
    let report = run_protocol(&ds, &EvalConfig::new(FeatureConfig::best(), split(0.7, 5))).unwrap();
    use ClassifierKind::*;
    within(&[
        (
            "ENN accuracy",
            mean(&report, Enn, Metric::Accuracy),
            99.07,
            1.0,
        ),
        ("ENN recall", mean(&report, Enn, Metric::Recall), 98.98, 1.5),
        (
            "ENN specificity",
            mean(&report, Enn, Metric::Specificity),
            99.12,
            1.5,
        ),
        (
            "KNN accuracy",
            mean(&report, Knn, Metric::Accuracy),
            98.94,
            1.0,
        ),
        (
            "BDT accuracy",
            mean(&report, Bdt, Metric::Accuracy),
            96.79,
            2.5,
        ),
        (
            "VM accuracy",
            mean(&report, Vm, Metric::Accuracy),
            99.14,
            1.0,
        ),
    ])
}

fn best_set_ten_fold() -> Outcome {
    let ds = match unimib() {
        Ok(ds) => ds,
        Err(e) => return Outcome::Blocked(e),
    };
    let mut cfg = EvalConfig::new(FeatureConfig::best(), split(0.9, 10));
    cfg.classifiers = vec![ClassifierKind::Enn];
    let report = run_protocol(&ds, &cfg).unwrap();
    within(&[
        (
            "ENN accuracy",
            mean(&report, ClassifierKind::Enn, Metric::Accuracy),
            99.15,
            1.0,
        ),
        (
            "ENN F1",
            mean(&report, ClassifierKind::Enn, Metric::F1),
            98.81,
            1.5,
        ),
    ])
}

fn timing_and_feature_ranking() -> Outcome {
    let ds = match unimib() {
        Ok(ds) => ds,
        Err(e) => return Outcome::Blocked(e),
    };
    let report = run_protocol(&ds, &EvalConfig::new(FeatureConfig::best(), split(0.7, 5))).unwrap();
    let t = &report.timing.classify_ms_per_record;
    let (bdt, enn, knn) = (
        t[&ClassifierKind::Bdt],
        t[&ClassifierKind::Enn],
        t[&ClassifierKind::Knn],
    );
    let timing_ok = bdt < enn && enn < knn;
    let combos = table5_combinations(WaveletSpec::default());
    let table = sweep_features(&ds, &combos, split(0.7, 5), NeighborParams::SWEEP, 1).unwrap();
    let best = &combos.last().unwrap().0;
    let mut losers = Vec::new();
    for kind in [ClassifierKind::Enn, ClassifierKind::Vm] {
        let top = table
            .get(best, kind)
            .and_then(|m| m.accuracy)
            .unwrap_or(f64::NAN);
        for (name, cfg) in combos.iter().filter(|(_, c)| c.enabled().len() == 1) {
            let acc = table
                .get(name, kind)
                .and_then(|m| m.accuracy)
                .unwrap_or(f64::NAN);
            if !(top > acc) {
                losers.push(format!(
                    "{kind} {name} {acc:.2} >= best {top:.2} ({})",
                    cfg.names()
                ));
            }
        }
    }
    let detail =
        format!(
        "ms/record BDT {bdt:.4} ENN {enn:.4} KNN {knn:.4}; best set beats every single feature: {}",
        if losers.is_empty() { "yes".to_string() } else { losers.join("; ") }
    );
    if timing_ok && losers.is_empty() {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn neighbor_robustness() -> Outcome {
    let ds = match unimib() {
        Ok(ds) => ds,
        Err(e) => return Outcome::Blocked(e),
    };
    let subset = ds.stratified_subset(2000, 0).unwrap();
    let table = sweep_neighbors(
        &subset,
        &FeatureConfig::best(),
        split(0.7, 5),
        &[3, 5, 7, 17],
        1,
    )
    .unwrap();
    let acc =
        |v: &str, k: ClassifierKind| table.get(v, k).and_then(|m| m.accuracy).unwrap_or(f64::NAN);
    let best = |k: ClassifierKind| {
        ["3", "5", "7"]
            .iter()
            .map(|v| acc(v, k))
            .fold(f64::NAN, f64::max)
    };
    let knn_drop = best(ClassifierKind::Knn) - acc("17", ClassifierKind::Knn);
    let enn_drop = best(ClassifierKind::Enn) - acc("17", ClassifierKind::Enn);
    let detail = format!("KNN drop {knn_drop:.2} pp, ENN drop {enn_drop:.2} pp");
    if knn_drop > 0.0 && enn_drop <= knn_drop + 0.5 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn training_set(points: &[Vec<f64>], labels: &[Label]) -> Arc<TrainingSet> {
    Arc::new(TrainingSet::new(matrix(points), labels.to_vec()).unwrap())
}

fn enn_oracle_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    let (mut queries, mut bad) = (0, 0);
    for instance in 0..200 {
        let integer = instance % 2 == 0;
        let n = rng.gen_range(8..=60);
        let dim = rng.gen_range(1..=4);
        let e = [1, 3, 5, 7][rng.gen_range(0..4)].min(n - 1);
        let (points, labels) = random_instance(&mut rng, n, dim, integer);
        let model = EnnModel::preprocess(training_set(&points, &labels), e).unwrap();
        for _ in 0..5 {
            let q = random_point(&mut rng, dim, integer);
            queries += 1;
            if model.classify(&q).unwrap() != enn_oracle(&points, &labels, e, &q) {
                bad += 1;
            }
        }
    }
    let detail = format!("200 instances, {queries} queries, {bad} disagreements");
    if bad == 0 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn knn_oracle_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC4);
    let (mut queries, mut bad) = (0, 0);
    for instance in 0..200 {
        let integer = instance % 2 == 0;
        let n = rng.gen_range(9..=150);
        let dim = rng.gen_range(1..=6);
        let k = [1, 3, 5, 7, 9][rng.gen_range(0..5)];
        let (points, labels) = random_instance(&mut rng, n, dim, integer);
        let model = KnnModel::fit(training_set(&points, &labels), k).unwrap();
        for _ in 0..5 {
            let q = random_point(&mut rng, dim, integer);
            queries += 1;
            if model.classify(&q).unwrap() != knn_oracle(&points, &labels, k, &q) {
                bad += 1;
            }
        }
    }
    let detail = format!("200 instances, {queries} queries, {bad} disagreements");
    if bad == 0 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn parseval_and_linearity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC5);
    let mut worst_parseval = 0.0f64;
    let mut worst_linear = 0.0f64;
    for i in 0..1000 {
        let len = rng.gen_range(2..=200);
        let mut axis = || {
            (0..len)
                .map(|_| rng.gen_range(-20.0..20.0))
                .collect::<Vec<f64>>()
        };
        let (ax, ay, az) = (axis(), axis(), axis());
        let r = Record::new("r", ax, ay, az, 50.0, "Walking", Label::Adl).unwrap();
        for (axis, e) in r.axes().iter().zip(signal_energy(&r)) {
            let time = axis.iter().map(|v| v * v).sum::<f64>() * len as f64;
            worst_parseval =
                worst_parseval.max((e - time).abs() / time.abs().max(f64::MIN_POSITIVE));
        }
        let spec = WaveletSpec {
            family: WaveletFamily::ALL[i % WaveletFamily::ALL.len()],
            scale: rng.gen_range(1.0..300.0),
            tabulation_resolution: 256,
        };
        let (a, b) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let mix: Vec<f64> = r.ax.iter().zip(&r.ay).map(|(x, y)| a * x + b * y).collect();
        let (cx, cy, cm) = (
            cwt_single_scale(&r.ax, &spec).unwrap(),
            cwt_single_scale(&r.ay, &spec).unwrap(),
            cwt_single_scale(&mix, &spec).unwrap(),
        );
        let norm = cx.iter().chain(&cy).map(|v| v.abs()).fold(0.0, f64::max) * (a.abs() + b.abs());
        if norm > 0.0 {
            for t in 0..len {
                worst_linear = worst_linear.max((cm[t] - (a * cx[t] + b * cy[t])).abs() / norm);
            }
        }
    }
    let detail = format!("1000 records; worst relative error: Parseval {worst_parseval:.1e}, CWT linearity {worst_linear:.1e}");
    if worst_parseval <= 1e-9 && worst_linear <= 1e-9 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn metric_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC6);
    let mut failures = Vec::new();
    for _ in 0..100_000 {
        let [tp, fn_, fp, tn] = [(); 4].map(|_| rng.gen_range(0u64..3000));
        let m = compute_metrics(&ConfusionCounts::new(tp, fn_, fp, tn));
        let (p, n) = ((tp + fn_) as f64, (fp + tn) as f64);
        if let (Some(ac), Some(re), Some(sp)) = (m.accuracy, m.recall, m.specificity) {
            if (ac * (p + n) - (re * p + sp * n)).abs() > 1e-9 * (p + n) * 100.0 {
                failures.push(format!("identity at {tp},{fn_},{fp},{tn}"));
            }
        }
        if let (Some(pr), Some(re), Some(f1)) = (m.precision, m.recall, m.f1) {
            if f1 < pr.min(re) - 1e-9 || f1 > pr.max(re) + 1e-9 {
                failures.push(format!("F1 bounds at {tp},{fn_},{fp},{tn}"));
            }
        }
    }
    if failures.is_empty() {
        Outcome::Pass("100000 random confusion matrices".into())
    } else {
        Outcome::Fail(format!(
            "{} violations, first: {}",
            failures.len(),
            failures[0]
        ))
    }
}

fn determinism() -> Outcome {
    let ds = synth::dataset(90, 60, Shape::default(), 42);
    let again = synth::dataset(90, 60, Shape::default(), 42);
    let bytes = |d: &Dataset| {
        let mut out = Vec::new();
        d.write_canonical(&mut out).unwrap();
        out
    };
    let mut cfg = EvalConfig::new(
        FeatureConfig::best(),
        SplitSpec {
            seed: 42,
            ..split(0.7, 5)
        },
    );
    cfg.threads = 1;
    let one = run_protocol(&ds, &cfg).unwrap();
    let repeat = run_protocol(&again, &cfg).unwrap();
    cfg.threads = 4;
    let four = run_protocol(&ds, &cfg).unwrap();
    let same_data = bytes(&ds) == bytes(&again);
    let same_reports = [Format::Text, Format::Csv, Format::Json]
        .iter()
        .all(|&f| render(&one, f) == render(&repeat, f) && render(&one, f) == render(&four, f));
    let detail = format!("dataset bytes equal: {same_data}; reports equal across reruns and 1/4 threads: {same_reports}");
    if same_data && same_reports {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn gateway_latency_and_parity() -> Outcome {
    // A model on 8,240 training records, the size of a 70% UniMiB split, at
    // the 150-sample length of a 3 s window at 50 Hz.
    let shape = Shape { len: 150, fs: 50.0 };
    let ds = synth::impact_dataset(4944, 3296, shape, 6);
    let features = FeatureConfig::best();
    let pipeline = FeaturePipeline::new(&features, shape.len).unwrap();
    let matrix = pipeline.extract_dataset(&ds).unwrap().matrix;
    let model = VotingModel::train(
        TrainingSet::new(matrix, ds.labels()).unwrap(),
        NeighborParams::TUNED,
    )
    .unwrap();
    let bundle = ModelBundle {
        features,
        record_len: shape.len,
        fs: shape.fs,
        model,
    };
    let mut det = Detector::new(bundle, WindowPolicy::default()).unwrap();
    let fall = synth::impact_dataset(0, 1, shape, 77).records()[0].clone();
    let frames = synth::embed_in_zeros(&fall, 60.0, 20.0);

    let mut windower = det.windower();
    let scratch = Counters::default();
    let (len, stride) = det.policy().samples(shape.fs);
    let (mut windows, mut mismatches, mut worst_ms) = (0, 0, 0.0f64);
    for f in frames.iter().copied() {
        let Some(w) = windower.push(f, &scratch) else {
            continue;
        };
        let start = Instant::now();
        let streamed = det.classify(&w).unwrap();
        worst_ms = worst_ms.max(start.elapsed().as_secs_f64() * 1e3);
        let slice = &frames[w.id as usize * stride..w.id as usize * stride + len];
        let offline = Record::new(
            "offline",
            slice.iter().map(|f| f.ax).collect(),
            slice.iter().map(|f| f.ay).collect(),
            slice.iter().map(|f| f.az).collect(),
            shape.fs,
            "Quiet",
            Label::Adl,
        )
        .unwrap();
        let expected = det
            .bundle()
            .model
            .predict(&pipeline.extract_values(&offline).unwrap())
            .unwrap();
        if expected.label != streamed.label || expected.votes != streamed.votes {
            mismatches += 1;
        }
        windows += 1;
    }
    let counters = Counters::default();
    let alerts = detect(frames, &mut det, &counters).unwrap();
    let stats = counters.snapshot();
    worst_ms = worst_ms.max(stats.max_latency_ms);
    let detail = format!(
        "{windows} windows, {mismatches} streaming/offline label mismatches, worst features+VM {worst_ms:.1} ms, {} alert(s)",
        alerts.len()
    );
    if mismatches == 0 && worst_ms < 500.0 && windows > 0 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        (
            "1  UniMiB 5-fold 70/30 best set, all classifiers",
            best_set_five_fold,
        ),
        ("2  UniMiB 10-fold 90/10 best set, ENN", best_set_ten_fold),
        (
            "3  timing order and best-set ranking",
            timing_and_feature_ranking,
        ),
        (
            "4  neighbor-count robustness on 2000 records",
            neighbor_robustness,
        ),
        ("5a ENN vs from-scratch oracle", enn_oracle_agreement),
        ("5b KNN vs brute-force oracle", knn_oracle_agreement),
        ("5c Parseval and CWT linearity", parseval_and_linearity),
        ("5d metric identities", metric_identities),
        ("5e byte-identical determinism", determinism),
        (
            "6  gateway latency and streaming parity",
            gateway_latency_and_parity,
        ),
    ];
    let strict = std::env::var("FALLKIT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let (mut failed, mut blocked) = (0, 0);
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        match outcome {
            Outcome::Pass(d) => println!("PASS    {name}: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL    {name}: {d}");
            }
            Outcome::Blocked(d) => {
                blocked += 1;
                println!("BLOCKED {name}: {d}");
            }
        }
    }
    println!("acceptance: {failed} failed, {blocked} blocked");
    if failed > 0 || (strict && blocked > 0) {
        std::process::exit(1);
    }
}
