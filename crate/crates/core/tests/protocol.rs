use std::collections::BTreeSet;

use fallkit::classifiers::ClassifierKind;
use fallkit::dataset::{id_set, shuffle_split, split_indices, Dataset, Label, Record, SplitSpec};
use fallkit::eval::report::{render, Format};
use fallkit::eval::sweep::{sweep_features, sweep_neighbors, table5_combinations};
use fallkit::eval::{run_protocol, EvalConfig, Metric};
use fallkit::features::{Extractor, FeatureConfig, WaveletSpec};
use fallkit::synth::{self, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn raw() -> FeatureConfig {
    FeatureConfig::new([Extractor::Raw], WaveletSpec::default()).unwrap()
}

fn split(train_fraction: f64, folds: usize, seed: u64) -> SplitSpec {
    SplitSpec {
        train_fraction,
        folds,
        seed,
    }
}

fn point_record(id: String, p: [f64; 3], label: Label) -> Record {
    Record::new(
        id,
        vec![p[0]; 2],
        vec![p[1]; 2],
        vec![p[2]; 2],
        50.0,
        label.as_str(),
        label,
    )
    .unwrap()
}

#[test]
fn splits_partition_the_dataset() {
    let ds = synth::dataset(40, 30, Shape { len: 20, fs: 50.0 }, 1);
    for spec in [split(0.7, 5, 3), split(0.9, 10, 3)] {
        let mut seen_splits = BTreeSet::new();
        for fold in 0..spec.folds {
            let (train, test) = shuffle_split(&ds, &spec, fold).unwrap();
            assert_eq!(train.len(), spec.train_size(ds.len()));
            let (a, b) = (id_set(&train), id_set(&test));
            assert!(a.is_disjoint(&b));
            assert_eq!(a.union(&b).cloned().collect::<BTreeSet<_>>(), id_set(&ds));
            seen_splits.insert(split_indices(ds.len(), &spec, fold).unwrap().0);
        }
        assert_eq!(
            seen_splits.len(),
            spec.folds,
            "every fold draws a fresh split"
        );
    }
}

#[test]
fn separated_blobs_are_classified_almost_perfectly() {
    let ds = synth::blob_dataset(60, 8.0, 0.6, Shape { len: 4, fs: 50.0 }, 5);
    let report = run_protocol(&ds, &EvalConfig::new(raw(), split(0.7, 5, 0))).unwrap();
    for kind in ClassifierKind::ALL {
        let acc = report.mean_metric(kind, Metric::Accuracy).unwrap();
        assert!(acc >= 95.0, "{kind}: {acc}");
    }
}

#[test]
fn synthetic_activities_are_separable_with_the_selected_features() {
    let ds = synth::dataset(120, 80, Shape::default(), 9);
    let report = run_protocol(
        &ds,
        &EvalConfig::new(FeatureConfig::best(), split(0.7, 3, 0)),
    )
    .unwrap();
    for kind in ClassifierKind::ALL {
        let acc = report.mean_metric(kind, Metric::Accuracy).unwrap();
        assert!(acc >= 95.0, "{kind}: {acc}");
    }
}

#[test]
fn identical_vectors_carry_no_information() {
    let records: Vec<Record> = (0..200)
        .map(|i| {
            let label = if i % 5 < 3 { Label::Adl } else { Label::Fall };
            point_record(format!("same-{i:03}"), [1.0, 2.0, 3.0], label)
        })
        .collect();
    let ds = Dataset::new("constant", records).unwrap();
    let report = run_protocol(&ds, &EvalConfig::new(raw(), split(0.7, 5, 2))).unwrap();
    for kind in ClassifierKind::ALL {
        let acc = report.mean_metric(kind, Metric::Accuracy).unwrap();
        // Nothing beats always answering the majority class (60% ADL).
        assert!(acc <= 60.0 + 12.0, "{kind}: {acc}");
    }
}

/// Small tight FALL clusters scattered over a uniform ADL background: a wide
/// neighborhood swamps each cluster with ADL points.
fn fine_grained_dataset(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for i in 0..600 {
        let p = [rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0), 0.0];
        records.push(point_record(format!("adl-{i:04}"), p, Label::Adl));
    }
    for c in 0..40 {
        let center = [rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)];
        for j in 0..6 {
            let p = [
                center[0] + rng.gen_range(-0.7..0.7),
                center[1] + rng.gen_range(-0.7..0.7),
                0.0,
            ];
            records.push(point_record(format!("fall-{c:02}-{j}"), p, Label::Fall));
        }
    }
    Dataset::new("fine-grained", records).unwrap()
}

#[test]
fn large_neighborhoods_lose_fine_structure() {
    let ds = fine_grained_dataset(17);
    let table = sweep_neighbors(&ds, &raw(), split(0.7, 5, 0), &[3, 5, 7, 17], 2).unwrap();
    for kind in [ClassifierKind::Knn, ClassifierKind::Enn] {
        let acc = |v: &str| table.get(v, kind).unwrap().accuracy.unwrap();
        let best_small = ["3", "5", "7"]
            .iter()
            .map(|v| acc(v))
            .fold(f64::MIN, f64::max);
        assert!(
            best_small > acc("17"),
            "{kind}: small {best_small} vs 17 {}",
            acc("17")
        );
    }
}

#[test]
fn neighbor_sweep_rejects_bad_values() {
    let ds = synth::blob_dataset(20, 8.0, 0.6, Shape { len: 4, fs: 50.0 }, 5);
    assert!(sweep_neighbors(&ds, &raw(), split(0.7, 2, 0), &[2], 1).is_err());
    assert!(sweep_neighbors(&ds, &raw(), split(0.7, 2, 0), &[15], 1).is_err());
    assert!(sweep_neighbors(&ds, &raw(), split(0.7, 2, 0), &[], 1).is_err());
}

#[test]
fn feature_sweep_covers_every_combination() {
    let ds = synth::dataset(30, 20, Shape { len: 60, fs: 50.0 }, 4);
    let combos = table5_combinations(WaveletSpec::default());
    assert_eq!(combos.len(), 17);
    assert_eq!(combos.last().unwrap().1, FeatureConfig::best());
    let table = sweep_features(&ds, &combos, split(0.7, 2, 0), Default::default(), 2).unwrap();
    assert_eq!(table.reports.len(), 17);
    assert_eq!(table.rows.len(), 17 * 4);
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let ds = synth::dataset(60, 40, Shape { len: 80, fs: 50.0 }, 8);
    let mut cfg = EvalConfig::new(FeatureConfig::all(), split(0.7, 4, 42));
    cfg.threads = 1;
    let one = run_protocol(&ds, &cfg).unwrap();
    cfg.threads = 4;
    let four = run_protocol(&ds, &cfg).unwrap();
    for fmt in [Format::Text, Format::Csv, Format::Json] {
        assert_eq!(render(&one, fmt), render(&four, fmt));
    }
    assert_eq!(
        render(&one, Format::Csv),
        render(&run_protocol(&ds, &cfg).unwrap(), Format::Csv)
    );
}

#[test]
fn different_seeds_draw_different_folds() {
    let ds = synth::dataset(60, 40, Shape { len: 40, fs: 50.0 }, 8);
    let a = run_protocol(&ds, &EvalConfig::new(raw(), split(0.7, 3, 1))).unwrap();
    let b = run_protocol(&ds, &EvalConfig::new(raw(), split(0.7, 3, 2))).unwrap();
    assert_ne!(render(&a, Format::Csv), render(&b, Format::Csv));
}
