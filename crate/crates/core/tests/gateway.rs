use std::io::Cursor;
use std::sync::atomic::AtomicBool;
use std::sync::OnceLock;

use fallkit::classifiers::{ModelBundle, NeighborParams, TrainingSet, VotingModel};
use fallkit::dataset::{Label, Record};
use fallkit::features::{FeatureConfig, FeaturePipeline};
use fallkit::gateway::{
    detect, serve, Counters, Detector, Frame, GatewayError, Overflow, WindowPolicy,
};
use fallkit::synth::{self, Shape};

const SHAPE: Shape = Shape { len: 150, fs: 50.0 };

fn bundle() -> ModelBundle {
    static BUNDLE: OnceLock<ModelBundle> = OnceLock::new();
    BUNDLE
        .get_or_init(|| {
            let ds = synth::impact_dataset(240, 160, SHAPE, 21);
            let features = FeatureConfig::best();
            let pipeline = FeaturePipeline::new(&features, SHAPE.len).unwrap();
            let matrix = pipeline.extract_dataset(&ds).unwrap().matrix;
            let model = VotingModel::train(
                TrainingSet::new(matrix, ds.labels()).unwrap(),
                NeighborParams::TUNED,
            )
            .unwrap();
            ModelBundle {
                features,
                record_len: SHAPE.len,
                fs: SHAPE.fs,
                model,
            }
        })
        .clone()
}

fn detector(debounce: f64) -> Detector {
    let policy = WindowPolicy {
        debounce,
        ..WindowPolicy::default()
    };
    Detector::new(bundle(), policy).unwrap()
}

/// Falls the model never saw during training.
fn held_out_falls() -> Vec<Record> {
    synth::impact_dataset(0, 6, SHAPE, 99).records().to_vec()
}

fn zeros(seconds: f64) -> Vec<Frame> {
    let quiet = Record::new(
        "zero",
        vec![0.0; 2],
        vec![0.0; 2],
        vec![0.0; 2],
        SHAPE.fs,
        "Quiet",
        Label::Adl,
    )
    .unwrap();
    synth::embed_in_zeros(&quiet, seconds, seconds)
}

/// Overlays `record` onto `frames` starting at `at` seconds.
fn overlay(frames: &mut [Frame], record: &Record, at: f64) {
    let offset = (at * SHAPE.fs).round() as usize;
    for j in 0..record.len() {
        let f = &mut frames[offset + j];
        f.ax = record.ax[j];
        f.ay = record.ay[j];
        f.az = record.az[j];
    }
}

#[test]
fn quiet_stream_raises_no_alert() {
    let counters = Counters::default();
    let alerts = detect(zeros(60.0), &mut detector(10.0), &counters).unwrap();
    assert!(alerts.is_empty());
    let stats = counters.snapshot();
    assert_eq!(stats.windows_classified, stats.windows_emitted);
    assert!(stats.windows_emitted > 100);
}

#[test]
fn embedded_fall_raises_exactly_one_alert() {
    for fall in held_out_falls() {
        let frames = synth::embed_in_zeros(&fall, 30.0, 10.0);
        let counters = Counters::default();
        let alerts = detect(frames, &mut detector(10.0), &counters).unwrap();
        assert_eq!(alerts.len(), 1, "{}: {alerts:?}", fall.id);
        let a = &alerts[0];
        // The alerting window overlaps the embedded record.
        assert!(
            a.window_start < 13_000.0 && a.window_end >= 10_000.0,
            "{a:?}"
        );
        assert_eq!(a.label, Label::Fall);
    }
}

#[test]
fn debounce_merges_close_falls_and_keeps_distant_ones() {
    let falls = held_out_falls();
    let mut frames = zeros(60.0);
    overlay(&mut frames, &falls[0], 10.0);
    overlay(&mut frames, &falls[1], 15.0);
    overlay(&mut frames, &falls[2], 40.0);
    let counters = Counters::default();
    let alerts = detect(frames.clone(), &mut detector(10.0), &counters).unwrap();
    assert_eq!(alerts.len(), 2, "{alerts:?}");
    assert!(alerts[1].window_start - alerts[0].window_start >= 10_000.0);
    assert!(counters.snapshot().alerts_suppressed > 0);

    let undebounced = detect(frames, &mut detector(0.0), &Counters::default()).unwrap();
    assert!(undebounced.len() > alerts.len());
}

#[test]
fn streaming_labels_match_offline_classification() {
    let falls = held_out_falls();
    let mut frames = zeros(40.0);
    overlay(&mut frames, &falls[0], 7.3);
    overlay(&mut frames, &falls[3], 25.0);
    let det = detector(10.0);
    let pipeline = FeaturePipeline::new(&det.bundle().features, SHAPE.len).unwrap();
    let mut windower = det.windower();
    let counters = Counters::default();
    let (len, stride) = det.policy().samples(SHAPE.fs);
    let mut checked = 0;
    for frame in frames.iter().copied() {
        let Some(w) = windower.push(frame, &counters) else {
            continue;
        };
        let first = w.id as usize * stride;
        let slice = &frames[first..first + len];
        let offline = Record::new(
            format!("offline-{}", w.id),
            slice.iter().map(|f| f.ax).collect(),
            slice.iter().map(|f| f.ay).collect(),
            slice.iter().map(|f| f.az).collect(),
            SHAPE.fs,
            "Quiet",
            Label::Adl,
        )
        .unwrap();
        let offline_features = pipeline.extract_values(&offline).unwrap();
        let streamed_features = pipeline
            .extract_values(&det.window_record(&w).unwrap())
            .unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<u64>>();
        assert_eq!(bits(&offline_features), bits(&streamed_features));
        let offline_label = det.bundle().model.predict(&offline_features).unwrap();
        let streamed = det.classify(&w).unwrap();
        assert_eq!(streamed.label, offline_label.label);
        assert_eq!(streamed.votes, offline_label.votes);
        checked += 1;
    }
    assert_eq!(checked, (frames.len() - len) / stride + 1);
}

#[test]
fn window_processing_fits_inside_the_stride() {
    let counters = Counters::default();
    let mut frames = zeros(30.0);
    overlay(&mut frames, &held_out_falls()[0], 10.0);
    detect(frames, &mut detector(10.0), &counters).unwrap();
    let stats = counters.snapshot();
    assert!(stats.max_latency_ms < 500.0, "{stats:?}");
    assert_eq!(stats.deadline_misses, 0);
}

fn ndjson(frames: &[Frame]) -> String {
    frames
        .iter()
        .map(|f| serde_json::to_string(f).unwrap() + "\n")
        .collect()
}

#[test]
fn served_stream_matches_in_process_detection() {
    let mut frames = zeros(40.0);
    overlay(&mut frames, &held_out_falls()[4], 12.0);
    let expected = detect(frames.clone(), &mut detector(10.0), &Counters::default()).unwrap();

    let mut input = ndjson(&frames);
    input.push_str("not json\n{\"t\": 1.0}\n");
    let policy = WindowPolicy {
        overflow: Overflow::Block,
        queue_capacity: 4,
        ..WindowPolicy::default()
    };
    let det = Detector::new(bundle(), policy).unwrap();
    let counters = Counters::default();
    let mut out = Vec::new();
    let stats = serve(
        Cursor::new(input),
        &mut out,
        det,
        &counters,
        &AtomicBool::new(false),
    )
    .unwrap();
    let served: Vec<fallkit::gateway::AlertEvent> = String::from_utf8(out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(served, expected);
    assert_eq!(stats.frames_invalid, 2);
    assert_eq!(stats.windows_dropped, 0);
    assert_eq!(stats.windows_classified, stats.windows_emitted);
}

#[test]
fn out_of_order_and_invalid_frames_are_dropped() {
    let mut frames = zeros(10.0);
    frames.swap(100, 101);
    frames[200].ax = f64::NAN;
    let counters = Counters::default();
    detect(frames, &mut detector(10.0), &counters).unwrap();
    let stats = counters.snapshot();
    assert_eq!(stats.frames_out_of_order, 1);
    assert_eq!(stats.frames_invalid, 1);
    assert_eq!(stats.frames_dropped(), 2);
}

#[test]
fn mismatched_window_or_rate_fails_at_startup() {
    let two_seconds = WindowPolicy {
        window: 2.0,
        ..WindowPolicy::default()
    };
    assert!(matches!(
        Detector::new(bundle(), two_seconds),
        Err(GatewayError::WindowMismatch { .. })
    ));
    assert!(matches!(
        Detector::with_stream_rate(bundle(), WindowPolicy::default(), 100.0),
        Err(GatewayError::RateMismatch { .. })
    ));
    let bad_stride = WindowPolicy {
        stride: 4.0,
        ..WindowPolicy::default()
    };
    assert!(matches!(
        Detector::new(bundle(), bad_stride),
        Err(GatewayError::Config(_))
    ));
}

#[test]
fn saved_bundle_keeps_its_identity() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.fkb");
    let b = bundle();
    b.save(&path).unwrap();
    let loaded = ModelBundle::load(&path).unwrap();
    assert_eq!(loaded.model_id(), b.model_id());
    assert_eq!(loaded.to_bytes(), b.to_bytes());
}
