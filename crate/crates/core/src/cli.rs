//! The `fallkit` command line.
//!
//! Exit codes: 0 success, 1 evaluation anomaly or runtime failure, 2 usage
//! or input error. Every flag can also be set through a `FALLKIT_*`
//! environment variable; the gateway additionally reads a TOML file.

use std::fs;
use std::io::{self, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::classifiers::{ClassifierKind, ModelBundle, NeighborParams, TrainingSet, VotingModel};
use crate::dataset::{Dataset, Label, SplitSpec};
use crate::eval::report::{render, render_timing};
use crate::eval::sweep::odd_values;
use crate::eval::{
    run_protocol, sweep_features, sweep_neighbors, table5_combinations, EvalConfig, EvalError,
    Format,
};
use crate::features::{FeatureConfig, FeaturePipeline, WaveletFamily, WaveletSpec};
use crate::gateway::{serve, Counters, Detector, Overflow, WindowPolicy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ANOMALY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or invalid input.
    Usage(String),
    /// The run finished but something is off (e.g. an undefined metric).
    Anomaly(String),
    /// Failure while running (I/O, model, gateway).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Anomaly(_) | CliError::Runtime(_) => EXIT_ANOMALY,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Anomaly(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Fold { .. } | EvalError::ThreadPool(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OutputFormat {
    Text,
    Csv,
    Json,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Format {
        match f {
            OutputFormat::Text => Format::Text,
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Json => Format::Json,
        }
    }
}

/// Fall detection from triaxial accelerometer records.
#[derive(Debug, Parser)]
#[command(name = "fallkit", version, about, propagate_version = true)]
pub struct Cli {
    /// Root seed; every split and subset derives its own stream from it.
    #[arg(long, global = true, env = "FALLKIT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for fold-level parallelism (timings are most stable at 1).
    #[arg(long, global = true, env = "FALLKIT_THREADS", default_value_t = 1)]
    pub threads: usize,
    /// Output format for reports written to stdout [default: text; csv for sweeps].
    #[arg(long, global = true, env = "FALLKIT_FORMAT", value_enum)]
    pub format: Option<OutputFormat>,
    /// Log level: error, warn, info, debug or trace.
    #[arg(long, global = true, env = "FALLKIT_LOG", default_value = "warn")]
    pub log_level: log::LevelFilter,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a canonical dataset file and print its summary.
    ConvertCheck(ConvertCheckArgs),
    /// Extract a feature matrix from a dataset.
    Extract(ExtractArgs),
    /// Run the cross-validation protocol and write a report.
    Eval(EvalArgs),
    /// Sweep neighbor counts or feature combinations.
    Sweep(SweepArgs),
    /// Train the voting model on a whole dataset and save a model bundle.
    Train(TrainArgs),
    /// Classify a live NDJSON sample stream and emit fall alerts.
    Gateway(GatewayArgs),
    /// Write a synthetic dataset (and optionally a replay stream) for demos.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SynthKind {
    /// Gravity-included walking, sitting, jumping and falls.
    Activities,
    /// Gravity-free quiet noise versus impact bursts.
    Impacts,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "activities")]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 200)]
    pub adl: usize,
    #[arg(long, default_value_t = 100)]
    pub fall: usize,
    /// Samples per axis.
    #[arg(long, default_value_t = 151)]
    pub len: usize,
    /// Sampling rate, Hz.
    #[arg(long, default_value_t = 50.0)]
    pub fs: f64,
    /// Canonical CSV destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write an NDJSON frame stream: zeros with one fresh fall record embedded.
    #[arg(long)]
    pub stream_out: Option<PathBuf>,
    /// Length of the stream, seconds.
    #[arg(long, default_value_t = 30.0)]
    pub stream_seconds: f64,
    /// Where the fall starts in the stream, seconds.
    #[arg(long, default_value_t = 10.0)]
    pub fall_at: f64,
}

#[derive(Debug, Args)]
pub struct ConvertCheckArgs {
    /// Canonical CSV dataset (a `<file>.json` sidecar is read when present).
    pub dataset: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FeatureArgs {
    /// Comma-separated extractors: cwt, svm, total_abs_svm, sma, range, se, raw.
    #[arg(long, env = "FALLKIT_FEATURES", default_value = "cwt,se,sma,svm")]
    pub features: String,
    /// Mother wavelet for the CWT.
    #[arg(long, env = "FALLKIT_WAVELET", default_value = "bior2.2")]
    pub wavelet: String,
    /// CWT scale.
    #[arg(long, env = "FALLKIT_SCALE", default_value_t = 250.0)]
    pub scale: f64,
    /// Wavelet table samples per unit argument.
    #[arg(long, env = "FALLKIT_RESOLUTION", default_value_t = 1024)]
    pub resolution: u32,
}

impl FeatureArgs {
    pub fn wavelet_spec(&self) -> Result<WaveletSpec, CliError> {
        let family: WaveletFamily = self.wavelet.parse().map_err(usage)?;
        let spec = WaveletSpec {
            family,
            scale: self.scale,
            tabulation_resolution: self.resolution,
        };
        spec.validate().map_err(usage)?;
        Ok(spec)
    }

    pub fn config(&self) -> Result<FeatureConfig, CliError> {
        FeatureConfig::parse(&self.features, self.wavelet_spec()?).map_err(usage)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    /// Number of Monte-Carlo folds.
    #[arg(long, env = "FALLKIT_FOLDS", default_value_t = 5)]
    pub folds: usize,
    /// Training fraction of each fold.
    #[arg(long, env = "FALLKIT_SPLIT", default_value_t = 0.7)]
    pub split: f64,
}

impl SplitArgs {
    fn spec(&self, seed: u64) -> Result<SplitSpec, CliError> {
        let spec = SplitSpec {
            train_fraction: self.split,
            folds: self.folds,
            seed,
        };
        spec.validate().map_err(usage)?;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    pub dataset: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
    /// Feature CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the binary feature cache here.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub dataset: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Evaluate KNN with this many neighbors.
    #[arg(long, value_name = "K")]
    pub knn: Option<usize>,
    /// Evaluate ENN with this many neighbors.
    #[arg(long, value_name = "E")]
    pub enn: Option<usize>,
    /// Evaluate the decision tree.
    #[arg(long)]
    pub bdt: bool,
    /// Evaluate the voting machine (KNN, ENN and BDT by 2-of-3 majority).
    #[arg(long)]
    pub vm: bool,
    /// Directory for report.{txt,csv,json} and timing.{txt,json}.
    #[arg(long, env = "FALLKIT_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(subcommand)]
    pub kind: SweepKind,
}

#[derive(Debug, Subcommand)]
pub enum SweepKind {
    /// KNN and ENN over odd neighbor counts 1, 3, ..., max.
    Neighbors(NeighborSweepArgs),
    /// All four classifiers over the seventeen feature combinations.
    Features(FeatureSweepArgs),
}

#[derive(Debug, Args)]
pub struct NeighborSweepArgs {
    pub dataset: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Largest neighbor count (odd values from 1 up to this are run).
    #[arg(long, default_value_t = 17)]
    pub max: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeatureSweepArgs {
    pub dataset: PathBuf,
    /// Mother wavelet for the CWT rows.
    #[arg(long, default_value = "bior2.2")]
    pub wavelet: String,
    #[arg(long, default_value_t = 250.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 1024)]
    pub resolution: u32,
    #[command(flatten)]
    pub split: SplitArgs,
    /// KNN neighbors.
    #[arg(long, default_value_t = 3)]
    pub knn: usize,
    /// ENN neighbors.
    #[arg(long, default_value_t = 3)]
    pub enn: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub dataset: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long, default_value_t = 5)]
    pub knn: usize,
    #[arg(long, default_value_t = 5)]
    pub enn: usize,
    /// Model bundle destination.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GatewayArgs {
    /// Model bundle written by `train`.
    #[arg(long, env = "FALLKIT_MODEL")]
    pub model: Option<PathBuf>,
    /// TOML file with any of: model, window, stride, debounce, listen, fs,
    /// queue_capacity, overflow. Flags and environment take precedence.
    #[arg(long, env = "FALLKIT_CONFIG")]
    pub config: Option<PathBuf>,
    /// Window length in seconds [default: the model's record length].
    #[arg(long, env = "FALLKIT_WINDOW")]
    pub window: Option<f64>,
    /// Seconds between window starts [default: 0.5].
    #[arg(long, env = "FALLKIT_STRIDE")]
    pub stride: Option<f64>,
    /// Minimum seconds between alerts [default: 10].
    #[arg(long, env = "FALLKIT_DEBOUNCE")]
    pub debounce: Option<f64>,
    /// Accept one TCP connection on this address instead of reading stdin.
    #[arg(long, env = "FALLKIT_LISTEN")]
    pub listen: Option<String>,
    /// Declared stream rate in Hz; must equal the model's.
    #[arg(long, env = "FALLKIT_FS")]
    pub fs: Option<f64>,
    /// Windows held for classification before the oldest are dropped [default: 256].
    #[arg(long, env = "FALLKIT_QUEUE")]
    pub queue_capacity: Option<usize>,
    /// Wait for the classifier instead of dropping windows (for recorded files).
    #[arg(long)]
    pub replay: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GatewayFile {
    model: Option<PathBuf>,
    window: Option<f64>,
    stride: Option<f64>,
    debounce: Option<f64>,
    listen: Option<String>,
    fs: Option<f64>,
    queue_capacity: Option<usize>,
    overflow: Option<Overflow>,
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .init();
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("fallkit: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::ConvertCheck(a) => cmd_convert_check(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Eval(a) => cmd_eval(cli, a),
        Command::Sweep(a) => cmd_sweep(cli, a),
        Command::Train(a) => cmd_train(a),
        Command::Gateway(a) => cmd_gateway(a),
        Command::Synth(a) => cmd_synth(cli, a),
    }
}

fn load(path: &Path) -> Result<Dataset, CliError> {
    Dataset::load_canonical(path).map_err(usage)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| runtime(format!("{}: {e}", p.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(runtime)
        }
    }
}

fn cmd_convert_check(a: &ConvertCheckArgs) -> Result<(), CliError> {
    let ds = load(&a.dataset)?;
    let counts = ds.class_counts();
    let mut activities: std::collections::BTreeMap<&str, (Label, usize)> = Default::default();
    for r in ds.records() {
        activities
            .entry(&r.activity_label)
            .or_insert((r.binary_label, 0))
            .1 += 1;
    }
    let mut out = String::new();
    out.push_str(&format!(
        "{}: {} records, {} samples per axis at {} Hz, ADL {}, FALL {}\n",
        a.dataset.display(),
        ds.len(),
        ds.expected_length(),
        crate::fmt_f64(ds.fs()),
        counts[0],
        counts[1]
    ));
    for (name, (label, n)) in activities {
        out.push_str(&format!("  {name:<24} {label:<4} {n}\n"));
    }
    if let Err(e) = ds.require_both_classes() {
        out.push_str(&format!("warning: {e}; evaluation needs both classes\n"));
    }
    write_output(None, &out)
}

fn cmd_extract(a: &ExtractArgs) -> Result<(), CliError> {
    if a.features.features.split(',').all(|s| s.trim().is_empty()) {
        return Err(CliError::Usage(
            "--features must name at least one extractor".into(),
        ));
    }
    let cfg = a.features.config()?;
    let ds = load(&a.dataset)?;
    let pipeline = FeaturePipeline::new(&cfg, ds.expected_length()).map_err(usage)?;
    let mut data = Vec::with_capacity(ds.len() * pipeline.vector_len());
    let mut times = Vec::with_capacity(ds.len());
    for r in ds.records() {
        let t = Instant::now();
        data.extend(pipeline.extract_values(r).map_err(runtime)?);
        times.push(t.elapsed().as_secs_f64() * 1e3);
    }
    let fm = crate::features::FeatureMatrix {
        ids: ds.records().iter().map(|r| r.id.clone()).collect(),
        matrix: crate::matrix::Matrix::new(ds.len(), pipeline.vector_len(), data),
        config_hash: cfg.digest(),
    };
    let mut csv_bytes = Vec::new();
    fm.write_csv(&mut csv_bytes).map_err(runtime)?;
    match &a.out {
        Some(p) => {
            fs::write(p, &csv_bytes).map_err(|e| runtime(format!("{}: {e}", p.display())))?
        }
        None => io::stdout().lock().write_all(&csv_bytes).map_err(runtime)?,
    }
    if let Some(p) = &a.cache {
        let f = fs::File::create(p).map_err(|e| runtime(format!("{}: {e}", p.display())))?;
        fm.write_cache(io::BufWriter::new(f)).map_err(runtime)?;
    }
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let (lo, hi) = times.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &t| {
        (lo.min(t), hi.max(t))
    });
    eprintln!(
        "extracted {} x {} features ({}); per record: mean {mean:.3} ms, min {lo:.3} ms, max {hi:.3} ms",
        fm.rows(),
        fm.cols(),
        cfg
    );
    Ok(())
}

fn eval_selection(a: &EvalArgs) -> (Vec<ClassifierKind>, NeighborParams) {
    let mut kinds = Vec::new();
    if a.knn.is_some() {
        kinds.push(ClassifierKind::Knn);
    }
    if a.enn.is_some() {
        kinds.push(ClassifierKind::Enn);
    }
    if a.bdt {
        kinds.push(ClassifierKind::Bdt);
    }
    if a.vm {
        kinds.push(ClassifierKind::Vm);
    }
    if kinds.is_empty() {
        kinds = ClassifierKind::ALL.to_vec();
    }
    let params = NeighborParams {
        k: a.knn.unwrap_or(NeighborParams::TUNED.k),
        e: a.enn.unwrap_or(NeighborParams::TUNED.e),
    };
    (kinds, params)
}

fn cmd_eval(cli: &Cli, a: &EvalArgs) -> Result<(), CliError> {
    let features = a.features.config()?;
    let split = a.split.spec(cli.seed)?;
    let (classifiers, params) = eval_selection(a);
    for (name, v) in [("--knn", params.k), ("--enn", params.e)] {
        if v == 0 || v % 2 == 0 {
            return Err(CliError::Usage(format!(
                "{name} must be a positive odd number, got {v}"
            )));
        }
    }
    let ds = load(&a.dataset)?;
    let cfg = EvalConfig {
        features,
        classifiers,
        params,
        split,
        threads: cli.threads,
    };
    let report = run_protocol(&ds, &cfg)?;
    let format: Format = cli.format.map_or(Format::Text, Into::into);
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
        for f in [Format::Text, Format::Csv, Format::Json] {
            write_output(
                Some(&dir.join(format!("report.{}", f.extension()))),
                &render(&report, f),
            )?;
        }
        for f in [Format::Text, Format::Json] {
            write_output(
                Some(&dir.join(format!("timing.{}", f.extension()))),
                &render_timing(&report, f),
            )?;
        }
    }
    write_output(None, &render(&report, format))?;
    eprint!("{}", render_timing(&report, Format::Text));
    if report.has_undefined_metric() {
        return Err(CliError::Anomaly(
            "at least one fold has an undefined metric (zero denominator); report written".into(),
        ));
    }
    Ok(())
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs) -> Result<(), CliError> {
    let format: Format = cli.format.map_or(Format::Csv, Into::into);
    let (table, out) = match &a.kind {
        SweepKind::Neighbors(n) => {
            if n.max == 0 {
                return Err(CliError::Usage("--max must be at least 1".into()));
            }
            let features = n.features.config()?;
            let split = n.split.spec(cli.seed)?;
            let ds = load(&n.dataset)?;
            (
                sweep_neighbors(&ds, &features, split, &odd_values(n.max), cli.threads)?,
                n.out.as_deref(),
            )
        }
        SweepKind::Features(f) => {
            let fa = FeatureArgs {
                features: "cwt".into(),
                wavelet: f.wavelet.clone(),
                scale: f.scale,
                resolution: f.resolution,
            };
            let combos = table5_combinations(fa.wavelet_spec()?);
            let split = f.split.spec(cli.seed)?;
            let ds = load(&f.dataset)?;
            let params = NeighborParams { k: f.knn, e: f.enn };
            (
                sweep_features(&ds, &combos, split, params, cli.threads)?,
                f.out.as_deref(),
            )
        }
    };
    write_output(out, &table.render(format))?;
    if table.has_undefined_metric() {
        return Err(CliError::Anomaly(
            "at least one fold has an undefined metric; table written".into(),
        ));
    }
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let features = a.features.config()?;
    let ds = load(&a.dataset)?;
    ds.require_both_classes().map_err(usage)?;
    let pipeline = FeaturePipeline::new(&features, ds.expected_length()).map_err(usage)?;
    let fm = pipeline.extract_dataset(&ds).map_err(runtime)?;
    let train = TrainingSet::new(fm.matrix, ds.labels()).map_err(runtime)?;
    let model = VotingModel::train(train, NeighborParams { k: a.knn, e: a.enn }).map_err(usage)?;
    let bundle = ModelBundle {
        features,
        record_len: ds.expected_length(),
        fs: ds.fs(),
        model,
    };
    bundle
        .save(&a.out)
        .map_err(|e| runtime(format!("{}: {e}", a.out.display())))?;
    println!(
        "model {} trained on {} records (L={}, fs={} Hz, {}), tree depth {}",
        bundle.model_id(),
        ds.len(),
        bundle.record_len,
        crate::fmt_f64(bundle.fs),
        bundle.features,
        bundle.model.bdt.depth()
    );
    Ok(())
}

fn cmd_gateway(a: &GatewayArgs) -> Result<(), CliError> {
    let file: GatewayFile = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => GatewayFile::default(),
    };
    let model_path =
        a.model.clone().or(file.model).ok_or_else(|| {
            CliError::Usage("--model is required (or `model` in --config)".into())
        })?;
    let bundle = ModelBundle::load(&model_path).map_err(usage)?;
    let defaults = WindowPolicy::default();
    let policy = WindowPolicy {
        window: a
            .window
            .or(file.window)
            .unwrap_or(bundle.record_len as f64 / bundle.fs),
        stride: a.stride.or(file.stride).unwrap_or(defaults.stride),
        debounce: a.debounce.or(file.debounce).unwrap_or(defaults.debounce),
        queue_capacity: a
            .queue_capacity
            .or(file.queue_capacity)
            .unwrap_or(defaults.queue_capacity),
        overflow: if a.replay {
            Overflow::Block
        } else {
            file.overflow.unwrap_or_default()
        },
    };
    let detector = match a.fs.or(file.fs) {
        Some(fs) => Detector::with_stream_rate(bundle, policy, fs),
        None => Detector::new(bundle, policy),
    }
    .map_err(usage)?;
    let (len, stride) = policy.samples(detector.bundle().fs);
    let listen = a.listen.clone().or(file.listen);

    let counters = Arc::new(Counters::default());
    let stop = AtomicBool::new(false);
    {
        let counters = counters.clone();
        let _ = ctrlc::set_handler(move || {
            let stats = serde_json::to_string(&counters.snapshot()).expect("stats serialize");
            eprintln!("fallkit gateway: interrupted; counters {stats}");
            std::process::exit(130);
        });
    }

    let banner = |source: &str| {
        eprintln!(
            "fallkit gateway: model {} ({}), L={len} samples ({} s at {} Hz), stride {stride} samples, debounce {} s, queue {} ({}), reading {source}",
            detector.model_id(),
            detector.bundle().features,
            crate::fmt_f64(policy.window),
            crate::fmt_f64(detector.bundle().fs),
            crate::fmt_f64(policy.debounce),
            policy.queue_capacity,
            match policy.overflow {
                Overflow::DropOldest => "drop oldest",
                Overflow::Block => "block",
            }
        )
    };
    let stats = match listen {
        Some(addr) => {
            let listener = TcpListener::bind(&addr).map_err(|e| usage(format!("{addr}: {e}")))?;
            let local = listener.local_addr().map_err(runtime)?;
            banner(&format!("tcp {local}"));
            let (stream, peer) = listener.accept().map_err(runtime)?;
            log::info!("accepted {peer}");
            serve(
                BufReader::new(stream),
                io::stdout().lock(),
                detector,
                &counters,
                &stop,
            )
        }
        None => {
            banner("stdin");
            serve(
                BufReader::new(io::stdin()),
                io::stdout().lock(),
                detector,
                &counters,
                &stop,
            )
        }
    }
    .map_err(runtime)?;
    eprintln!(
        "fallkit gateway: done; counters {}",
        serde_json::to_string(&stats).expect("stats serialize")
    );
    Ok(())
}

fn cmd_synth(cli: &Cli, a: &SynthArgs) -> Result<(), CliError> {
    use crate::synth;
    if a.len < 2 || !(a.fs.is_finite() && a.fs > 0.0) {
        return Err(CliError::Usage(
            "--len must be at least 2 and --fs positive".into(),
        ));
    }
    if a.adl + a.fall == 0 {
        return Err(CliError::Usage(
            "--adl and --fall cannot both be zero".into(),
        ));
    }
    let shape = synth::Shape {
        len: a.len,
        fs: a.fs,
    };
    let make = |n_adl, n_fall, seed| match a.kind {
        SynthKind::Activities => synth::dataset(n_adl, n_fall, shape, seed),
        SynthKind::Impacts => synth::impact_dataset(n_adl, n_fall, shape, seed),
    };
    let ds = make(a.adl, a.fall, cli.seed);
    ds.save_canonical(&a.out).map_err(runtime)?;
    eprintln!("wrote {} records to {}", ds.len(), a.out.display());
    if let Some(path) = &a.stream_out {
        // A record the dataset does not contain, so replay is not a lookup.
        let held_out = make(0, 1, crate::rng::derive_seed(cli.seed, "synth-stream", 0));
        let frames = synth::embed_in_zeros(&held_out.records()[0], a.stream_seconds, a.fall_at);
        let mut text = String::new();
        for f in &frames {
            text.push_str(&serde_json::to_string(f).expect("frame serializes"));
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        eprintln!("wrote {} frames to {}", frames.len(), path.display());
    }
    Ok(())
}
