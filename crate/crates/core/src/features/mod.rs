//! Per-record feature extractors and configurable feature vectors.
//!
//! Extractors are concatenated in a fixed order:
//! `RAW ‖ CWT ‖ SVM ‖ TOTAL_ABS_SVM ‖ SMA ‖ RANGE ‖ SE`.
//! `RAW` (the flattened axes) only exists to reproduce the raw-data baseline
//! row of the feature sweep. No normalization is applied anywhere.

pub mod export;
pub mod wavelet;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{Dataset, Record};
use crate::matrix::Matrix;

pub use export::FeatureMatrix;
pub use wavelet::{WaveletFamily, WaveletSpec, WaveletTable};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("input signal is empty")]
    EmptyInput,
    #[error("feature configuration enables no extractor")]
    EmptyConfig,
    #[error("record `{id}` has {found} samples, extractor was set up for {expected}")]
    LengthMismatch {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid wavelet: {0}")]
    InvalidWavelet(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("non-finite feature value in record `{0}`")]
    NonFinite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Extractor {
    Raw,
    Cwt,
    Svm,
    TotalAbsSvm,
    Sma,
    Range,
    Se,
}

impl Extractor {
    /// The six engineered extractors, in concatenation order.
    pub const ENGINEERED: [Extractor; 6] = [
        Extractor::Cwt,
        Extractor::Svm,
        Extractor::TotalAbsSvm,
        Extractor::Sma,
        Extractor::Range,
        Extractor::Se,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Extractor::Raw => "raw",
            Extractor::Cwt => "cwt",
            Extractor::Svm => "svm",
            Extractor::TotalAbsSvm => "total_abs_svm",
            Extractor::Sma => "sma",
            Extractor::Range => "range",
            Extractor::Se => "se",
        }
    }

    /// Number of values this extractor contributes for records of `len` samples.
    pub fn output_len(self, len: usize) -> usize {
        match self {
            Extractor::Raw | Extractor::Cwt => 3 * len,
            Extractor::Svm => len,
            Extractor::TotalAbsSvm | Extractor::Sma => 1,
            Extractor::Range | Extractor::Se => 3,
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Extractor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Extractor {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(Extractor::Raw),
            "cwt" => Ok(Extractor::Cwt),
            "svm" => Ok(Extractor::Svm),
            "total_abs_svm" | "total-abs-svm" | "total_svm" | "totalsvm" => {
                Ok(Extractor::TotalAbsSvm)
            }
            "sma" => Ok(Extractor::Sma),
            "range" | "ranges" => Ok(Extractor::Range),
            "se" | "energy" => Ok(Extractor::Se),
            other => Err(FeatureError::UnknownFeature(other.to_string())),
        }
    }
}

/// Which extractors run, plus the wavelet used by CWT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    enabled: Vec<Extractor>,
    pub wavelet: WaveletSpec,
}

impl FeatureConfig {
    pub fn new(
        extractors: impl IntoIterator<Item = Extractor>,
        wavelet: WaveletSpec,
    ) -> Result<Self, FeatureError> {
        let mut enabled: Vec<Extractor> = extractors.into_iter().collect();
        enabled.sort_unstable();
        enabled.dedup();
        if enabled.is_empty() {
            return Err(FeatureError::EmptyConfig);
        }
        wavelet.validate().map_err(FeatureError::InvalidWavelet)?;
        Ok(FeatureConfig { enabled, wavelet })
    }

    /// Parses a comma-separated list such as `cwt,se,sma,svm`.
    pub fn parse(list: &str, wavelet: WaveletSpec) -> Result<Self, FeatureError> {
        let extractors = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Extractor>, _>>()?;
        FeatureConfig::new(extractors, wavelet)
    }

    /// `{CWT, SE, SMA, SVM}` with the default bior2.2 wavelet at scale 250.
    pub fn best() -> Self {
        FeatureConfig::new(
            [
                Extractor::Cwt,
                Extractor::Se,
                Extractor::Sma,
                Extractor::Svm,
            ],
            WaveletSpec::default(),
        )
        .expect("static config")
    }

    /// All six engineered extractors.
    pub fn all() -> Self {
        FeatureConfig::new(Extractor::ENGINEERED, WaveletSpec::default()).expect("static config")
    }

    pub fn enabled(&self) -> &[Extractor] {
        &self.enabled
    }

    pub fn contains(&self, e: Extractor) -> bool {
        self.enabled.contains(&e)
    }

    pub fn vector_len(&self, record_len: usize) -> usize {
        self.enabled.iter().map(|e| e.output_len(record_len)).sum()
    }

    /// Canonical comma list, e.g. `cwt,svm,sma,se`.
    pub fn names(&self) -> String {
        self.enabled
            .iter()
            .map(|e| e.name())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        out.push(self.enabled.iter().fold(0u8, |m, e| m | e.bit()));
        self.wavelet.encode(out);
    }

    pub(crate) fn decode(mask: u8, wavelet: WaveletSpec) -> Result<Self, FeatureError> {
        let all = [
            Extractor::Raw,
            Extractor::Cwt,
            Extractor::Svm,
            Extractor::TotalAbsSvm,
            Extractor::Sma,
            Extractor::Range,
            Extractor::Se,
        ];
        FeatureConfig::new(all.into_iter().filter(|e| mask & e.bit() != 0), wavelet)
    }

    /// Hex SHA-256 of the configuration's byte encoding.
    pub fn digest(&self) -> String {
        let mut bytes = Vec::new();
        self.encode(&mut bytes);
        hex::encode(Sha256::digest(&bytes))
    }
}

impl fmt::Display for FeatureConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.names())?;
        if self.contains(Extractor::Cwt) {
            write!(
                f,
                " ({} @ scale {})",
                self.wavelet.family, self.wavelet.scale
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub config_hash: String,
    pub record_id: String,
}

/// Single-scale CWT: `out[b] = a^(-1/2) Σ_t x[t] ψ((t - b) / a)` for
/// `b = 0..L`, zero outside the record.
pub fn cwt_single_scale(x: &[f64], spec: &WaveletSpec) -> Result<Vec<f64>, FeatureError> {
    spec.validate().map_err(FeatureError::InvalidWavelet)?;
    if x.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    let table = WaveletTable::shared(spec.family, spec.tabulation_resolution);
    let kernel = cwt_kernel(&table, spec.scale, x.len());
    let mut out = vec![0.0; x.len()];
    cwt_with_kernel(x, &kernel, &mut out);
    Ok(out)
}

/// `kernel[d + L - 1] = ψ(d / a) / sqrt(a)` for `d = t - b` in `-(L-1)..=L-1`.
fn cwt_kernel(table: &WaveletTable, scale: f64, len: usize) -> Vec<f64> {
    let norm = 1.0 / scale.sqrt();
    (0..2 * len - 1)
        .map(|i| {
            let d = i as f64 - (len - 1) as f64;
            norm * table.eval(d / scale)
        })
        .collect()
}

fn cwt_with_kernel(x: &[f64], kernel: &[f64], out: &mut [f64]) {
    let len = x.len();
    for (b, slot) in out.iter_mut().enumerate() {
        // kernel index for (t, b) is t - b + len - 1
        let k = &kernel[len - 1 - b..2 * len - 1 - b];
        *slot = x.iter().zip(k).map(|(xv, kv)| xv * kv).sum();
    }
}

/// Per-sample vector magnitude `sqrt(ax² + ay² + az²)`, in sample order.
pub fn svm_series(r: &Record) -> Vec<f64> {
    r.ax.iter()
        .zip(&r.ay)
        .zip(&r.az)
        .map(|((x, y), z)| (x * x + y * y + z * z).sqrt())
        .collect()
}

/// Sum of all per-sample magnitudes.
pub fn total_abs_svm(r: &Record) -> f64 {
    svm_series(r).iter().map(|v| v.abs()).sum()
}

/// Signal magnitude area: `Σ (|ax| + |ay| + |az|)`.
pub fn sma(r: &Record) -> f64 {
    r.ax.iter()
        .zip(&r.ay)
        .zip(&r.az)
        .map(|((x, y), z)| x.abs() + y.abs() + z.abs())
        .sum()
}

/// Per-axis `max - min`.
pub fn axis_ranges(r: &Record) -> [f64; 3] {
    r.axes().map(|axis| {
        let (lo, hi) = axis
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        hi - lo
    })
}

/// Per-axis `Σ_k |FFT(axis)[k]|²` over the full unnormalized spectrum.
pub fn signal_energy(r: &Record) -> [f64; 3] {
    let fft = FftPlanner::<f64>::new().plan_fft_forward(r.len());
    r.axes().map(|axis| spectrum_energy(fft.as_ref(), axis))
}

fn spectrum_energy(fft: &dyn Fft<f64>, axis: &[f64]) -> f64 {
    let mut buf: Vec<Complex<f64>> = axis.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);
    buf.iter().map(|c| c.norm_sqr()).sum()
}

/// A prepared extractor for one config and one record length. Holds the CWT
/// kernel and FFT plan, and can be shared across threads.
pub struct FeaturePipeline {
    config: FeatureConfig,
    config_hash: String,
    record_len: usize,
    kernel: Option<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FeaturePipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeaturePipeline")
            .field("config", &self.config)
            .field("record_len", &self.record_len)
            .finish()
    }
}

impl FeaturePipeline {
    pub fn new(config: &FeatureConfig, record_len: usize) -> Result<Self, FeatureError> {
        if record_len == 0 {
            return Err(FeatureError::EmptyInput);
        }
        config
            .wavelet
            .validate()
            .map_err(FeatureError::InvalidWavelet)?;
        let kernel = config.contains(Extractor::Cwt).then(|| {
            let table =
                WaveletTable::shared(config.wavelet.family, config.wavelet.tabulation_resolution);
            cwt_kernel(&table, config.wavelet.scale, record_len)
        });
        Ok(FeaturePipeline {
            config: config.clone(),
            config_hash: config.digest(),
            record_len,
            kernel,
            fft: FftPlanner::<f64>::new().plan_fft_forward(record_len),
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn record_len(&self) -> usize {
        self.record_len
    }

    pub fn vector_len(&self) -> usize {
        self.config.vector_len(self.record_len)
    }

    /// Feature values for one record, in concatenation order.
    pub fn extract_values(&self, r: &Record) -> Result<Vec<f64>, FeatureError> {
        if r.len() != self.record_len {
            return Err(FeatureError::LengthMismatch {
                id: r.id.clone(),
                expected: self.record_len,
                found: r.len(),
            });
        }
        let mut out = Vec::with_capacity(self.vector_len());
        let mut svm: Option<Vec<f64>> = None;
        for &e in &self.config.enabled {
            match e {
                Extractor::Raw => {
                    for axis in r.axes() {
                        out.extend_from_slice(axis);
                    }
                }
                Extractor::Cwt => {
                    let kernel = self.kernel.as_ref().expect("kernel built with CWT enabled");
                    for axis in r.axes() {
                        let start = out.len();
                        out.resize(start + self.record_len, 0.0);
                        cwt_with_kernel(axis, kernel, &mut out[start..]);
                    }
                }
                Extractor::Svm => out.extend_from_slice(svm.get_or_insert_with(|| svm_series(r))),
                Extractor::TotalAbsSvm => {
                    let s = svm.get_or_insert_with(|| svm_series(r));
                    out.push(s.iter().map(|v| v.abs()).sum());
                }
                Extractor::Sma => out.push(sma(r)),
                Extractor::Range => out.extend_from_slice(&axis_ranges(r)),
                Extractor::Se => {
                    for axis in r.axes() {
                        out.push(spectrum_energy(self.fft.as_ref(), axis));
                    }
                }
            }
        }
        debug_assert_eq!(out.len(), self.vector_len());
        if out.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(r.id.clone()));
        }
        Ok(out)
    }

    pub fn extract(&self, r: &Record) -> Result<FeatureVector, FeatureError> {
        Ok(FeatureVector {
            values: self.extract_values(r)?,
            config_hash: self.config_hash.clone(),
            record_id: r.id.clone(),
        })
    }

    /// Features for every record of `ds`, one row each.
    pub fn extract_dataset(&self, ds: &Dataset) -> Result<FeatureMatrix, FeatureError> {
        let mut data = Vec::with_capacity(ds.len() * self.vector_len());
        for r in ds.records() {
            data.extend(self.extract_values(r)?);
        }
        Ok(FeatureMatrix {
            ids: ds.records().iter().map(|r| r.id.clone()).collect(),
            matrix: Matrix::new(ds.len(), self.vector_len(), data),
            config_hash: self.config_hash.clone(),
        })
    }
}

/// Builds the feature vector of one record under `cfg`.
pub fn assemble(r: &Record, cfg: &FeatureConfig) -> Result<FeatureVector, FeatureError> {
    FeaturePipeline::new(cfg, r.len())?.extract(r)
}
