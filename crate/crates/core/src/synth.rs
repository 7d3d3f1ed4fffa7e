//! Synthetic accelerometer records for tests, examples and demos.
//!
//! The generators are crude physical caricatures in m/s²: an upright body
//! sees gravity on the `y` axis; a fall is a short free-fall dip, an impact
//! spike and a lying posture with gravity moved to `x` or `z`; daily
//! activities are walking, sitting down, standing still and jumping. They are
//! meant to exercise the pipeline, not to stand in for real recordings.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Dataset, Label, Record};
use crate::gateway::Frame;
use crate::matrix::Matrix;
use crate::rng;

pub const GRAVITY: f64 = 9.81;

/// Sample count and rate of the generated records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shape {
    pub len: usize,
    pub fs: f64,
}

impl Default for Shape {
    /// 151 samples at 50 Hz, about three seconds.
    fn default() -> Self {
        Shape { len: 151, fs: 50.0 }
    }
}

fn noise(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    Normal::new(0.0, sigma).expect("positive sigma").sample(rng)
}

struct Axes {
    ax: Vec<f64>,
    ay: Vec<f64>,
    az: Vec<f64>,
}

impl Axes {
    fn upright(len: usize) -> Self {
        Axes {
            ax: vec![0.0; len],
            ay: vec![GRAVITY; len],
            az: vec![0.0; len],
        }
    }

    fn add_noise(&mut self, rng: &mut ChaCha8Rng, sigma: f64) {
        for axis in [&mut self.ax, &mut self.ay, &mut self.az] {
            for v in axis.iter_mut() {
                *v += noise(rng, sigma);
            }
        }
    }
}

/// A fall: upright, free fall, impact, then lying still.
pub fn fall(id: impl Into<String>, shape: Shape, rng: &mut ChaCha8Rng) -> Record {
    let n = shape.len;
    let mut a = Axes::upright(n);
    let onset = rng.gen_range(n / 4..=n / 2);
    let free_fall = ((rng.gen_range(0.2..0.4) * shape.fs) as usize).max(1);
    let impact_at = (onset + free_fall).min(n - 1);
    let impact_len = ((0.1 * shape.fs) as usize).max(1);
    let peak = rng.gen_range(20.0..35.0);
    let lying_axis = rng.gen_range(0..2);
    let lying_sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    for t in onset..n {
        if t < impact_at {
            // Gravity fades toward weightlessness.
            let f = 1.0 - (t - onset + 1) as f64 / free_fall as f64;
            a.ay[t] = GRAVITY * f.max(0.15);
        } else if t < impact_at + impact_len {
            let k = (t - impact_at) as f64 / impact_len as f64;
            let spike = peak * (std::f64::consts::PI * k).sin().max(0.3);
            a.ax[t] = spike * 0.6 * lying_sign;
            a.ay[t] = spike * 0.7;
            a.az[t] = spike * 0.4;
        } else {
            a.ay[t] = 0.0;
            if lying_axis == 0 {
                a.ax[t] = GRAVITY * lying_sign;
            } else {
                a.az[t] = GRAVITY * lying_sign;
            }
        }
    }
    a.add_noise(rng, 0.35);
    Record::new(id, a.ax, a.ay, a.az, shape.fs, "SyntheticFall", Label::Fall)
        .expect("finite synthetic record")
}

/// A daily activity: walking, sitting down, standing or jumping.
pub fn adl(id: impl Into<String>, shape: Shape, rng: &mut ChaCha8Rng) -> Record {
    let n = shape.len;
    let mut a = Axes::upright(n);
    let kind = rng.gen_range(0..4);
    let activity = match kind {
        0 => {
            let freq = rng.gen_range(1.6..2.2);
            let amp = rng.gen_range(1.5..3.5);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            for t in 0..n {
                let w = std::f64::consts::TAU * freq * t as f64 / shape.fs + phase;
                a.ay[t] += amp * w.sin();
                a.az[t] += 0.5 * amp * (2.0 * w).cos();
            }
            "Walking"
        }
        1 => {
            let start = rng.gen_range(n / 5..n / 2);
            let dur = (rng.gen_range(0.8..1.4) * shape.fs) as usize;
            let tilt = rng.gen_range(0.3..0.6);
            for t in start..n {
                let k = ((t - start) as f64 / dur as f64).min(1.0);
                let angle = tilt * k;
                a.ay[t] = GRAVITY * angle.cos();
                a.az[t] = GRAVITY * angle.sin();
                if t < start + dur {
                    a.ay[t] -= 2.0 * (std::f64::consts::PI * k).sin();
                }
            }
            "SittingDown"
        }
        2 => "Standing",
        _ => {
            let at = rng.gen_range(n / 4..n / 2);
            let flight = (0.25 * shape.fs) as usize;
            for t in at..(at + flight).min(n) {
                a.ay[t] = 1.0;
            }
            let land = (at + flight).min(n - 1);
            for t in land..(land + (0.08 * shape.fs) as usize).min(n) {
                a.ay[t] = rng.gen_range(18.0..24.0);
            }
            "Jumping"
        }
    };
    a.add_noise(rng, 0.35);
    Record::new(id, a.ax, a.ay, a.az, shape.fs, activity, Label::Adl)
        .expect("finite synthetic record")
}

/// `n_adl` daily activities followed by `n_fall` falls, interleaved in a
/// seeded order.
pub fn dataset(n_adl: usize, n_fall: usize, shape: Shape, seed: u64) -> Dataset {
    let mut rng = rng::stream(seed, "synth-records", 0);
    let mut kinds: Vec<Label> = std::iter::repeat_n(Label::Adl, n_adl)
        .chain(std::iter::repeat_n(Label::Fall, n_fall))
        .collect();
    use rand::seq::SliceRandom;
    kinds.shuffle(&mut rng);
    let records = kinds
        .iter()
        .enumerate()
        .map(|(i, label)| match label {
            Label::Adl => adl(format!("adl-{i:05}"), shape, &mut rng),
            Label::Fall => fall(format!("fall-{i:05}"), shape, &mut rng),
        })
        .collect();
    Dataset::new("synthetic", records).expect("non-empty synthetic dataset")
}

/// Two isotropic Gaussian blobs in `dim` dimensions, centered at the origin
/// and at `separation` along every axis. Half the points (rounded down) are ADL.
pub fn gaussian_blobs(
    n: usize,
    dim: usize,
    separation: f64,
    sigma: f64,
    seed: u64,
) -> (Matrix, Vec<Label>) {
    let mut rng = rng::stream(seed, "synth-blobs", 0);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i < n / 2 { Label::Adl } else { Label::Fall };
        let center = if label == Label::Fall {
            separation
        } else {
            0.0
        };
        rows.push(
            (0..dim)
                .map(|_| center + noise(&mut rng, sigma))
                .collect::<Vec<f64>>(),
        );
        labels.push(label);
    }
    (Matrix::from_rows(&rows), labels)
}

/// Records whose three axes are constant offsets drawn from two Gaussian
/// blobs; every extractor maps them to well-separated feature vectors.
pub fn blob_dataset(n: usize, separation: f64, sigma: f64, shape: Shape, seed: u64) -> Dataset {
    let (points, labels) = gaussian_blobs(n, 3, separation, sigma, seed);
    let records = points
        .iter_rows()
        .zip(labels)
        .enumerate()
        .map(|(i, (p, label))| {
            Record::new(
                format!("blob-{i:04}"),
                vec![p[0]; shape.len],
                vec![p[1]; shape.len],
                vec![p[2]; shape.len],
                shape.fs,
                label.as_str(),
                label,
            )
            .expect("finite blob record")
        })
        .collect();
    Dataset::new("blobs", records).expect("non-empty blob dataset")
}

/// Gravity-free records: ADL is low-level sensor noise with a slow sway,
/// FALL adds one impact burst at a random position. Zero signal sits
/// squarely in the ADL class, which makes these records convenient for
/// exercising the gateway on quiet streams.
pub fn impact_dataset(n_adl: usize, n_fall: usize, shape: Shape, seed: u64) -> Dataset {
    let mut rng = rng::stream(seed, "synth-impacts", 0);
    let n = shape.len;
    let mut records = Vec::with_capacity(n_adl + n_fall);
    for i in 0..n_adl + n_fall {
        let label = if i < n_adl { Label::Adl } else { Label::Fall };
        let sigma = rng.gen_range(0.02..0.3);
        let sway = rng.gen_range(0.0..0.8);
        let freq = rng.gen_range(0.2..1.0);
        let mut a = Axes {
            ax: vec![0.0; n],
            ay: (0..n)
                .map(|t| sway * (std::f64::consts::TAU * freq * t as f64 / shape.fs).sin())
                .collect(),
            az: vec![0.0; n],
        };
        if label == Label::Fall {
            let at = rng.gen_range(0..n.saturating_sub(8).max(1));
            let peak = rng.gen_range(15.0..30.0);
            let dir = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            for k in 0..8.min(n - at) {
                let amp = peak * (std::f64::consts::PI * (k as f64 + 0.5) / 8.0).sin();
                a.ax[at + k] += amp * dir[0];
                a.ay[at + k] += amp * dir[1];
                a.az[at + k] += amp * dir[2];
            }
        }
        a.add_noise(&mut rng, sigma);
        let (name, id) = match label {
            Label::Adl => ("Quiet", format!("quiet-{i:05}")),
            Label::Fall => ("ImpactFall", format!("impact-{i:05}")),
        };
        records.push(
            Record::new(id, a.ax, a.ay, a.az, shape.fs, name, label)
                .expect("finite synthetic record"),
        );
    }
    Dataset::new("impacts", records).expect("non-empty synthetic dataset")
}

/// A stream of `seconds` of all-zero samples at `fs` Hz with `record`
/// written in starting at `at_seconds`. Timestamps are in milliseconds.
pub fn embed_in_zeros(record: &Record, seconds: f64, at_seconds: f64) -> Vec<Frame> {
    let fs = record.fs;
    let total = (seconds * fs).round() as usize;
    let offset = (at_seconds * fs).round() as usize;
    (0..total)
        .map(|i| {
            let (ax, ay, az) = match i.checked_sub(offset) {
                Some(j) if j < record.len() => (record.ax[j], record.ay[j], record.az[j]),
                _ => (0.0, 0.0, 0.0),
            };
            Frame {
                t: i as f64 * 1000.0 / fs,
                ax,
                ay,
                az,
            }
        })
        .collect()
}
