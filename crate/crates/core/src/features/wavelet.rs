//! Mother wavelet tabulation.
//!
//! Wavelets without a closed form are sampled with the cascade algorithm:
//! the impulse response of one detail coefficient pushed back through `J`
//! synthesis stages, scaled by `2^(J/2)`. Entry `m` approximates `ψ(m / 2^J)`.
//! The Meyer wavelet is defined in frequency and is tabulated by quadrature.
//!
//! For the biorthogonal family the *analysis* (decomposition) wavelet is used.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WaveletFamily {
    #[serde(rename = "bior2.2")]
    Bior22,
    #[serde(rename = "haar")]
    Haar,
    #[serde(rename = "db1")]
    Db1,
    #[serde(rename = "db2")]
    Db2,
    #[serde(rename = "db3")]
    Db3,
    #[serde(rename = "sym1")]
    Sym1,
    #[serde(rename = "sym2")]
    Sym2,
    #[serde(rename = "sym3")]
    Sym3,
    #[serde(rename = "meyer")]
    Meyer,
}

impl WaveletFamily {
    pub const ALL: [WaveletFamily; 9] = [
        WaveletFamily::Bior22,
        WaveletFamily::Haar,
        WaveletFamily::Db1,
        WaveletFamily::Db2,
        WaveletFamily::Db3,
        WaveletFamily::Sym1,
        WaveletFamily::Sym2,
        WaveletFamily::Sym3,
        WaveletFamily::Meyer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WaveletFamily::Bior22 => "bior2.2",
            WaveletFamily::Haar => "haar",
            WaveletFamily::Db1 => "db1",
            WaveletFamily::Db2 => "db2",
            WaveletFamily::Db3 => "db3",
            WaveletFamily::Sym1 => "sym1",
            WaveletFamily::Sym2 => "sym2",
            WaveletFamily::Sym3 => "sym3",
            WaveletFamily::Meyer => "meyer",
        }
    }

    fn code(self) -> u8 {
        Self::ALL.iter().position(|&f| f == self).unwrap() as u8
    }

    pub(crate) fn from_code(code: u8) -> Option<WaveletFamily> {
        Self::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for WaveletFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WaveletFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|f| f.name() == lower)
            .ok_or_else(|| format!("unknown wavelet family `{s}`"))
    }
}

/// Mother wavelet, scale `a` and tabulation density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveletSpec {
    pub family: WaveletFamily,
    pub scale: f64,
    /// Table samples per unit of the wavelet's argument.
    pub tabulation_resolution: u32,
}

impl Default for WaveletSpec {
    fn default() -> Self {
        WaveletSpec {
            family: WaveletFamily::Bior22,
            scale: 250.0,
            tabulation_resolution: 1024,
        }
    }
}

impl WaveletSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.scale.is_finite() && self.scale >= 1.0) {
            return Err(format!("wavelet scale must be >= 1, got {}", self.scale));
        }
        if self.tabulation_resolution < 2 {
            return Err("tabulation resolution must be at least 2 samples per unit".into());
        }
        Ok(())
    }

    /// Stable byte encoding, used for config digests and model files.
    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        out.push(self.family.code());
        out.extend_from_slice(&self.scale.to_le_bytes());
        out.extend_from_slice(&self.tabulation_resolution.to_le_bytes());
    }
}

/// Sampled `ψ` on a uniform grid starting at `start`.
#[derive(Debug, Clone)]
pub struct WaveletTable {
    pub family: WaveletFamily,
    start: f64,
    step: f64,
    values: Vec<f64>,
}

impl WaveletTable {
    /// Tabulates `family` with at least `resolution` samples per unit.
    pub fn build(family: WaveletFamily, resolution: u32) -> WaveletTable {
        match family {
            WaveletFamily::Meyer => meyer_table(resolution),
            _ => {
                let (lo, hi, sign) = synthesis_filters(family);
                // At least 2^10 samples per unit.
                let levels = (resolution.max(2) as f64).log2().ceil().max(10.0) as u32;
                let mut values = cascade(&lo, &hi, levels);
                if sign < 0.0 {
                    values.iter_mut().for_each(|v| *v = -*v);
                }
                WaveletTable {
                    family,
                    start: 0.0,
                    step: 1.0 / f64::from(1u32 << levels),
                    values,
                }
            }
        }
    }

    /// Shared table for `(family, resolution)`; built once per process.
    pub fn shared(family: WaveletFamily, resolution: u32) -> Arc<WaveletTable> {
        static CACHE: OnceLock<Mutex<HashMap<(WaveletFamily, u32), Arc<WaveletTable>>>> =
            OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().unwrap_or_else(|p| p.into_inner());
        guard
            .entry((family, resolution))
            .or_insert_with(|| Arc::new(WaveletTable::build(family, resolution)))
            .clone()
    }

    /// `[first, last]` grid points.
    pub fn support(&self) -> (f64, f64) {
        (
            self.start,
            self.start + self.step * (self.values.len() - 1) as f64,
        )
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn samples(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation; zero outside the tabulated support.
    pub fn eval(&self, x: f64) -> f64 {
        let pos = (x - self.start) / self.step;
        if !(pos >= 0.0) {
            return 0.0;
        }
        let i = pos.floor() as usize;
        let last = self.values.len() - 1;
        if i > last {
            return 0.0;
        }
        let frac = pos - i as f64;
        if i == last || frac == 0.0 {
            return if frac == 0.0 { self.values[i] } else { 0.0 };
        }
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}

/// `(lowpass, highpass, sign)` synthesis filters whose cascade yields the
/// wavelet used for analysis.
fn synthesis_filters(family: WaveletFamily) -> (Vec<f64>, Vec<f64>, f64) {
    const DB2: [f64; 4] = [
        0.482_962_913_144_690_25,
        0.836_516_303_737_469,
        0.224_143_868_041_857_35,
        -0.129_409_522_550_921_45,
    ];
    const DB3: [f64; 6] = [
        0.332_670_552_950_956_9,
        0.806_891_509_313_338_8,
        0.459_877_502_119_331_3,
        -0.135_011_020_010_390_84,
        -0.085_441_273_882_241_49,
        0.035_226_291_882_100_656,
    ];
    match family {
        WaveletFamily::Haar | WaveletFamily::Db1 | WaveletFamily::Sym1 => {
            let lo = vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2];
            let hi = quadrature_mirror(&lo);
            (lo, hi, 1.0)
        }
        WaveletFamily::Db2 | WaveletFamily::Sym2 => (DB2.to_vec(), quadrature_mirror(&DB2), 1.0),
        WaveletFamily::Db3 | WaveletFamily::Sym3 => (DB3.to_vec(), quadrature_mirror(&DB3), 1.0),
        WaveletFamily::Bior22 => {
            // Analysis filters of the (2,2) spline pair, reversed to run as a synthesis bank.
            let s = FRAC_1_SQRT_2;
            let dec_lo = [0.0, -s / 4.0, s / 2.0, 1.5 * s, s / 2.0, -s / 4.0];
            let dec_hi = [0.0, s / 2.0, -s, s / 2.0, 0.0, 0.0];
            let lo: Vec<f64> = dec_lo.iter().rev().copied().collect();
            let hi: Vec<f64> = dec_hi.iter().rev().copied().collect();
            // Sign follows the reference toolbox plots of this wavelet.
            (lo, hi, -1.0)
        }
        WaveletFamily::Meyer => unreachable!("meyer is tabulated in frequency"),
    }
}

/// `hi[k] = (-1)^k lo[N-1-k]`.
fn quadrature_mirror(lo: &[f64]) -> Vec<f64> {
    let n = lo.len();
    (0..n)
        .map(|k| {
            if k % 2 == 0 {
                lo[n - 1 - k]
            } else {
                -lo[n - 1 - k]
            }
        })
        .collect()
}

fn convolve_upsampled(signal: &[f64], filter: &[f64], stride: usize) -> Vec<f64> {
    let span = (filter.len() - 1) * stride;
    let mut out = vec![0.0; signal.len() + span];
    for (k, &f) in filter.iter().enumerate() {
        if f == 0.0 {
            continue;
        }
        let offset = k * stride;
        for (i, &s) in signal.iter().enumerate() {
            out[i + offset] += f * s;
        }
    }
    out
}

/// Coefficients of `G(z^(2^(J-1))) * prod_{i<J-1} H(z^(2^i))`, times `2^(J/2)`.
fn cascade(lo: &[f64], hi: &[f64], levels: u32) -> Vec<f64> {
    let mut acc = vec![1.0];
    for i in 0..levels - 1 {
        acc = convolve_upsampled(&acc, lo, 1 << i);
    }
    acc = convolve_upsampled(&acc, hi, 1 << (levels - 1));
    let gain = 2f64.powf(f64::from(levels) / 2.0);
    acc.iter_mut().for_each(|v| *v *= gain);
    acc
}

/// Meyer auxiliary function `ν(x) = x^4 (35 - 84x + 70x^2 - 20x^3)` on [0, 1].
fn meyer_nu(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x.powi(4) * (35.0 - 84.0 * x + 70.0 * x * x - 20.0 * x.powi(3))
}

/// `|ψ̂(ω)|·sqrt(2π)` for ω ≥ 0.
fn meyer_spectrum(omega: f64) -> f64 {
    let w = omega.abs();
    if (2.0 * PI / 3.0..=4.0 * PI / 3.0).contains(&w) {
        (PI / 2.0 * meyer_nu(3.0 * w / (2.0 * PI) - 1.0)).sin()
    } else if (4.0 * PI / 3.0..=8.0 * PI / 3.0).contains(&w) {
        (PI / 2.0 * meyer_nu(3.0 * w / (4.0 * PI) - 1.0)).cos()
    } else {
        0.0
    }
}

/// ψ(t) = (1/π) ∫ |ψ̂| cos(ω (t - 1/2)) dω over the band, composite Simpson.
pub(crate) fn meyer_psi(t: f64) -> f64 {
    const INTERVALS: usize = 2048;
    let (lo, hi) = (2.0 * PI / 3.0, 8.0 * PI / 3.0);
    let h = (hi - lo) / INTERVALS as f64;
    let tau = t - 0.5;
    let mut sum = 0.0;
    for k in 0..=INTERVALS {
        let w = lo + h * k as f64;
        let weight = if k == 0 || k == INTERVALS {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += weight * meyer_spectrum(w) * (w * tau).cos();
    }
    sum * h / 3.0 / PI
}

fn meyer_table(resolution: u32) -> WaveletTable {
    const HALF_WIDTH: f64 = 8.0;
    let per_unit = resolution.max(1024) as usize;
    let n = 2 * HALF_WIDTH as usize * per_unit + 1;
    let step = 1.0 / per_unit as f64;
    let values = (0..n)
        .map(|i| meyer_psi(-HALF_WIDTH + step * i as f64))
        .collect();
    WaveletTable {
        family: WaveletFamily::Meyer,
        start: -HALF_WIDTH,
        step,
        values,
    }
}
