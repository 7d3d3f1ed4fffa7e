//! Slow, obviously-correct reference implementations used as test oracles.
#![allow(dead_code)]

use fallkit::dataset::Label;
use fallkit::matrix::Matrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Plain left-to-right squared Euclidean distance.
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s
}

/// Indices of all other points, fully sorted by (distance, index).
fn sorted_neighbors(points: &[Vec<f64>], i: usize, query: &[f64]) -> Vec<(f64, usize)> {
    let mut d: Vec<(f64, usize)> = (0..points.len())
        .filter(|&j| j != i)
        .map(|j| (sq_dist(query, &points[j]), j))
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    d
}

/// Brute-force KNN: sort every distance, majority of the first `k`.
pub fn knn_oracle(points: &[Vec<f64>], labels: &[Label], k: usize, q: &[f64]) -> Label {
    let mut d: Vec<(f64, usize)> = (0..points.len())
        .map(|j| (sq_dist(q, &points[j]), j))
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let falls = d[..k]
        .iter()
        .filter(|(_, j)| labels[*j] == Label::Fall)
        .count();
    if falls * 2 > k {
        Label::Fall
    } else {
        Label::Adl
    }
}

/// The e nearest other training points of every training point.
pub fn neighbor_lists_oracle(points: &[Vec<f64>], e: usize) -> Vec<Vec<u32>> {
    (0..points.len())
        .map(|i| {
            sorted_neighbors(points, i, &points[i])[..e]
                .iter()
                .map(|&(_, j)| j as u32)
                .collect()
        })
        .collect()
}

/// ENN by recomputing every neighbor list of the augmented set from scratch
/// for each tentative label of the query (query indexed last). Weights use
/// the training class counts; equal statistics go to FALL.
pub fn enn_oracle(points: &[Vec<f64>], labels: &[Label], e: usize, q: &[f64]) -> Label {
    let n = points.len();
    let mut aug = points.to_vec();
    aug.push(q.to_vec());
    let n_adl = labels.iter().filter(|&&l| l == Label::Adl).count() as u128;
    let n_fall = n as u128 - n_adl;
    let mut score = [0u128; 2];
    for (c, slot) in [Label::Adl, Label::Fall].into_iter().zip(score.iter_mut()) {
        let mut lab = labels.to_vec();
        lab.push(c);
        let mut same = [0u128; 2];
        for i in 0..=n {
            let nn = sorted_neighbors(&aug, i, &aug[i]);
            let hits = nn[..e].iter().filter(|&&(_, j)| lab[j] == lab[i]).count() as u128;
            same[lab[i].index()] += hits;
        }
        // same[ADL]/(n_adl e) + same[FALL]/(n_fall e), scaled by n_adl n_fall e.
        *slot = same[0] * n_fall + same[1] * n_adl;
    }
    if score[1] >= score[0] {
        Label::Fall
    } else {
        Label::Adl
    }
}

/// Best root split by exhaustive search with exact Gini comparison:
/// lowest feature, then lowest threshold, among the minimizers.
pub fn best_root_split(points: &[Vec<f64>], labels: &[Label]) -> Option<(usize, f64)> {
    let dim = points[0].len();
    let mut best: Option<(u128, u128, usize, f64)> = None;
    for f in 0..dim {
        let mut values: Vec<f64> = points.iter().map(|p| p[f]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for w in values.windows(2) {
            let t = w[0] / 2.0 + w[1] / 2.0;
            let t = if t > w[0] && t <= w[1] { t } else { w[1] };
            let mut l = [0u128; 2];
            let mut r = [0u128; 2];
            for (p, lab) in points.iter().zip(labels) {
                if p[f] < t {
                    l[lab.index()] += 1;
                } else {
                    r[lab.index()] += 1;
                }
            }
            let (nl, nr) = (l[0] + l[1], r[0] + r[1]);
            let num = l[0] * l[1] * nr + r[0] * r[1] * nl;
            let den = nl * nr;
            let better = match best {
                None => true,
                Some((bn, bd, _, _)) => num * bd < bn * den,
            };
            if better {
                best = Some((num, den, f, t));
            }
        }
    }
    best.map(|(_, _, f, t)| (f, t))
}

/// Direct single-scale CWT using an arbitrary wavelet function.
pub fn cwt_oracle(x: &[f64], scale: f64, psi: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|b| {
            let mut s = 0.0;
            for t in 0..n {
                s += x[t] * psi((t as f64 - b as f64) / scale);
            }
            s / scale.sqrt()
        })
        .collect()
}

pub fn haar(x: f64) -> f64 {
    if (0.0..0.5).contains(&x) {
        1.0
    } else if (0.5..1.0).contains(&x) {
        -1.0
    } else {
        0.0
    }
}

/// `Σ_k |X[k]|²` with a textbook O(n²) DFT.
pub fn dft_energy(x: &[f64]) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for k in 0..n {
        let (mut re, mut im) = (0.0, 0.0);
        for (t, &v) in x.iter().enumerate() {
            let angle = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
            re += v * angle.cos();
            im += v * angle.sin();
        }
        total += re * re + im * im;
    }
    total
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// A random labeled point set that contains both classes. With `integer`
/// set, coordinates are small integers so distance ties are common and exact.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    n: usize,
    dim: usize,
    integer: bool,
) -> (Vec<Vec<f64>>, Vec<Label>) {
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    if integer {
                        f64::from(rng.gen_range(-3i32..=3))
                    } else {
                        rng.gen_range(-5.0..5.0)
                    }
                })
                .collect()
        })
        .collect();
    let mut labels: Vec<Label> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.4) {
                Label::Fall
            } else {
                Label::Adl
            }
        })
        .collect();
    labels[0] = Label::Adl;
    labels[n - 1] = Label::Fall;
    (points, labels)
}

pub fn random_point(rng: &mut ChaCha8Rng, dim: usize, integer: bool) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            if integer {
                f64::from(rng.gen_range(-3i32..=3))
            } else {
                rng.gen_range(-5.0..5.0)
            }
        })
        .collect()
}

pub fn matrix(points: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(points)
}
