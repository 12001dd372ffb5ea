//! Brute-force reference implementations and random-input generators shared
//! by the integration tests. Nothing here calls into the library's metric
//! code; the oracles work from raw rows and labels only.
#![allow(dead_code)]

use calibrex::predictions::{PredictionSet, ScoreKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-15
}

/// Softmax of Gaussian logits with scale `sharpness`, labels drawn
/// independently of the scores.
pub fn random_probs(rng: &mut ChaCha8Rng, n: usize, k: usize, sharpness: f64) -> PredictionSet {
    let logits = random_logit_rows(rng, n, k, sharpness);
    let rows: Vec<Vec<f64>> = logits.iter().map(|z| softmax_ref(z)).collect();
    let labels = (0..n).map(|_| rng.gen_range(0..k)).collect();
    PredictionSet::from_rows(&rows, labels, ScoreKind::Probabilities).unwrap()
}

pub fn random_logit_rows(rng: &mut ChaCha8Rng, n: usize, k: usize, scale: f64) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, scale).unwrap();
    (0..n)
        .map(|_| (0..k).map(|_| normal.sample(rng)).collect())
        .collect()
}

pub fn softmax_ref(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::MIN, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Logits whose softmax is calibrated (labels drawn from it), multiplied by
/// `c`; the NLL-optimal temperature is then `c`.
pub fn tempered_logits(rng: &mut ChaCha8Rng, n: usize, k: usize, c: f64) -> PredictionSet {
    let rows = random_logit_rows(rng, n, k, 2.0);
    let mut scores = Vec::with_capacity(n * k);
    let mut labels = Vec::with_capacity(n);
    for z in &rows {
        let p = softmax_ref(z);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut y = k - 1;
        for (j, pj) in p.iter().enumerate() {
            acc += pj;
            if u < acc {
                y = j;
                break;
            }
        }
        labels.push(y);
        scores.extend(z.iter().map(|v| v * c));
    }
    PredictionSet::new(scores, labels, k, ScoreKind::Logits).unwrap()
}

pub fn rows_of(p: &PredictionSet) -> Vec<Vec<f64>> {
    p.rows().map(|r| r.to_vec()).collect()
}

/// `(max_k p_k, label attains the max)` per row.
pub fn top_ref(rows: &[Vec<f64>], labels: &[usize]) -> (Vec<f64>, Vec<bool>) {
    rows.iter()
        .zip(labels)
        .map(|(r, &y)| {
            let m = r.iter().cloned().fold(f64::MIN, f64::max);
            (m, r[y] == m)
        })
        .unzip()
}

pub fn width_edges(m: usize) -> Vec<f64> {
    (0..=m).map(|i| i as f64 / m as f64).collect()
}

pub fn mass_edges(conf: &[f64], m: usize) -> Vec<f64> {
    let mut s = conf.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    let mut e = vec![0.0];
    for i in 1..m {
        e.push(s[i * n / m]);
    }
    e.push(1.0);
    e
}

/// Linear scan over half-open bins, the last one closed.
pub fn bin_ref(edges: &[f64], c: f64) -> usize {
    let m = edges.len() - 1;
    for b in 0..m {
        let upper_ok = if b == m - 1 { c <= edges[b + 1] } else { c < edges[b + 1] };
        if (b == 0 || c >= edges[b]) && upper_ok {
            return b;
        }
    }
    panic!("{c} falls in no bin");
}

/// Per-bin `(count, |acc - conf|)` for non-empty bins.
fn bin_gaps(edges: &[f64], conf: &[f64], hit: &[bool]) -> Vec<(usize, f64)> {
    let m = edges.len() - 1;
    (0..m)
        .filter_map(|b| {
            let members: Vec<usize> = (0..conf.len()).filter(|&i| bin_ref(edges, conf[i]) == b).collect();
            if members.is_empty() {
                return None;
            }
            let n = members.len() as f64;
            let c: f64 = members.iter().map(|&i| conf[i]).sum::<f64>() / n;
            let a: f64 = members.iter().filter(|&&i| hit[i]).count() as f64 / n;
            Some((members.len(), (a - c).abs()))
        })
        .collect()
}

pub fn ece_ref(edges: &[f64], conf: &[f64], hit: &[bool]) -> f64 {
    let n = conf.len() as f64;
    bin_gaps(edges, conf, hit).iter().map(|&(c, g)| c as f64 / n * g).sum()
}

pub fn mce_ref(edges: &[f64], conf: &[f64], hit: &[bool]) -> f64 {
    bin_gaps(edges, conf, hit).iter().map(|&(_, g)| g).fold(0.0, f64::max)
}

pub fn cwce_ref(rows: &[Vec<f64>], labels: &[usize], m: usize, equal_mass: bool) -> f64 {
    let k = rows[0].len();
    let mut total = 0.0;
    for class in 0..k {
        let col: Vec<f64> = rows.iter().map(|r| r[class]).collect();
        let hit: Vec<bool> = labels.iter().map(|&y| y == class).collect();
        let edges = if equal_mass { mass_edges(&col, m) } else { width_edges(m) };
        total += ece_ref(&edges, &col, &hit);
    }
    total / k as f64
}

pub fn nll_ref(rows: &[Vec<f64>], labels: &[usize]) -> f64 {
    rows.iter()
        .zip(labels)
        .map(|(r, &y)| -(r[y].max(1e-12)).ln())
        .sum::<f64>()
        / rows.len() as f64
}

pub fn brier_ref(rows: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (r, &y) in rows.iter().zip(labels) {
        for (j, p) in r.iter().enumerate() {
            let t = if j == y { 1.0 } else { 0.0 };
            total += (p - t) * (p - t);
        }
    }
    total / rows.len() as f64
}

/// `O(N^2)`: for every sample, the residual sum over all samples ranked at
/// or before it (confidence, then index).
pub fn ksce_ref(conf: &[f64], hit: &[bool]) -> f64 {
    let n = conf.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        let s: f64 = (0..n)
            .filter(|&j| conf[j] < conf[i] || (conf[j] == conf[i] && j <= i))
            .map(|j| if hit[j] { 1.0 } else { 0.0 } - conf[j])
            .sum();
        worst = worst.max(s.abs());
    }
    worst / n as f64
}

pub fn mmce_ref(conf: &[f64], hit: &[bool], h: f64) -> f64 {
    let n = conf.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let ri = if hit[i] { 1.0 } else { 0.0 } - conf[i];
            let rj = if hit[j] { 1.0 } else { 0.0 } - conf[j];
            s += ri * rj * (-(conf[i] - conf[j]).abs() / h).exp();
        }
    }
    s.max(0.0).sqrt() / n as f64
}

/// Pair counting: P(in > out) + 0.5 P(in = out).
pub fn auroc_ref(pos: &[f64], neg: &[f64]) -> f64 {
    let mut s = 0.0;
    for &a in pos {
        for &b in neg {
            s += if a > b {
                1.0
            } else if a == b {
                0.5
            } else {
                0.0
            };
        }
    }
    s / (pos.len() * neg.len()) as f64
}

/// Tau-b from concordant/discordant pair counts.
pub fn tau_b_ref(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tx += 1;
            } else if dy == 0.0 {
                ty += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                c += 1;
            } else {
                d += 1;
            }
        }
    }
    let den = (((c + d + tx) as f64) * ((c + d + ty) as f64)).sqrt();
    (den > 0.0).then(|| (c - d) as f64 / den)
}

/// Triweight KDE calibration error with Simpson's rule on `points` nodes
/// (odd), normalised by the Simpson mass of the density.
pub fn kdece_simpson_ref(conf: &[f64], hit: &[bool], h: f64, points: usize) -> f64 {
    assert!(points % 2 == 1);
    let step = 1.0 / (points - 1) as f64;
    let kern = |u: f64| {
        let v = u / h;
        let t = 1.0 - v * v;
        if t > 0.0 {
            35.0 / 32.0 * t * t * t / h
        } else {
            0.0
        }
    };
    let (mut err, mut mass) = (0.0, 0.0);
    for i in 0..points {
        let z = i as f64 * step;
        let mut d = 0.0;
        let mut w = 0.0;
        for (&r, &a) in conf.iter().zip(hit) {
            let k = kern(z - r);
            d += k;
            if a {
                w += k;
            }
        }
        let coef = if i == 0 || i == points - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        if d > 0.0 {
            err += coef * (z - w / d).abs() * d;
            mass += coef * d;
        }
    }
    err / mass
}
