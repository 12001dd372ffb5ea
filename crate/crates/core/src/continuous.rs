//! Binning-free scores and calibration errors, plus the L_p calibration
//! error and out-of-distribution AUROC.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binning::{check_confidences, BinPartition, BinStats};
use crate::error::{Error, Result};
use crate::predictions::{PredictionSet, TopLabel};

/// Floor applied to `p(y)` before taking its log.
pub const NLL_CLAMP: f64 = 1e-12;

/// Mean negative log-likelihood of the true class.
pub fn nll(preds: &PredictionSet) -> f64 {
    let probs = preds.to_probabilities();
    let total: f64 = probs
        .rows()
        .zip(probs.labels())
        .map(|(row, &y)| -row[y].max(NLL_CLAMP).ln())
        .sum();
    total / probs.n_samples() as f64
}

/// Mean squared distance between the probability row and the one-hot label.
pub fn brier(preds: &PredictionSet) -> f64 {
    let probs = preds.to_probabilities();
    let total: f64 = probs
        .rows()
        .zip(probs.labels())
        .map(|(row, &y)| {
            row.iter()
                .enumerate()
                .map(|(k, &p)| {
                    let d = p - if k == y { 1.0 } else { 0.0 };
                    d * d
                })
                .sum::<f64>()
        })
        .sum();
    total / probs.n_samples() as f64
}

/// Kolmogorov-Smirnov calibration error of the top label: the largest
/// absolute prefix sum of `correct - confidence` after sorting by
/// confidence, divided by `N`.
pub fn ksce(preds: &PredictionSet) -> f64 {
    ksce_top(&preds.top_label())
}

pub fn ksce_top(top: &TopLabel) -> f64 {
    let mut order: Vec<usize> = (0..top.len()).collect();
    order.sort_by(|&a, &b| top.confidences[a].total_cmp(&top.confidences[b]).then(a.cmp(&b)));
    let mut prefix = 0.0f64;
    let mut worst = 0.0f64;
    for i in order {
        prefix += f64::from(u8::from(top.correct[i])) - top.confidences[i];
        worst = worst.max(prefix.abs());
    }
    worst / top.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Laplacian,
    Gaussian,
    Triweight,
}

/// A scaled kernel `K(u / h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        let spec = Self { family, bandwidth };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::param(
                "bandwidth",
                format!("{} is not a positive finite number", self.bandwidth),
            ));
        }
        Ok(())
    }

    /// Similarity `k(a, b)`, scaled so that `k(x, x) = 1` for the
    /// Laplacian and Gaussian families.
    #[inline]
    pub fn similarity(&self, a: f64, b: f64) -> f64 {
        let u = (a - b) / self.bandwidth;
        match self.family {
            KernelFamily::Laplacian => (-u.abs()).exp(),
            KernelFamily::Gaussian => (-0.5 * u * u).exp(),
            KernelFamily::Triweight => {
                let t = 1.0 - u * u;
                if t > 0.0 {
                    t * t * t
                } else {
                    0.0
                }
            }
        }
    }

    /// Density-normalised kernel `K_h(u) = K(u / h) / h`.
    #[inline]
    pub fn density(&self, u: f64) -> f64 {
        let h = self.bandwidth;
        let v = u / h;
        let k = match self.family {
            KernelFamily::Laplacian => 0.5 * (-v.abs()).exp(),
            KernelFamily::Gaussian => (-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            KernelFamily::Triweight => {
                let t = 1.0 - v * v;
                if t > 0.0 {
                    35.0 / 32.0 * t * t * t
                } else {
                    0.0
                }
            }
        };
        k / h
    }

    /// Half-width of the support in data units, if finite.
    fn support(&self) -> Option<f64> {
        match self.family {
            KernelFamily::Triweight => Some(self.bandwidth),
            _ => None,
        }
    }
}

impl Default for KernelSpec {
    /// Laplacian with bandwidth 0.4, the MMCE default.
    fn default() -> Self {
        Self {
            family: KernelFamily::Laplacian,
            bandwidth: 0.4,
        }
    }
}

/// Sums `values` by pairwise tree reduction, so the result depends only on
/// the order of `values`.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Maximum mean calibration error with the plug-in estimator
/// `sqrt(sum_ij (a_i - r_i)(a_j - r_j) k(r_i, r_j)) / N`.
pub fn mmce(preds: &PredictionSet, kernel: &KernelSpec) -> Result<f64> {
    mmce_top(&preds.top_label(), kernel)
}

pub fn mmce_top(top: &TopLabel, kernel: &KernelSpec) -> Result<f64> {
    kernel.validate()?;
    let r = &top.confidences;
    let resid: Vec<f64> = r
        .iter()
        .zip(&top.correct)
        .map(|(&c, &hit)| f64::from(u8::from(hit)) - c)
        .collect();
    let row_sums: Vec<f64> = (0..r.len())
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in 0..r.len() {
                s += resid[j] * kernel.similarity(r[i], r[j]);
            }
            resid[i] * s
        })
        .collect();
    let n = r.len() as f64;
    Ok(pairwise_sum(&row_sums).max(0.0).sqrt() / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`, clipped to `[1e-3, 0.2]`.
    Silverman,
    Fixed(f64),
}

/// Settings for the kernel-density calibration error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeConfig {
    pub family: KernelFamily,
    pub bandwidth: Bandwidth,
    pub grid_points: usize,
}

impl Default for KdeConfig {
    fn default() -> Self {
        Self {
            family: KernelFamily::Triweight,
            bandwidth: Bandwidth::Silverman,
            grid_points: 1024,
        }
    }
}

pub const SILVERMAN_MIN: f64 = 1e-3;
pub const SILVERMAN_MAX: f64 = 0.2;

/// Type-7 quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let sd = var.sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    (0.9 * spread * n.powf(-0.2)).clamp(SILVERMAN_MIN, SILVERMAN_MAX)
}

impl KdeConfig {
    pub fn kernel_for(&self, confidences: &[f64]) -> Result<KernelSpec> {
        let h = match self.bandwidth {
            Bandwidth::Silverman => silverman_bandwidth(confidences),
            Bandwidth::Fixed(h) => h,
        };
        KernelSpec::new(self.family, h)
    }
}

/// Top-label calibration error with KDE estimates of the confidence density
/// `p(z)` and the accuracy curve `pi(z)`: `int |z - pi(z)| p(z) dz`.
///
/// The integral runs over a uniform grid on `[0, 1]` with the trapezoid rule
/// and is normalised by the grid mass of `p`, so kernel mass falling outside
/// `[0, 1]` is dropped rather than counted.
pub fn kdece(preds: &PredictionSet, config: &KdeConfig) -> Result<f64> {
    kdece_top(&preds.top_label(), config)
}

pub fn kdece_top(top: &TopLabel, config: &KdeConfig) -> Result<f64> {
    if config.grid_points < 2 {
        return Err(Error::param("grid_points", "need at least 2"));
    }
    check_confidences(&top.confidences)?;
    let kernel = config.kernel_for(&top.confidences)?;
    let g = config.grid_points;
    let step = 1.0 / (g - 1) as f64;
    let mut density = vec![0.0; g];
    let mut weighted = vec![0.0; g];
    for (&r, &hit) in top.confidences.iter().zip(&top.correct) {
        let (lo, hi) = match kernel.support() {
            Some(w) => (
                ((r - w) / step).floor().max(0.0) as usize,
                (((r + w) / step).ceil() as usize).min(g - 1),
            ),
            None => (0, g - 1),
        };
        for (i, (d, wsum)) in density[lo..=hi]
            .iter_mut()
            .zip(&mut weighted[lo..=hi])
            .enumerate()
        {
            let z = (lo + i) as f64 * step;
            let k = kernel.density(z - r);
            *d += k;
            if hit {
                *wsum += k;
            }
        }
    }
    let mut mass = 0.0;
    let mut err = 0.0;
    for i in 0..g {
        let w = if i == 0 || i == g - 1 { 0.5 } else { 1.0 };
        let z = i as f64 * step;
        let d = density[i];
        if d > 0.0 {
            let pi = weighted[i] / d;
            err += w * (z - pi).abs() * d;
            mass += w * d;
        }
    }
    if mass <= 0.0 {
        return Err(Error::param(
            "bandwidth",
            "kernel density has no mass on the grid",
        ));
    }
    Ok(err / mass)
}

/// L_p calibration error with `P(Y | f(X))` estimated on `m` equal-width
/// bins of the top-label confidence.
pub fn lp_ce(preds: &PredictionSet, p: f64, m: usize) -> Result<f64> {
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::param("p", format!("{p} is outside [1, 2]")));
    }
    let top = preds.top_label();
    let partition = BinPartition::equal_width(m)?;
    let stats = BinStats::collect(&partition, &top.confidences, &top.correct)?;
    let sum: f64 = stats.weighted_gaps().map(|(w, g)| w * g.powf(p)).sum();
    Ok(sum.powf(1.0 / p))
}

/// Probability that an in-distribution confidence exceeds an
/// out-of-distribution one, ties counting one half (Mann-Whitney U).
pub fn auroc(in_dist: &[f64], ood: &[f64]) -> Result<f64> {
    if in_dist.is_empty() || ood.is_empty() {
        return Err(Error::InvalidInput(
            "AUROC needs non-empty in-distribution and OoD score lists".into(),
        ));
    }
    if let Some(v) = in_dist.iter().chain(ood).find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite AUROC score {v}")));
    }
    let mut all: Vec<(f64, bool)> = in_dist
        .iter()
        .map(|&v| (v, true))
        .chain(ood.iter().map(|&v| (v, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // rank sum of the positive class with mid-ranks for ties
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let mid_rank = (i + 1 + j) as f64 / 2.0;
        let positives = all[i..j].iter().filter(|e| e.1).count();
        rank_sum += mid_rank * positives as f64;
        i = j;
    }
    let n_pos = in_dist.len() as f64;
    let n_neg = ood.len() as f64;
    Ok((rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binning::BinScheme;
    use crate::predictions::ScoreKind;

    fn probs(rows: &[Vec<f64>], labels: Vec<usize>) -> PredictionSet {
        PredictionSet::from_rows(rows, labels, ScoreKind::Probabilities).unwrap()
    }

    #[test]
    fn nll_closed_forms() {
        let perfect = probs(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1]);
        assert_eq!(nll(&perfect), 0.0);
        let half = probs(&[vec![0.5, 0.5]], vec![1]);
        assert!((nll(&half) - std::f64::consts::LN_2).abs() < 1e-15);
        let wrong = probs(&[vec![1.0, 0.0]], vec![1]);
        assert!((nll(&wrong) - 1e-12f64.ln().abs()).abs() < 1e-9);
    }

    #[test]
    fn brier_closed_forms() {
        let perfect = probs(&[vec![0.0, 1.0, 0.0]], vec![1]);
        assert_eq!(brier(&perfect), 0.0);
        let uniform = probs(&[vec![0.5, 0.5]], vec![0]);
        assert_eq!(brier(&uniform), 0.5);
    }

    #[test]
    fn ksce_closed_forms() {
        let perfect = probs(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1]);
        assert_eq!(ksce(&perfect), 0.0);
        let wrong = probs(&[vec![1.0, 0.0], vec![1.0, 0.0]], vec![1, 1]);
        assert_eq!(ksce(&wrong), 1.0);
    }

    #[test]
    fn mmce_closed_forms() {
        let perfect = probs(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1]);
        assert_eq!(mmce(&perfect, &KernelSpec::default()).unwrap(), 0.0);
        let one = probs(&[vec![0.7, 0.3]], vec![1]);
        let v = mmce(&one, &KernelSpec::default()).unwrap();
        assert!((v - 0.7).abs() < 1e-15);
    }

    #[test]
    fn mmce_permutation_invariant() {
        let rows = vec![vec![0.9, 0.1], vec![0.3, 0.7], vec![0.6, 0.4], vec![0.45, 0.55]];
        let a = probs(&rows, vec![0, 0, 1, 1]);
        let rev: Vec<Vec<f64>> = rows.iter().rev().cloned().collect();
        let b = probs(&rev, vec![1, 1, 0, 0]);
        let ka = mmce(&a, &KernelSpec::default()).unwrap();
        let kb = mmce(&b, &KernelSpec::default()).unwrap();
        assert!((ka - kb).abs() < 1e-15);
    }

    #[test]
    fn kernel_rejects_bad_bandwidth() {
        assert!(KernelSpec::new(KernelFamily::Gaussian, 0.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Gaussian, f64::NAN).is_err());
        let top = TopLabel {
            confidences: vec![0.5],
            correct: vec![true],
        };
        let cfg = KdeConfig {
            bandwidth: Bandwidth::Fixed(-1.0),
            ..KdeConfig::default()
        };
        assert!(kdece_top(&top, &cfg).is_err());
    }

    #[test]
    fn kdece_point_mass_at_one() {
        let p = probs(&vec![vec![1.0, 0.0]; 50], vec![0; 50]);
        let v = kdece(&p, &KdeConfig::default()).unwrap();
        assert!(v < 1e-3, "{v}");
    }

    #[test]
    fn silverman_is_clipped() {
        assert_eq!(silverman_bandwidth(&[0.5; 10]), SILVERMAN_MIN);
        let spread: Vec<f64> = (0..5).map(|i| i as f64 / 4.0).collect();
        assert_eq!(silverman_bandwidth(&spread), SILVERMAN_MAX);
    }

    #[test]
    fn lp_ce_reduces_to_ece_and_rejects_bad_p() {
        let rows = vec![vec![0.8, 0.2], vec![0.35, 0.65], vec![0.6, 0.4]];
        let p = probs(&rows, vec![0, 0, 1]);
        let e = crate::bin_metrics::ece(&p, 10, BinScheme::EqualWidth).unwrap();
        assert!((lp_ce(&p, 1.0, 10).unwrap() - e).abs() < 1e-12);
        assert!(lp_ce(&p, 2.5, 10).is_err());
        assert!(lp_ce(&p, 0.5, 10).is_err());
    }

    #[test]
    fn auroc_closed_forms() {
        assert_eq!(auroc(&[0.9, 0.8], &[0.2, 0.1]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3, 0.5, 0.5], &[0.5, 0.3, 0.5]).unwrap(), 0.5);
        assert!(auroc(&[], &[0.1]).is_err());
        assert!(auroc(&[0.1], &[]).is_err());
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
    }
}
