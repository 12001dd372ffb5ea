//! Partitions of `[0, 1]` and per-bin confidence/accuracy statistics.
//!
//! Bins are half-open `[edges[i], edges[i+1])` except the last, which is
//! closed at 1. Equal-mass edges sit at order statistics of the sorted
//! confidences: interior edge `i` is `sorted[floor(i * N / m)]`. With
//! distinct confidences this gives occupancies that differ by at most one;
//! tied confidences always share a bin, so heavy ties leave some bins empty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bin counts used throughout the measurement suite.
pub const DEFAULT_BIN_SIZES: [usize; 9] = [5, 10, 15, 20, 25, 50, 100, 200, 500];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinScheme {
    EqualWidth,
    EqualMass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinPartition {
    scheme: BinScheme,
    edges: Vec<f64>,
}

impl BinPartition {
    pub fn equal_width(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("bins", "must be at least 1"));
        }
        let edges = (0..=m).map(|i| i as f64 / m as f64).collect();
        Ok(Self {
            scheme: BinScheme::EqualWidth,
            edges,
        })
    }

    pub fn equal_mass(confidences: &[f64], m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("bins", "must be at least 1"));
        }
        check_confidences(confidences)?;
        let n = confidences.len();
        if m > n {
            return Err(Error::param(
                "bins",
                format!("{m} equal-mass bins need at least {m} samples, got {n}"),
            ));
        }
        let mut sorted = confidences.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut edges = Vec::with_capacity(m + 1);
        edges.push(0.0);
        edges.extend((1..m).map(|i| sorted[i * n / m]));
        edges.push(1.0);
        Ok(Self {
            scheme: BinScheme::EqualMass,
            edges,
        })
    }

    /// Builds the partition for `scheme`; equal-mass edges come from `confidences`.
    pub fn build(scheme: BinScheme, confidences: &[f64], m: usize) -> Result<Self> {
        match scheme {
            BinScheme::EqualWidth => Self::equal_width(m),
            BinScheme::EqualMass => Self::equal_mass(confidences, m),
        }
    }

    pub fn scheme(&self) -> BinScheme {
        self.scheme
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }

    /// Bin of a confidence already known to lie in `[0, 1]`.
    #[inline]
    pub fn bin_of(&self, confidence: f64) -> usize {
        let m = self.n_bins();
        // number of interior edges <= confidence
        self.edges[1..m].partition_point(|&e| e <= confidence)
    }

    pub fn assign(&self, confidences: &[f64]) -> Result<Vec<usize>> {
        check_confidences(confidences)?;
        Ok(confidences.iter().map(|&c| self.bin_of(c)).collect())
    }
}

pub(crate) fn check_confidences(confidences: &[f64]) -> Result<()> {
    match confidences
        .iter()
        .position(|c| !(0.0..=1.0).contains(c))
    {
        Some(index) => Err(Error::ConfidenceOutOfRange {
            index,
            value: confidences[index],
        }),
        None => Ok(()),
    }
}

/// Per-bin count and mean confidence/outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct BinStats {
    pub counts: Vec<usize>,
    conf_sums: Vec<f64>,
    hit_sums: Vec<f64>,
    total: usize,
}

impl BinStats {
    /// Accumulates `(confidence, outcome)` pairs into `partition`.
    pub fn collect(partition: &BinPartition, confidences: &[f64], outcomes: &[bool]) -> Result<Self> {
        if confidences.len() != outcomes.len() {
            return Err(Error::InvalidInput(format!(
                "{} confidences but {} outcomes",
                confidences.len(),
                outcomes.len()
            )));
        }
        check_confidences(confidences)?;
        let m = partition.n_bins();
        let mut stats = Self {
            counts: vec![0; m],
            conf_sums: vec![0.0; m],
            hit_sums: vec![0.0; m],
            total: confidences.len(),
        };
        for (&c, &hit) in confidences.iter().zip(outcomes) {
            let b = partition.bin_of(c);
            stats.counts[b] += 1;
            stats.conf_sums[b] += c;
            if hit {
                stats.hit_sums[b] += 1.0;
            }
        }
        Ok(stats)
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn confidence(&self, bin: usize) -> Option<f64> {
        (self.counts[bin] > 0).then(|| self.conf_sums[bin] / self.counts[bin] as f64)
    }

    pub fn accuracy(&self, bin: usize) -> Option<f64> {
        (self.counts[bin] > 0).then(|| self.hit_sums[bin] / self.counts[bin] as f64)
    }

    /// `accuracy - confidence`, `None` for empty bins.
    pub fn gap(&self, bin: usize) -> Option<f64> {
        Some(self.accuracy(bin)? - self.confidence(bin)?)
    }

    /// Non-empty bins as `(weight |B|/n, |gap|)`.
    pub fn weighted_gaps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.n_bins()).filter_map(move |b| {
            let gap = self.gap(b)?;
            Some((self.counts[b] as f64 / self.total as f64, gap.abs()))
        })
    }

    /// `sum_i |B_i|/n * |gap_i|`.
    pub fn expected_gap(&self) -> f64 {
        self.weighted_gaps().map(|(w, g)| w * g).sum()
    }

    /// Largest `|gap|` over non-empty bins.
    pub fn max_gap(&self) -> f64 {
        self.weighted_gaps().map(|(_, g)| g).fold(0.0, f64::max)
    }
}
