//! Bin-based calibration errors: ECE, ECE_em, cwCE, cwCE_em and MCE.

use std::fmt::Write as _;

use crate::binning::{BinPartition, BinScheme, BinStats};
use crate::error::Result;
use crate::predictions::{PredictionSet, TopLabel};

/// Top-label bin statistics for `m` bins under `scheme`.
pub fn top_label_stats(top: &TopLabel, m: usize, scheme: BinScheme) -> Result<BinStats> {
    let partition = BinPartition::build(scheme, &top.confidences, m)?;
    BinStats::collect(&partition, &top.confidences, &top.correct)
}

/// Expected calibration error over top-label confidences.
pub fn ece(preds: &PredictionSet, m: usize, scheme: BinScheme) -> Result<f64> {
    Ok(top_label_stats(&preds.top_label(), m, scheme)?.expected_gap())
}

/// ECE with equal-mass bins.
pub fn ece_em(preds: &PredictionSet, m: usize) -> Result<f64> {
    ece(preds, m, BinScheme::EqualMass)
}

/// Maximum calibration error: the largest gap over non-empty bins.
pub fn mce(preds: &PredictionSet, m: usize, scheme: BinScheme) -> Result<f64> {
    Ok(top_label_stats(&preds.top_label(), m, scheme)?.max_gap())
}

/// Class-wise calibration error.
///
/// Every class `k` bins the probability `p_k` of all `N` samples on its own
/// partition and scores the bin against the frequency of `y = k`; the result
/// is the mean over classes of `sum_b n_{b,k}/N * |acc - conf|`.
pub fn classwise_ce(probs: &PredictionSet, m: usize, scheme: BinScheme) -> Result<f64> {
    let probs = probs.to_probabilities();
    let k = probs.n_classes();
    let mut column = vec![0.0; probs.n_samples()];
    let mut hits = vec![false; probs.n_samples()];
    let mut total = 0.0;
    for class in 0..k {
        for (j, (row, &y)) in probs.rows().zip(probs.labels()).enumerate() {
            column[j] = row[class];
            hits[j] = y == class;
        }
        let partition = BinPartition::build(scheme, &column, m)?;
        total += BinStats::collect(&partition, &column, &hits)?.expected_gap();
    }
    Ok(total / k as f64)
}

pub fn cwce(preds: &PredictionSet, m: usize) -> Result<f64> {
    classwise_ce(preds, m, BinScheme::EqualWidth)
}

pub fn cwce_em(preds: &PredictionSet, m: usize) -> Result<f64> {
    classwise_ce(preds, m, BinScheme::EqualMass)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub confidence: Option<f64>,
    pub accuracy: Option<f64>,
    pub gap: Option<f64>,
}

/// Plot data for a reliability diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityDiagram {
    pub scheme: BinScheme,
    pub n_samples: usize,
    pub bins: Vec<ReliabilityBin>,
}

impl ReliabilityDiagram {
    pub fn ece(&self) -> f64 {
        self.bins
            .iter()
            .filter_map(|b| Some(b.count as f64 / self.n_samples as f64 * b.gap?.abs()))
            .sum()
    }

    pub fn mce(&self) -> f64 {
        self.bins
            .iter()
            .filter_map(|b| b.gap.map(f64::abs))
            .fold(0.0, f64::max)
    }

    /// `bin_lo,bin_hi,count,confidence,accuracy,gap`; empty bins leave the
    /// last three cells blank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count,confidence,accuracy,gap\n");
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for b in &self.bins {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                b.lo,
                b.hi,
                b.count,
                cell(b.confidence),
                cell(b.accuracy),
                cell(b.gap)
            );
        }
        out
    }
}

pub fn reliability_data(preds: &PredictionSet, m: usize, scheme: BinScheme) -> Result<ReliabilityDiagram> {
    let top = preds.top_label();
    let partition = BinPartition::build(scheme, &top.confidences, m)?;
    let stats = BinStats::collect(&partition, &top.confidences, &top.correct)?;
    let edges = partition.edges();
    let bins = (0..m)
        .map(|b| ReliabilityBin {
            lo: edges[b],
            hi: edges[b + 1],
            count: stats.counts[b],
            confidence: stats.confidence(b),
            accuracy: stats.accuracy(b),
            gap: stats.gap(b),
        })
        .collect();
    Ok(ReliabilityDiagram {
        scheme,
        n_samples: preds.n_samples(),
        bins,
    })
}
