//! Per-sample class scores and labels, the input to every metric.
//!
//! Scores are kept as `f64` in memory. Files store them as `f32`, so a set
//! read from disk and written back is bit-identical.

mod io;

pub use io::{
    decode_logits, encode_logits, read_csv_predictions, read_logits_file, write_csv_predictions,
    write_logits_file, MAGIC, VERSION,
};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on row sums for sets flagged as probabilities.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-6;

/// Whether a score matrix holds raw logits or normalized probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Logits,
    Probabilities,
}

impl ScoreKind {
    pub fn flag(self) -> u8 {
        match self {
            ScoreKind::Logits => 0,
            ScoreKind::Probabilities => 1,
        }
    }

    pub fn from_flag(flag: u8) -> Result<Self> {
        match flag {
            0 => Ok(ScoreKind::Logits),
            1 => Ok(ScoreKind::Probabilities),
            other => Err(Error::BadKindFlag(other)),
        }
    }
}

/// An `N x K` score matrix (row-major) with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    scores: Vec<f64>,
    labels: Vec<usize>,
    n_classes: usize,
    kind: ScoreKind,
}

impl PredictionSet {
    pub fn new(
        scores: Vec<f64>,
        labels: Vec<usize>,
        n_classes: usize,
        kind: ScoreKind,
    ) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 classes, got {n_classes}"
            )));
        }
        if labels.is_empty() {
            return Err(Error::TooFewSamples {
                needed: 1,
                found: 0,
            });
        }
        if scores.len() != labels.len() * n_classes {
            return Err(Error::InvalidInput(format!(
                "score matrix has {} entries, expected {} x {}",
                scores.len(),
                labels.len(),
                n_classes
            )));
        }
        for (row, &label) in labels.iter().enumerate() {
            if label >= n_classes {
                return Err(Error::LabelOutOfRange {
                    row,
                    label: label as i64,
                    n_classes,
                });
            }
        }
        for (row, values) in scores.chunks_exact(n_classes).enumerate() {
            for (column, &v) in values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row, column });
                }
                if kind == ScoreKind::Probabilities && !(0.0..=1.0).contains(&v) {
                    return Err(Error::ProbabilityOutOfRange {
                        row,
                        column,
                        value: v,
                    });
                }
            }
            if kind == ScoreKind::Probabilities {
                let sum: f64 = values.iter().sum();
                if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
                    return Err(Error::NotNormalized { row, sum });
                }
            }
        }
        Ok(Self {
            scores,
            labels,
            n_classes,
            kind,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>, kind: ScoreKind) -> Result<Self> {
        let n_classes = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_classes) {
            return Err(Error::InvalidInput(format!(
                "row {i} has {} scores, expected {n_classes}",
                r.len()
            )));
        }
        if rows.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        Self::new(rows.concat(), labels, n_classes, kind)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.scores[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.scores.chunks_exact(self.n_classes)
    }

    /// Returns the set itself if it already holds probabilities, otherwise
    /// its row-wise softmax.
    pub fn to_probabilities(&self) -> PredictionSet {
        match self.kind {
            ScoreKind::Probabilities => self.clone(),
            ScoreKind::Logits => {
                let mut probs = vec![0.0; self.scores.len()];
                for (row, out) in self
                    .scores
                    .chunks_exact(self.n_classes)
                    .zip(probs.chunks_exact_mut(self.n_classes))
                {
                    softmax_row(row, out);
                }
                PredictionSet {
                    scores: probs,
                    labels: self.labels.clone(),
                    n_classes: self.n_classes,
                    kind: ScoreKind::Probabilities,
                }
            }
        }
    }

    /// Top-label confidence and correctness for every row.
    ///
    /// A row counts as correct when its label is among the maximal scores,
    /// so exact ties do not depend on column order.
    pub fn top_label(&self) -> TopLabel {
        let probs = self.to_probabilities();
        let mut confidences = Vec::with_capacity(self.n_samples());
        let mut correct = Vec::with_capacity(self.n_samples());
        for (row, (p, &label)) in probs.rows().zip(&probs.labels).enumerate() {
            let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            confidences.push(max);
            // correctness follows the original scores: softmax can merge
            // near-equal logits into one float
            let raw = self.row(row);
            let raw_max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            correct.push(raw[label] == raw_max);
        }
        TopLabel {
            confidences,
            correct,
        }
    }

    /// Index of the first maximal score in every row.
    pub fn predicted(&self) -> Vec<usize> {
        self.rows()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                        if v > best.1 {
                            (i, v)
                        } else {
                            best
                        }
                    })
                    .0
            })
            .collect()
    }

    pub fn accuracy(&self) -> f64 {
        let top = self.top_label();
        top.correct.iter().filter(|&&c| c).count() as f64 / self.n_samples() as f64
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<PredictionSet> {
        let mut scores = Vec::with_capacity(indices.len() * self.n_classes);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n_samples() {
                return Err(Error::InvalidInput(format!(
                    "row index {i} out of range for {} samples",
                    self.n_samples()
                )));
            }
            scores.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        PredictionSet::new(scores, labels, self.n_classes, self.kind)
    }
}

/// Top-label view: `max_k p_k` and whether the label attains it.
#[derive(Debug, Clone, PartialEq)]
pub struct TopLabel {
    pub confidences: Vec<f64>,
    pub correct: Vec<bool>,
}

impl TopLabel {
    pub fn len(&self) -> usize {
        self.confidences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.confidences.is_empty()
    }
}

/// Numerically stable softmax of one row, written into `out`.
pub fn softmax_row(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(row) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Row-wise softmax of a row-major `N x K` matrix.
pub fn softmax(scores: &[f64], n_classes: usize) -> Result<Vec<f64>> {
    if n_classes == 0 || !scores.len().is_multiple_of(n_classes) {
        return Err(Error::InvalidInput(format!(
            "{} scores do not form rows of {n_classes}",
            scores.len()
        )));
    }
    if let Some(pos) = scores.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: pos / n_classes,
            column: pos % n_classes,
        });
    }
    let mut out = vec![0.0; scores.len()];
    for (row, o) in scores
        .chunks_exact(n_classes)
        .zip(out.chunks_exact_mut(n_classes))
    {
        softmax_row(row, o);
    }
    Ok(out)
}

/// How to carve a validation split off a prediction set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub validation_fraction: f64,
    pub seed: u64,
    /// Shuffle and split within each label instead of globally.
    #[serde(default)]
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            validation_fraction: 0.2,
            seed: 0,
            stratified: false,
        }
    }
}

/// Validation and test row indices, each sorted ascending.
pub fn split_indices(preds: &PredictionSet, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let f = spec.validation_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::param(
            "validation_fraction",
            format!("{f} is outside (0, 1)"),
        ));
    }
    let n = preds.n_samples();
    if n < 5 {
        return Err(Error::TooFewSamples {
            needed: 5,
            found: n,
        });
    }
    let n_val = (n as f64 * f).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut validation = if spec.stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); preds.n_classes()];
        for (i, &y) in preds.labels().iter().enumerate() {
            by_class[y].push(i);
        }
        // largest-remainder allocation keeps the total at round(n * f)
        let quotas: Vec<f64> = by_class.iter().map(|c| c.len() as f64 * f).collect();
        let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut missing = n_val.saturating_sub(take.iter().sum());
        let mut order: Vec<usize> = (0..quotas.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &c in &order {
            if missing == 0 {
                break;
            }
            if take[c] < by_class[c].len() {
                take[c] += 1;
                missing -= 1;
            }
        }
        let mut chosen = Vec::with_capacity(n_val);
        for (members, k) in by_class.iter_mut().zip(take) {
            members.shuffle(&mut rng);
            chosen.extend_from_slice(&members[..k]);
        }
        chosen
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all.truncate(n_val);
        all
    };
    validation.sort_unstable();

    let mut in_val = vec![false; n];
    for &i in &validation {
        in_val[i] = true;
    }
    let test = (0..n).filter(|&i| !in_val[i]).collect();
    Ok((validation, test))
}

/// Splits `preds` into (validation, test).
pub fn split(preds: &PredictionSet, spec: &SplitSpec) -> Result<(PredictionSet, PredictionSet)> {
    let (val, test) = split_indices(preds, spec)?;
    Ok((preds.subset(&val)?, preds.subset(&test)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_logits(n: usize, k: usize, seed: u64) -> PredictionSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores = (0..n * k).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let labels = (0..n).map(|_| rng.gen_range(0..k)).collect();
        PredictionSet::new(scores, labels, k, ScoreKind::Logits).unwrap()
    }

    #[test]
    fn softmax_symmetric_row() {
        assert_eq!(softmax(&[0.0, 0.0], 2).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_large_logit_does_not_overflow() {
        let p = softmax(&[1000.0, 0.0], 2).unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1] >= 0.0 && p[1] < 1e-300);
    }

    #[test]
    fn softmax_matches_reciprocal_sum_oracle() {
        // p_i = 1 / sum_j exp(x_j - x_i), summed smallest-first
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..20).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let p = softmax(&x, 4).unwrap();
        for (row, prow) in x.chunks(4).zip(p.chunks(4)) {
            for (i, &pi) in prow.iter().enumerate() {
                let mut terms: Vec<f64> = row.iter().map(|&xj| (xj - row[i]).exp()).collect();
                terms.sort_by(f64::total_cmp);
                let oracle = 1.0 / terms.iter().sum::<f64>();
                assert!((pi - oracle).abs() <= 1e-14, "{pi} vs {oracle}");
            }
        }
    }

    #[test]
    fn softmax_rejects_non_finite() {
        let err = softmax(&[0.0, f64::NAN, 1.0, 2.0], 2).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, column: 1 }));
    }

    proptest! {
        #[test]
        fn softmax_translation_invariant_and_argmax_preserving(
            row in proptest::collection::vec(-50.0f64..50.0, 2..8),
            shift in -100.0f64..100.0,
        ) {
            let k = row.len();
            let p = softmax(&row, k).unwrap();
            let shifted: Vec<f64> = row.iter().map(|v| v + shift).collect();
            let q = softmax(&shifted, k).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            let arg = |v: &[f64]| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(row[arg(&p)] == top);
        }
    }

    #[test]
    fn rejects_bad_shapes_and_labels() {
        assert!(PredictionSet::new(vec![0.0; 2], vec![0], 1, ScoreKind::Logits).is_err());
        assert!(PredictionSet::new(vec![], vec![], 2, ScoreKind::Logits).is_err());
        let err = PredictionSet::new(vec![0.0; 4], vec![0, 2], 2, ScoreKind::Logits).unwrap_err();
        assert!(matches!(err, Error::LabelOutOfRange { row: 1, .. }));
        let err =
            PredictionSet::new(vec![0.6, 0.6], vec![0], 2, ScoreKind::Probabilities).unwrap_err();
        assert!(matches!(err, Error::NotNormalized { row: 0, .. }));
    }

    #[test]
    fn split_sizes_follow_fraction() {
        let preds = random_logits(100, 3, 1);
        let (val, test) = split(&preds, &SplitSpec::default()).unwrap();
        assert_eq!((val.n_samples(), test.n_samples()), (20, 80));
    }

    #[test]
    fn split_is_deterministic_partition() {
        let preds = random_logits(10, 3, 2);
        let spec = SplitSpec {
            validation_fraction: 0.2,
            seed: 99,
            stratified: false,
        };
        let a = split_indices(&preds, &spec).unwrap();
        let b = split_indices(&preds, &spec).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.0.iter().chain(&a.1).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(a.0.len(), 2);
    }

    #[test]
    fn stratified_split_keeps_total_and_class_shares() {
        let scores = vec![0.0; 200 * 2];
        let labels: Vec<usize> = (0..200).map(|i| usize::from(i % 4 == 0)).collect();
        let preds = PredictionSet::new(scores, labels, 2, ScoreKind::Logits).unwrap();
        let spec = SplitSpec {
            validation_fraction: 0.2,
            seed: 5,
            stratified: true,
        };
        let (val, _) = split_indices(&preds, &spec).unwrap();
        assert_eq!(val.len(), 40);
        let ones = val.iter().filter(|&&i| preds.labels()[i] == 1).count();
        assert_eq!(ones, 10);
    }

    #[test]
    fn split_rejects_bad_fraction_and_tiny_sets() {
        let preds = random_logits(10, 2, 3);
        for f in [0.0, 1.0, -0.1, 1.5] {
            let spec = SplitSpec {
                validation_fraction: f,
                ..SplitSpec::default()
            };
            assert!(split(&preds, &spec).is_err());
        }
        let tiny = random_logits(4, 2, 3);
        assert!(matches!(
            split(&tiny, &SplitSpec::default()),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn top_label_counts_ties_as_correct() {
        let preds =
            PredictionSet::new(vec![0.5, 0.5, 0.2, 0.8], vec![1, 0], 2, ScoreKind::Probabilities)
                .unwrap();
        let top = preds.top_label();
        assert_eq!(top.confidences, vec![0.5, 0.8]);
        assert_eq!(top.correct, vec![true, false]);
        assert_eq!(preds.predicted(), vec![0, 1]);
    }
}
