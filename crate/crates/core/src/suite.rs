//! The full measurement suite for one model and its JSON-lines record format.
//!
//! At defaults one model yields 102 records: five bin-based metrics at nine
//! bin sizes, before and after temperature scaling (90), five continuous
//! metrics at both stages (10), and one AUROC per OoD set (2).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archspace::SearchSpace;
use crate::bin_metrics::{classwise_ce, top_label_stats};
use crate::binning::{BinScheme, DEFAULT_BIN_SIZES};
use crate::continuous::{auroc, brier, kdece_top, ksce_top, mmce_top, nll, KdeConfig, KernelSpec};
use crate::error::{Error, Result};
use crate::predictions::{split, PredictionSet, ScoreKind, SplitSpec};
use crate::recalibration::{apply_temperature, fit_temperature, Temperature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Ece,
    EceEm,
    Cwce,
    CwceEm,
    Mce,
    Nll,
    Brier,
    Kdece,
    Ksce,
    Mmce,
    /// AUROC against the OoD set whose inputs share the label space
    /// (corrupted test images, for instance).
    AurocOodIn,
    /// AUROC against the OoD set from outside the label space.
    AurocOodOut,
    /// Top-1 accuracy; not part of the default set.
    Accuracy,
}

impl Metric {
    pub const BIN_BASED: [Metric; 5] = [
        Metric::Ece,
        Metric::EceEm,
        Metric::Cwce,
        Metric::CwceEm,
        Metric::Mce,
    ];
    pub const CONTINUOUS: [Metric; 5] = [
        Metric::Nll,
        Metric::Brier,
        Metric::Kdece,
        Metric::Ksce,
        Metric::Mmce,
    ];
    pub const ALL: [Metric; 13] = [
        Metric::Ece,
        Metric::EceEm,
        Metric::Cwce,
        Metric::CwceEm,
        Metric::Mce,
        Metric::Nll,
        Metric::Brier,
        Metric::Kdece,
        Metric::Ksce,
        Metric::Mmce,
        Metric::AurocOodIn,
        Metric::AurocOodOut,
        Metric::Accuracy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Ece => "ece",
            Metric::EceEm => "ece_em",
            Metric::Cwce => "cwce",
            Metric::CwceEm => "cwce_em",
            Metric::Mce => "mce",
            Metric::Nll => "nll",
            Metric::Brier => "brier",
            Metric::Kdece => "kdece",
            Metric::Ksce => "ksce",
            Metric::Mmce => "mmce",
            Metric::AurocOodIn => "auroc_ood_in",
            Metric::AurocOodOut => "auroc_ood_out",
            Metric::Accuracy => "accuracy",
        }
    }

    pub fn is_bin_based(self) -> bool {
        Self::BIN_BASED.contains(&self)
    }

    /// The default enabled set: everything except accuracy.
    pub fn default_set() -> BTreeSet<Metric> {
        Self::ALL
            .into_iter()
            .filter(|&m| m != Metric::Accuracy)
            .collect()
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown metric `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Pre,
    Post,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Val,
    Test,
}

/// One measurement of one architecture on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub benchmark_dataset: String,
    pub search_space: SearchSpace,
    pub arch_index: u64,
    pub metric: String,
    pub bin_count: Option<u32>,
    pub stage: Stage,
    pub split: SplitName,
    pub value: f64,
    pub temperature: Option<f64>,
}

impl MeasurementRecord {
    /// Key used by the nested export: `metric[@bins]:stage:split`.
    pub fn measurement_key(&self) -> String {
        let stage = match self.stage {
            Stage::Pre => "pre",
            Stage::Post => "post",
        };
        let split = match self.split {
            SplitName::Val => "val",
            SplitName::Test => "test",
        };
        match self.bin_count {
            Some(b) => format!("{}@{b}:{stage}:{split}", self.metric),
            None => format!("{}:{stage}:{split}", self.metric),
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        if !self.value.is_finite() {
            return Err(format!("value {} is not finite", self.value));
        }
        let bin_based = self
            .metric
            .parse::<Metric>()
            .map(Metric::is_bin_based)
            .unwrap_or(false);
        if bin_based != self.bin_count.is_some() {
            return Err(format!(
                "metric `{}` {} a bin count",
                self.metric,
                if bin_based { "requires" } else { "must not carry" }
            ));
        }
        Ok(())
    }
}

/// Which model the records describe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordContext {
    pub benchmark_dataset: String,
    pub search_space: SearchSpace,
    pub arch_index: u64,
}

impl Default for RecordContext {
    fn default() -> Self {
        Self {
            benchmark_dataset: "cifar10".into(),
            search_space: SearchSpace::Tss,
            arch_index: 0,
        }
    }
}

/// Top-label confidences of the model on two OoD sets; an empty set is
/// skipped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OodInputs {
    /// Same label space, shifted inputs.
    pub ood_in: Vec<f64>,
    /// Different label space.
    pub ood_out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub bin_sizes: Vec<usize>,
    pub metrics: BTreeSet<Metric>,
    pub ood_inputs: Option<OodInputs>,
    pub split: SplitSpec,
    pub temperature_scale: bool,
    pub kde: KdeConfig,
    pub mmce_kernel: KernelSpec,
    pub context: RecordContext,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            bin_sizes: DEFAULT_BIN_SIZES.to_vec(),
            metrics: Metric::default_set(),
            ood_inputs: None,
            split: SplitSpec::default(),
            temperature_scale: true,
            kde: KdeConfig::default(),
            mmce_kernel: KernelSpec::default(),
            context: RecordContext::default(),
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bin_sizes.is_empty() || self.bin_sizes.contains(&0) {
            return Err(Error::param("bin_sizes", "need one or more positive sizes"));
        }
        if self.bin_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("bin_sizes", "must be sorted and unique"));
        }
        self.mmce_kernel.validate()
    }

    /// Number of records [`run_suite`] will emit.
    pub fn expected_records(&self) -> usize {
        let stages = if self.temperature_scale { 2 } else { 1 };
        let bin = self.metrics.iter().filter(|m| m.is_bin_based()).count();
        let cont = self
            .metrics
            .iter()
            .filter(|m| Metric::CONTINUOUS.contains(m) || **m == Metric::Accuracy)
            .count();
        let ood = self.ood_inputs.as_ref().map_or(0, |o| {
            usize::from(self.metrics.contains(&Metric::AurocOodIn) && !o.ood_in.is_empty())
                + usize::from(self.metrics.contains(&Metric::AurocOodOut) && !o.ood_out.is_empty())
        });
        stages * (bin * self.bin_sizes.len() + cont) + ood
    }
}

/// Records produced for one model, plus the fitted temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutput {
    pub records: Vec<MeasurementRecord>,
    pub temperature: Option<Temperature>,
}

fn stage_records(
    probs: &PredictionSet,
    config: &SuiteConfig,
    stage: Stage,
    temperature: Option<f64>,
) -> Result<Vec<MeasurementRecord>> {
    let top = probs.top_label();
    let ctx = &config.context;
    let make = |metric: Metric, bin_count: Option<usize>, value: f64| MeasurementRecord {
        benchmark_dataset: ctx.benchmark_dataset.clone(),
        search_space: ctx.search_space,
        arch_index: ctx.arch_index,
        metric: metric.name().to_string(),
        bin_count: bin_count.map(|b| b as u32),
        stage,
        split: SplitName::Test,
        value,
        temperature,
    };

    let bin_jobs: Vec<(Metric, usize)> = Metric::BIN_BASED
        .into_iter()
        .filter(|m| config.metrics.contains(m))
        .flat_map(|m| config.bin_sizes.iter().map(move |&b| (m, b)))
        .collect();
    let mut records = bin_jobs
        .par_iter()
        .map(|&(metric, bins)| {
            let value = match metric {
                Metric::Ece => top_label_stats(&top, bins, BinScheme::EqualWidth)?.expected_gap(),
                Metric::EceEm => top_label_stats(&top, bins, BinScheme::EqualMass)?.expected_gap(),
                Metric::Mce => top_label_stats(&top, bins, BinScheme::EqualWidth)?.max_gap(),
                Metric::Cwce => classwise_ce(probs, bins, BinScheme::EqualWidth)?,
                Metric::CwceEm => classwise_ce(probs, bins, BinScheme::EqualMass)?,
                _ => unreachable!("not a bin-based metric"),
            };
            Ok(make(metric, Some(bins), value))
        })
        .collect::<Result<Vec<_>>>()?;

    for metric in Metric::CONTINUOUS {
        if !config.metrics.contains(&metric) {
            continue;
        }
        let value = match metric {
            Metric::Nll => nll(probs),
            Metric::Brier => brier(probs),
            Metric::Kdece => kdece_top(&top, &config.kde)?,
            Metric::Ksce => ksce_top(&top),
            Metric::Mmce => mmce_top(&top, &config.mmce_kernel)?,
            _ => unreachable!(),
        };
        records.push(make(metric, None, value));
    }
    if config.metrics.contains(&Metric::Accuracy) {
        let acc = top.correct.iter().filter(|&&c| c).count() as f64 / top.len() as f64;
        records.push(make(Metric::Accuracy, None, acc));
    }
    if stage == Stage::Pre {
        if let Some(ood) = &config.ood_inputs {
            for (metric, scores) in [
                (Metric::AurocOodIn, &ood.ood_in),
                (Metric::AurocOodOut, &ood.ood_out),
            ] {
                if config.metrics.contains(&metric) && !scores.is_empty() {
                    records.push(make(metric, None, auroc(&top.confidences, scores)?));
                }
            }
        }
    }
    Ok(records)
}

/// Runs every enabled measurement on the test split of `preds`; the
/// temperature, when enabled, is fitted on the validation split.
pub fn run_suite(preds: &PredictionSet, config: &SuiteConfig) -> Result<SuiteOutput> {
    config.validate()?;
    if config.temperature_scale && preds.kind() != ScoreKind::Logits {
        return Err(Error::RequiresLogits);
    }
    let (validation, test) = split(preds, &config.split)?;
    let mut records = stage_records(&test.to_probabilities(), config, Stage::Pre, None)?;
    let temperature = if config.temperature_scale {
        let t = fit_temperature(&validation)?;
        let scaled = apply_temperature(&test, t.value)?;
        records.extend(stage_records(&scaled, config, Stage::Post, Some(t.value))?);
        Some(t)
    } else {
        None
    };
    Ok(SuiteOutput {
        records,
        temperature,
    })
}

/// Serialises records as JSON lines.
pub fn records_to_jsonl(records: &[MeasurementRecord]) -> Result<String> {
    let mut out = String::new();
    for (i, r) in records.iter().enumerate() {
        r.check().map_err(|message| Error::Schema {
            line: i + 1,
            message,
        })?;
        out.push_str(&serde_json::to_string(r).expect("records always serialise"));
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_records(reader: impl BufRead) -> Result<Vec<MeasurementRecord>> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: MeasurementRecord =
            serde_json::from_str(&line).map_err(|e| Error::Schema {
                line: line_no,
                message: e.to_string(),
            })?;
        record.check().map_err(|message| Error::Schema {
            line: line_no,
            message,
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_records(records: &[MeasurementRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = records_to_jsonl(records)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<MeasurementRecord>> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_records(BufReader::new(f))
}

/// Nested layout `dataset -> measurement -> "CE" -> "space/arch_index" -> value`.
pub fn nested_export(records: &[MeasurementRecord]) -> serde_json::Value {
    type Inner = BTreeMap<String, f64>;
    let mut tree: BTreeMap<String, BTreeMap<String, BTreeMap<&'static str, Inner>>> =
        BTreeMap::new();
    for r in records {
        let space = match r.search_space {
            SearchSpace::Tss => "tss",
            SearchSpace::Sss => "sss",
        };
        tree.entry(r.benchmark_dataset.clone())
            .or_default()
            .entry(r.measurement_key())
            .or_default()
            .entry("CE")
            .or_default()
            .insert(format!("{space}/{}", r.arch_index), r.value);
    }
    serde_json::to_value(tree).expect("maps of finite floats always serialise")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn logits(n: usize, k: usize, seed: u64) -> PredictionSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores = (0..n * k).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let labels = (0..n).map(|_| rng.gen_range(0..k)).collect();
        PredictionSet::new(scores, labels, k, ScoreKind::Logits).unwrap()
    }

    #[test]
    fn single_bin_size_without_ood() {
        let cfg = SuiteConfig {
            bin_sizes: vec![10],
            ..SuiteConfig::default()
        };
        let out = run_suite(&logits(200, 3, 1), &cfg).unwrap();
        assert_eq!(out.records.len(), 20);
        assert_eq!(cfg.expected_records(), 20);
        for r in &out.records {
            assert_eq!(r.temperature.is_some(), r.stage == Stage::Post);
        }
    }

    #[test]
    fn config_validation() {
        for bins in [vec![], vec![10, 5], vec![5, 5], vec![0, 5]] {
            let cfg = SuiteConfig {
                bin_sizes: bins,
                ..SuiteConfig::default()
            };
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn scaling_requires_logits() {
        let p = logits(50, 2, 2).to_probabilities();
        let cfg = SuiteConfig {
            bin_sizes: vec![5],
            ..SuiteConfig::default()
        };
        assert!(matches!(run_suite(&p, &cfg), Err(Error::RequiresLogits)));
        let cfg = SuiteConfig {
            temperature_scale: false,
            ..cfg
        };
        assert_eq!(run_suite(&p, &cfg).unwrap().records.len(), 10);
    }

    #[test]
    fn accuracy_records_match_across_stages() {
        let mut metrics = Metric::default_set();
        metrics.insert(Metric::Accuracy);
        let cfg = SuiteConfig {
            bin_sizes: vec![5],
            metrics,
            ..SuiteConfig::default()
        };
        let out = run_suite(&logits(300, 4, 3), &cfg).unwrap();
        let acc: Vec<f64> = out
            .records
            .iter()
            .filter(|r| r.metric == "accuracy")
            .map(|r| r.value)
            .collect();
        assert_eq!(acc.len(), 2);
        assert_eq!(acc[0], acc[1]);
        assert_eq!(out.records.len(), cfg.expected_records());
    }

    #[test]
    fn missing_value_is_a_schema_error_with_line() {
        let good = r#"{"benchmark_dataset":"c10","search_space":"tss","arch_index":1,"metric":"nll","bin_count":null,"stage":"pre","split":"test","value":0.5,"temperature":null}"#;
        let bad = r#"{"benchmark_dataset":"c10","search_space":"tss","arch_index":1,"metric":"nll","bin_count":null,"stage":"pre","split":"test","temperature":null}"#;
        let text = format!("{good}\n{bad}\n");
        match parse_records(text.as_bytes()) {
            Err(Error::Schema { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("value"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bin_count_must_match_metric() {
        let line = r#"{"benchmark_dataset":"c10","search_space":"sss","arch_index":1,"metric":"ece","bin_count":null,"stage":"pre","split":"test","value":0.5,"temperature":null}"#;
        assert!(matches!(
            parse_records(line.as_bytes()),
            Err(Error::Schema { line: 1, .. })
        ));
    }

    #[test]
    fn nested_export_indexes_by_dataset_measurement_arch() {
        let cfg = SuiteConfig {
            bin_sizes: vec![10],
            ..SuiteConfig::default()
        };
        let out = run_suite(&logits(100, 3, 4), &cfg).unwrap();
        let v = nested_export(&out.records);
        let ece = &v["cifar10"]["ece@10:pre:test"]["CE"]["tss/0"];
        assert_eq!(ece.as_f64().unwrap(), out.records[0].value);
    }
}
