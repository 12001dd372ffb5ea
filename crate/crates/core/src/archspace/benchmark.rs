//! Tabular benchmarks: an accuracy and an ECE for every architecture.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::{enumerate, Arch, SearchSpace};
use crate::error::{Error, Result};
use crate::suite::{read_records, MeasurementRecord, SplitName, Stage};

/// Top-1 accuracy and ECE, both fractions in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub accuracy: f64,
    pub ece: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularBenchmark {
    space: SearchSpace,
    archs: Vec<Arch>,
    entries: HashMap<Arch, BenchEntry>,
}

impl TabularBenchmark {
    pub fn new(space: SearchSpace, entries: impl IntoIterator<Item = (Arch, BenchEntry)>) -> Result<Self> {
        let mut map = HashMap::new();
        for (arch, e) in entries {
            if arch.space() != space {
                return Err(Error::InvalidInput(format!("{arch} is not a {space} architecture")));
            }
            for (name, v) in [("accuracy", e.accuracy), ("ece", e.ece)] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidInput(format!("{arch}: {name} {v} outside [0, 1]")));
                }
            }
            map.insert(arch, e);
        }
        if map.is_empty() {
            return Err(Error::InvalidInput("benchmark has no architectures".into()));
        }
        let mut archs: Vec<Arch> = map.keys().copied().collect();
        archs.sort();
        Ok(Self {
            space,
            archs,
            entries: map,
        })
    }

    pub fn space(&self) -> SearchSpace {
        self.space
    }

    /// Architectures in ascending order.
    pub fn archs(&self) -> &[Arch] {
        &self.archs
    }

    pub fn len(&self) -> usize {
        self.archs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.archs.is_empty()
    }

    pub fn get(&self, arch: &Arch) -> Result<BenchEntry> {
        self.entries
            .get(arch)
            .copied()
            .ok_or_else(|| Error::MissingArchitecture(arch.to_string()))
    }

    /// Writes accuracy and ECE@`ece_bins` records plus the index CSV.
    pub fn write(
        &self,
        records_path: impl AsRef<Path>,
        index_path: impl AsRef<Path>,
        dataset: &str,
        ece_bins: u32,
    ) -> Result<()> {
        let mut records = Vec::with_capacity(2 * self.len());
        let mut index = csv::Writer::from_writer(Vec::new());
        index.write_record(["arch_index", "arch"]).map_err(csv_err)?;
        for arch in &self.archs {
            let e = self.entries[arch];
            let base = MeasurementRecord {
                benchmark_dataset: dataset.to_string(),
                search_space: self.space,
                arch_index: arch.index() as u64,
                metric: "accuracy".into(),
                bin_count: None,
                stage: Stage::Pre,
                split: SplitName::Test,
                value: e.accuracy,
                temperature: None,
            };
            let ece = MeasurementRecord {
                metric: "ece".into(),
                bin_count: Some(ece_bins),
                value: e.ece,
                ..base.clone()
            };
            records.push(base);
            records.push(ece);
            index
                .write_record([arch.index().to_string(), arch.to_string()])
                .map_err(csv_err)?;
        }
        crate::suite::write_records(&records, records_path)?;
        let bytes = index.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        let index_path = index_path.as_ref();
        fs::write(index_path, bytes).map_err(|e| Error::io(index_path, e))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(e.to_string())
}

/// Which records make up a benchmark entry.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    /// Restrict to one dataset; required when the file holds several.
    pub dataset: Option<String>,
    pub ece_bins: u32,
    pub stage: Stage,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            dataset: None,
            ece_bins: 15,
            stage: Stage::Pre,
        }
    }
}

/// Reads `arch_index,arch` rows.
pub fn read_index(path: impl AsRef<Path>, space: Option<SearchSpace>) -> Result<BTreeMap<u64, Arch>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidInput(format!("{other:?}")),
    })?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["arch_index", "arch"] {
        return Err(Error::BadHeader(format!(
            "{}: expected `arch_index,arch`",
            path.display()
        )));
    }
    let mut out = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(csv_err)?;
        let idx: u64 = row[0].trim().parse().map_err(|_| Error::NonNumeric {
            line,
            column: 1,
            text: row[0].to_string(),
        })?;
        let arch = match space {
            Some(s) => Arch::parse_in(s, row[1].trim())?,
            None => row[1].trim().parse()?,
        };
        if out.insert(idx, arch).is_some() {
            return Err(Error::Schema {
                line,
                message: format!("duplicate arch_index {idx}"),
            });
        }
    }
    Ok(out)
}

/// Builds a benchmark from suite records and an index file.
///
/// Every indexed architecture needs an `accuracy` record and an `ece`
/// record with `options.ece_bins` bins at `options.stage`.
pub fn load_benchmark(
    records_path: impl AsRef<Path>,
    index_path: impl AsRef<Path>,
    options: &LoadOptions,
) -> Result<TabularBenchmark> {
    let records = read_records(records_path)?;
    let index = read_index(index_path, None)?;
    let first = index
        .values()
        .next()
        .ok_or_else(|| Error::InvalidInput("empty architecture index".into()))?;
    let space = first.space();

    let datasets: std::collections::BTreeSet<&str> =
        records.iter().map(|r| r.benchmark_dataset.as_str()).collect();
    let dataset = match &options.dataset {
        Some(d) => d.clone(),
        None if datasets.len() == 1 => datasets.iter().next().unwrap().to_string(),
        None => {
            return Err(Error::InvalidInput(format!(
                "records cover datasets {datasets:?}; choose one"
            )))
        }
    };

    let mut acc: HashMap<u64, f64> = HashMap::new();
    let mut ece: HashMap<u64, f64> = HashMap::new();
    for r in &records {
        if r.benchmark_dataset != dataset || r.search_space != space || r.stage != options.stage {
            continue;
        }
        match (r.metric.as_str(), r.bin_count) {
            ("accuracy", None) => {
                acc.insert(r.arch_index, r.value);
            }
            ("ece", Some(b)) if b == options.ece_bins => {
                ece.insert(r.arch_index, r.value);
            }
            _ => {}
        }
    }
    let entries = index
        .iter()
        .map(|(idx, arch)| {
            let missing = |what: &str| {
                Error::InvalidInput(format!("{arch} (arch_index {idx}) has no {what} record"))
            };
            Ok((
                *arch,
                BenchEntry {
                    accuracy: *acc.get(idx).ok_or_else(|| missing("accuracy"))?,
                    ece: *ece.get(idx).ok_or_else(|| missing("ece"))?,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    TabularBenchmark::new(space, entries)
}

/// How a synthetic benchmark assigns values.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthMode {
    /// Pseudo-random values keyed by the architecture string.
    Hashed,
    /// Hashed values, except that one architecture is perfect.
    Planted(Arch),
    /// Values that degrade with Hamming distance from one architecture.
    Unimodal(Arch),
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn unit(x: u64) -> f64 {
    (x >> 11) as f64 / (1u64 << 53) as f64
}

fn hashed_entry(arch: &Arch, seed: u64) -> BenchEntry {
    let h = splitmix64(fnv1a(arch.to_string().as_bytes()) ^ splitmix64(seed));
    BenchEntry {
        accuracy: 0.10 + 0.85 * unit(h),
        ece: 0.01 + 0.29 * unit(splitmix64(h)),
    }
}

/// A deterministic benchmark over the whole space.
pub fn synthetic_benchmark(space: SearchSpace, mode: &SynthMode, seed: u64) -> Result<TabularBenchmark> {
    let target = match mode {
        SynthMode::Hashed => None,
        SynthMode::Planted(a) | SynthMode::Unimodal(a) => Some(*a),
    };
    if let Some(t) = target {
        if t.space() != space {
            return Err(Error::InvalidInput(format!("{t} is not a {space} architecture")));
        }
    }
    let positions = match space {
        SearchSpace::Tss => 6.0,
        SearchSpace::Sss => 5.0,
    };
    let entries = enumerate(space).into_iter().map(|arch| {
        let e = match mode {
            SynthMode::Hashed => hashed_entry(&arch, seed),
            SynthMode::Planted(p) if *p == arch => BenchEntry {
                accuracy: 1.0,
                ece: 0.0,
            },
            SynthMode::Planted(_) => hashed_entry(&arch, seed),
            SynthMode::Unimodal(p) => {
                let d = arch.hamming(p) as f64 / positions;
                // small hashed jitter keeps ties broken without creating
                // new local optima
                let jitter = 0.01 * unit(splitmix64(fnv1a(arch.to_string().as_bytes()) ^ seed)) / positions;
                BenchEntry {
                    accuracy: 1.0 - 0.5 * d - if d > 0.0 { jitter } else { 0.0 },
                    ece: 0.25 * d,
                }
            }
        };
        (arch, e)
    });
    TabularBenchmark::new(space, entries)
}
