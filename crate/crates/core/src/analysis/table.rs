//! Per-architecture metric tables and their correlation matrices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::kendall::kendall_tau;
use crate::error::{Error, Result};
use crate::suite::{MeasurementRecord, Stage};

/// Rows are architectures (keyed by `arch_index`), columns are named real
/// measurements. All cells are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    arch_index: Vec<u64>,
    names: Vec<String>,
    /// Column-major.
    columns: Vec<Vec<f64>>,
}

impl MetricTable {
    pub fn new(arch_index: Vec<u64>, names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidInput(format!(
                "{} column names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if name == "arch_index" || !seen.insert(name.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate column name `{name}`")));
            }
        }
        let n = arch_index.len();
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::InvalidInput(format!(
                    "column `{name}` has {} rows, expected {n}",
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "column `{name}` row {i} is not finite"
                )));
            }
        }
        Ok(Self {
            arch_index,
            names,
            columns,
        })
    }

    /// Pivots records into one row per architecture.
    ///
    /// Columns are named `metric` or `metric@bins`, with a `:post` suffix
    /// for post-recalibration values. Records of other datasets, and
    /// validation-split records, are ignored. Columns that are missing for
    /// some architecture are an error.
    pub fn from_records(records: &[MeasurementRecord], dataset: &str) -> Result<Self> {
        let mut cells: BTreeMap<String, BTreeMap<u64, f64>> = BTreeMap::new();
        let mut archs = BTreeSet::new();
        for r in records.iter().filter(|r| r.benchmark_dataset == dataset) {
            if r.split != crate::suite::SplitName::Test {
                continue;
            }
            let mut name = match r.bin_count {
                Some(b) => format!("{}@{b}", r.metric),
                None => r.metric.clone(),
            };
            if r.stage == Stage::Post {
                name.push_str(":post");
            }
            archs.insert(r.arch_index);
            cells.entry(name).or_default().insert(r.arch_index, r.value);
        }
        if archs.is_empty() {
            return Err(Error::InvalidInput(format!("no records for dataset `{dataset}`")));
        }
        let arch_index: Vec<u64> = archs.into_iter().collect();
        let mut names = Vec::new();
        let mut columns = Vec::new();
        for (name, by_arch) in cells {
            if by_arch.len() != arch_index.len() {
                let missing = arch_index.iter().find(|a| !by_arch.contains_key(a)).unwrap();
                return Err(Error::InvalidInput(format!(
                    "column `{name}` has no value for arch_index {missing}"
                )));
            }
            columns.push(by_arch.into_values().collect());
            names.push(name);
        }
        Self::new(arch_index, names, columns)
    }

    pub fn n_rows(&self) -> usize {
        self.arch_index.len()
    }

    pub fn arch_index(&self) -> &[u64] {
        &self.arch_index
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    /// Adds (or replaces) a column.
    pub fn with_column(mut self, name: &str, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = self.names.iter().position(|n| n == name) {
            self.names.remove(i);
            self.columns.remove(i);
        }
        self.names.push(name.to_string());
        self.columns.push(values);
        Self::new(self.arch_index, self.names, self.columns)
    }

    /// Rows at `rows`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> MetricTable {
        MetricTable {
            arch_index: rows.iter().map(|&r| self.arch_index[r]).collect(),
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
        }
    }

    /// Keeps the `k` rows with the largest `column`; ties at the cut go to
    /// the smaller `arch_index`. Surviving rows keep their original order.
    pub fn top_k_by(&self, column: &str, k: usize) -> Result<MetricTable> {
        let values = self.column(column)?;
        if k > self.n_rows() {
            return Err(Error::param(
                "k",
                format!("{k} exceeds the table's {} rows", self.n_rows()),
            ));
        }
        let mut order: Vec<usize> = (0..self.n_rows()).collect();
        order.sort_by(|&a, &b| {
            values[b]
                .total_cmp(&values[a])
                .then(self.arch_index[a].cmp(&self.arch_index[b]))
        });
        let mut keep = order[..k].to_vec();
        keep.sort_unstable();
        Ok(self.select_rows(&keep))
    }

    /// CSV with an `arch_index` column first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("arch_index");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (r, idx) in self.arch_index.iter().enumerate() {
            let _ = write!(out, "{idx}");
            for c in &self.columns {
                let _ = write!(out, ",{}", c[r]);
            }
            out.push('\n');
        }
        out
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::InvalidInput(format!("{other:?}")),
        })?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| Error::InvalidInput(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.first().map(String::as_str) != Some("arch_index") {
            return Err(Error::BadHeader(format!(
                "{}: first column must be `arch_index`",
                path.display()
            )));
        }
        let names = headers[1..].to_vec();
        let mut arch_index = Vec::new();
        let mut columns = vec![Vec::new(); names.len()];
        for (i, row) in reader.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| Error::InvalidInput(e.to_string()))?;
            if row.len() != headers.len() {
                return Err(Error::RaggedRow {
                    line,
                    expected: headers.len(),
                    found: row.len(),
                });
            }
            let parse = |c: usize| -> Result<f64> {
                row[c].trim().parse().map_err(|_| Error::NonNumeric {
                    line,
                    column: c + 1,
                    text: row[c].to_string(),
                })
            };
            arch_index.push(parse(0)? as u64);
            for (c, col) in columns.iter_mut().enumerate() {
                col.push(parse(c + 1)?);
            }
        }
        Self::new(arch_index, names, columns)
    }
}

/// Pairwise tau-b; `None` cells are undefined (a constant column).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        self.cells[i][j]
    }

    /// Square CSV; undefined cells are written as `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (name, row) in self.names.iter().zip(&self.cells) {
            out.push_str(name);
            for c in row {
                match c {
                    Some(v) => {
                        let _ = write!(out, ",{v}");
                    }
                    None => out.push_str(",NA"),
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn correlation_matrix(table: &MetricTable, columns: &[&str]) -> Result<CorrelationMatrix> {
    let data: Vec<&[f64]> = columns
        .iter()
        .map(|c| table.column(c))
        .collect::<Result<_>>()?;
    let m = columns.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| kendall_tau(data[i], data[j]))
        .collect::<Result<Vec<_>>>()?;
    let mut cells = vec![vec![None; m]; m];
    for (&(i, j), v) in pairs.iter().zip(values) {
        // exact 1 on the diagonal wherever the column is not constant
        let v = if i == j { v.map(|_| 1.0) } else { v };
        cells[i][j] = v;
        cells[j][i] = v;
    }
    Ok(CorrelationMatrix {
        names: columns.iter().map(|c| c.to_string()).collect(),
        cells,
    })
}
