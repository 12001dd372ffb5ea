use std::fmt::Write as _;

use serde::Serialize;

use super::table::MetricTable;
use crate::archspace::{TssArch, TssOp};
use crate::error::{Error, Result};

/// Five-number summary; quartiles interpolate linearly between order
/// statistics (R type 7).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxplotStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotStats> {
    if values.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, found: 0 });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("boxplot of non-finite values".into()));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(BoxplotStats {
        min: s[0],
        q1: quantile_sorted(&s, 0.25),
        median: quantile_sorted(&s, 0.5),
        q3: quantile_sorted(&s, 0.75),
        max: s[s.len() - 1],
    })
}

/// Labelled summaries as `group,count,min,q1,median,q3,max`.
pub fn boxplot_csv(groups: &[(String, usize, Option<BoxplotStats>)]) -> String {
    let mut out = String::from("group,count,min,q1,median,q3,max\n");
    for (label, count, stats) in groups {
        match stats {
            Some(s) => {
                let _ = writeln!(
                    out,
                    "{label},{count},{},{},{},{},{}",
                    s.min, s.q1, s.median, s.q3, s.max
                );
            }
            None => {
                let _ = writeln!(out, "{label},{count},,,,,");
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// `None` for an empty bracket.
    pub stats: Option<BoxplotStats>,
}

impl Bracket {
    pub fn label(&self) -> String {
        format!("[{},{})", self.lo, self.hi)
    }
}

/// Groups `value_column` by `size_column` into brackets `[e_i, e_{i+1})`,
/// the last one closed.
pub fn size_brackets(
    table: &MetricTable,
    size_column: &str,
    value_column: &str,
    edges: &[f64],
) -> Result<Vec<Bracket>> {
    if edges.len() < 2 || edges.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
        return Err(Error::param(
            "bracket_edges",
            "need at least two strictly ascending edges",
        ));
    }
    let sizes = table.column(size_column)?;
    let values = table.column(value_column)?;
    let n = edges.len() - 1;
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); n];
    for (row, (&s, &v)) in sizes.iter().zip(values).enumerate() {
        if s < edges[0] || s > edges[n] {
            return Err(Error::InvalidInput(format!(
                "row {row} ({size_column} = {s}) lies outside [{}, {}]",
                edges[0], edges[n]
            )));
        }
        let b = (edges[1..n].partition_point(|&e| e <= s)).min(n - 1);
        groups[b].push(v);
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(b, g)| {
            Ok(Bracket {
                lo: edges[b],
                hi: edges[b + 1],
                count: g.len(),
                stats: if g.is_empty() { None } else { Some(boxplot_stats(&g)?) },
            })
        })
        .collect()
}

/// `counts[edge][op]` over the given cells.
pub fn edge_preference_histogram(archs: &[TssArch]) -> [[usize; 5]; 6] {
    let mut counts = [[0usize; 5]; 6];
    for a in archs {
        for (edge, op) in a.ops.iter().enumerate() {
            counts[edge][op.code()] += 1;
        }
    }
    counts
}

/// `edge,none,skip_connect,...` rows for the histogram.
pub fn edge_preference_csv(counts: &[[usize; 5]; 6]) -> String {
    let mut out = String::from("edge");
    for op in TssOp::ALL {
        out.push(',');
        out.push_str(op.name());
    }
    out.push('\n');
    for (edge, row) in counts.iter().enumerate() {
        let _ = write!(out, "{}", edge + 1);
        for c in row {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
    }
    out
}

/// `arch_index,x,y[,color]` rows for external plotting.
pub fn scatter_csv(table: &MetricTable, x: &str, y: &str, color: Option<&str>) -> Result<String> {
    let xs = table.column(x)?;
    let ys = table.column(y)?;
    let cs = color.map(|c| table.column(c)).transpose()?;
    let mut out = format!("arch_index,{x},{y}");
    if let Some(c) = color {
        let _ = write!(out, ",{c}");
    }
    out.push('\n');
    for (r, idx) in table.arch_index().iter().enumerate() {
        let _ = write!(out, "{idx},{},{}", xs[r], ys[r]);
        if let Some(cs) = cs {
            let _ = write!(out, ",{}", cs[r]);
        }
        out.push('\n');
    }
    Ok(out)
}
