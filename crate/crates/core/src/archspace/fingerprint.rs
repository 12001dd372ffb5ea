//! Isomorphism fingerprints for TSS cells.
//!
//! Two fingerprints are provided:
//!
//! * [`canonical_fingerprint`] follows the NATS-Bench `to_unique_str`
//!   convention: a zero edge, or an edge leaving a node that only carries
//!   zeros, contributes the symbol `#` instead of vanishing; skip edges are
//!   inlined; every node is the sorted `+`-join of its incoming terms. This
//!   yields the 6,466 unique cells usually quoted for the space.
//! * [`semantic_fingerprint`] removes zero contributions entirely, which
//!   merges cells that differ only in dead edges. It yields 4,930 classes and
//!   is strictly coarser.
//!
//! Both are expression strings of the output node, so they do not depend on
//! how intermediate nodes are labelled.

use std::collections::HashMap;

use super::arch::{TssArch, TssOp, TSS_EDGES};

/// NATS-compatible unique string of the cell.
pub fn canonical_fingerprint(arch: &TssArch) -> String {
    let mut nodes: Vec<String> = vec!["0".to_string()];
    for target in 1..4 {
        let mut terms: Vec<String> = TSS_EDGES
            .iter()
            .zip(arch.ops)
            .filter(|((_, t), _)| *t == target)
            .map(|(&(src, _), op)| {
                let input = &nodes[src];
                match op {
                    _ if op == TssOp::Zero || input == "#" => "#".to_string(),
                    TssOp::Skip => input.clone(),
                    _ => format!("({input})@{}", op.name()),
                }
            })
            .collect();
        terms.sort();
        nodes.push(terms.join("+"));
    }
    nodes.pop().unwrap()
}

/// Fully reduced fingerprint: zero edges and dead inputs vanish, skips are
/// flattened into the sum at their target.
pub fn semantic_fingerprint(arch: &TssArch) -> String {
    let mut nodes: Vec<Vec<String>> = vec![vec!["x".to_string()]];
    for target in 1..4 {
        let mut terms = Vec::new();
        for (&(src, t), op) in TSS_EDGES.iter().zip(arch.ops) {
            if t != target || nodes[src].is_empty() {
                continue;
            }
            match op {
                TssOp::Zero => {}
                TssOp::Skip => terms.extend(nodes[src].iter().cloned()),
                _ => terms.push(format!("{}({})", op.name(), nodes[src].join("+"))),
            }
        }
        terms.sort();
        nodes.push(terms);
    }
    let out = nodes.pop().unwrap();
    if out.is_empty() {
        "0".to_string()
    } else {
        out.join("+")
    }
}

/// Groups `archs` by fingerprint; returns the class id of each element,
/// classes numbered by first occurrence.
pub fn classes<F>(archs: &[TssArch], fingerprint: F) -> (Vec<usize>, usize)
where
    F: Fn(&TssArch) -> String,
{
    let mut ids: HashMap<String, usize> = HashMap::new();
    let assignment = archs
        .iter()
        .map(|a| {
            let next = ids.len();
            *ids.entry(fingerprint(a)).or_insert(next)
        })
        .collect();
    (assignment, ids.len())
}

pub fn count_classes<F>(archs: &[TssArch], fingerprint: F) -> usize
where
    F: Fn(&TssArch) -> String,
{
    classes(archs, fingerprint).1
}

/// First representative of every class, in input order.
pub fn dedupe<F>(archs: &[TssArch], fingerprint: F) -> Vec<TssArch>
where
    F: Fn(&TssArch) -> String,
{
    let (assignment, n) = classes(archs, fingerprint);
    let mut seen = vec![false; n];
    archs
        .iter()
        .zip(assignment)
        .filter_map(|(a, c)| (!std::mem::replace(&mut seen[c], true)).then_some(*a))
        .collect()
}

/// The smallest pair `(a, b)`, `a < b`, on which `coarse` agrees but `fine`
/// does not. Useful to explain why two fingerprints count differently.
pub fn first_disagreement<F, G>(archs: &[TssArch], coarse: F, fine: G) -> Option<(TssArch, TssArch)>
where
    F: Fn(&TssArch) -> String,
    G: Fn(&TssArch) -> String,
{
    let mut first: HashMap<String, Vec<(TssArch, String)>> = HashMap::new();
    let mut best: Option<(TssArch, TssArch)> = None;
    for a in archs {
        let f = fine(a);
        let bucket = first.entry(coarse(a)).or_default();
        if let Some((rep, _)) = bucket.iter().find(|(_, g)| *g != f) {
            let pair = if rep < a { (*rep, *a) } else { (*a, *rep) };
            if best.is_none_or(|b| pair < b) {
                best = Some(pair);
            }
        }
        if !bucket.iter().any(|(_, g)| *g == f) {
            bucket.push((*a, f));
        }
    }
    best
}
