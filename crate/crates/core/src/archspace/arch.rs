//! Architecture encodings for the topology (TSS) and size (SSS) spaces.
//!
//! A TSS cell is a complete DAG on four ordered nodes; its six edges are
//! stored in the order `(0,1) (0,2) (1,2) (0,3) (1,3) (2,3)`, which is also
//! the order of the NATS string `|op~0|+|op~0|op~1|+|op~0|op~1|op~2|`.
//! An SSS architecture is five layer widths written `c0:c1:c2:c3:c4`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchSpace {
    Tss,
    Sss,
}

impl SearchSpace {
    pub fn size(self) -> usize {
        match self {
            SearchSpace::Tss => TSS_SIZE,
            SearchSpace::Sss => SSS_SIZE,
        }
    }
}

impl fmt::Display for SearchSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchSpace::Tss => "tss",
            SearchSpace::Sss => "sss",
        })
    }
}

impl FromStr for SearchSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tss" => Ok(SearchSpace::Tss),
            "sss" => Ok(SearchSpace::Sss),
            _ => Err(Error::InvalidInput(format!("unknown search space `{s}`"))),
        }
    }
}

/// Cell operations, ordered as in NATS-Bench.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TssOp {
    Zero = 0,
    Skip = 1,
    Conv1x1 = 2,
    Conv3x3 = 3,
    AvgPool3x3 = 4,
}

impl TssOp {
    pub const ALL: [TssOp; 5] = [
        TssOp::Zero,
        TssOp::Skip,
        TssOp::Conv1x1,
        TssOp::Conv3x3,
        TssOp::AvgPool3x3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TssOp::Zero => "none",
            TssOp::Skip => "skip_connect",
            TssOp::Conv1x1 => "nor_conv_1x1",
            TssOp::Conv3x3 => "nor_conv_3x3",
            TssOp::AvgPool3x3 => "avg_pool_3x3",
        }
    }

    pub fn code(self) -> usize {
        self as usize
    }

    fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.name() == name)
    }
}

/// `(source, target)` for each edge slot.
pub const TSS_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3)];
pub const TSS_SIZE: usize = 15_625;
pub const SSS_CHANNELS: [u16; 8] = [8, 16, 24, 32, 40, 48, 56, 64];
pub const SSS_SIZE: usize = 32_768;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TssArch {
    pub ops: [TssOp; 6],
}

impl TssArch {
    pub fn new(ops: [TssOp; 6]) -> Self {
        Self { ops }
    }

    /// Position in [`enumerate_tss`] (base-5 digits, edge 0 most significant).
    pub fn index(&self) -> usize {
        self.ops.iter().fold(0, |acc, op| acc * 5 + op.code())
    }

    pub fn from_index(mut index: usize) -> Option<Self> {
        if index >= TSS_SIZE {
            return None;
        }
        let mut ops = [TssOp::Zero; 6];
        for slot in ops.iter_mut().rev() {
            *slot = TssOp::ALL[index % 5];
            index /= 5;
        }
        Some(Self { ops })
    }
}

impl fmt::Display for TssArch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut slot = 0;
        for node in 1..4 {
            if node > 1 {
                f.write_str("+")?;
            }
            f.write_str("|")?;
            for source in 0..node {
                write!(f, "{}~{source}|", self.ops[slot].name())?;
                slot += 1;
            }
        }
        Ok(())
    }
}

fn arch_err(position: usize, message: impl Into<String>) -> Error {
    Error::ParseArch {
        position,
        message: message.into(),
    }
}

impl FromStr for TssArch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut ops = [TssOp::Zero; 6];
        let mut slot = 0;
        let mut offset = 0;
        let groups: Vec<&str> = s.split('+').collect();
        if groups.len() != 3 {
            return Err(arch_err(0, format!("expected 3 node groups, found {}", groups.len())));
        }
        for (node, group) in (1..4).zip(&groups) {
            if !group.starts_with('|') || !group.ends_with('|') || group.len() < 2 {
                return Err(arch_err(offset, "node group must be wrapped in `|`"));
            }
            let inner = &group[1..group.len() - 1];
            let tokens: Vec<&str> = inner.split('|').collect();
            if tokens.len() != node {
                return Err(arch_err(
                    offset,
                    format!("node {node} needs {node} inputs, found {}", tokens.len()),
                ));
            }
            let mut pos = offset + 1;
            for (source, token) in tokens.iter().enumerate() {
                let (name, input) = token
                    .split_once('~')
                    .ok_or_else(|| arch_err(pos, format!("expected `op~{source}`, found {token:?}")))?;
                let op = TssOp::from_name(name)
                    .ok_or_else(|| arch_err(pos, format!("unknown operation {name:?}")))?;
                if input != source.to_string() {
                    return Err(arch_err(
                        pos + name.len() + 1,
                        format!("expected input {source}, found {input:?}"),
                    ));
                }
                ops[slot] = op;
                slot += 1;
                pos += token.len() + 1;
            }
            offset += group.len() + 1;
        }
        Ok(Self { ops })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SssArch {
    pub channels: [u16; 5],
}

impl SssArch {
    pub fn new(channels: [u16; 5]) -> Result<Self> {
        for (i, c) in channels.iter().enumerate() {
            if !SSS_CHANNELS.contains(c) {
                return Err(Error::InvalidInput(format!(
                    "layer {i} width {c} is not one of {SSS_CHANNELS:?}"
                )));
            }
        }
        Ok(Self { channels })
    }

    /// Total number of kernels over the five layers.
    pub fn model_size(&self) -> u32 {
        self.channels.iter().map(|&c| u32::from(c)).sum()
    }

    /// Position in [`enumerate_sss`] (base-8 digits, layer 0 most significant).
    pub fn index(&self) -> usize {
        self.channels
            .iter()
            .fold(0, |acc, &c| acc * 8 + (c as usize / 8 - 1))
    }

    pub fn from_index(mut index: usize) -> Option<Self> {
        if index >= SSS_SIZE {
            return None;
        }
        let mut channels = [0u16; 5];
        for slot in channels.iter_mut().rev() {
            *slot = SSS_CHANNELS[index % 8];
            index /= 8;
        }
        Some(Self { channels })
    }
}

impl fmt::Display for SssArch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d, e] = self.channels;
        write!(f, "{a}:{b}:{c}:{d}:{e}")
    }
}

impl FromStr for SssArch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut channels = [0u16; 5];
        let mut pos = 0;
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 5 {
            return Err(arch_err(0, format!("expected 5 widths, found {}", parts.len())));
        }
        for (slot, part) in channels.iter_mut().zip(&parts) {
            let v: u16 = part
                .parse()
                .map_err(|_| arch_err(pos, format!("{part:?} is not a width")))?;
            if !SSS_CHANNELS.contains(&v) {
                return Err(arch_err(pos, format!("width {v} is not one of {SSS_CHANNELS:?}")));
            }
            *slot = v;
            pos += part.len() + 1;
        }
        Ok(Self { channels })
    }
}

/// An element of either search space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arch {
    Tss(TssArch),
    Sss(SssArch),
}

impl Arch {
    pub fn space(&self) -> SearchSpace {
        match self {
            Arch::Tss(_) => SearchSpace::Tss,
            Arch::Sss(_) => SearchSpace::Sss,
        }
    }

    pub fn index(&self) -> usize {
        match self {
            Arch::Tss(a) => a.index(),
            Arch::Sss(a) => a.index(),
        }
    }

    /// Per-position codes, used for Hamming distances.
    pub fn codes(&self) -> Vec<usize> {
        match self {
            Arch::Tss(a) => a.ops.iter().map(|op| op.code()).collect(),
            Arch::Sss(a) => a.channels.iter().map(|&c| c as usize).collect(),
        }
    }

    pub fn hamming(&self, other: &Arch) -> usize {
        self.codes()
            .iter()
            .zip(other.codes())
            .filter(|(a, b)| **a != *b)
            .count()
    }

    pub fn parse_in(space: SearchSpace, s: &str) -> Result<Self> {
        match space {
            SearchSpace::Tss => s.parse().map(Arch::Tss),
            SearchSpace::Sss => s.parse().map(Arch::Sss),
        }
    }

    /// All architectures differing in exactly one position, in a fixed
    /// order (position-major, then ascending replacement).
    pub fn neighbors(&self) -> Vec<Arch> {
        match self {
            Arch::Tss(a) => {
                let mut out = Vec::with_capacity(24);
                for edge in 0..6 {
                    for op in TssOp::ALL {
                        if op != a.ops[edge] {
                            let mut ops = a.ops;
                            ops[edge] = op;
                            out.push(Arch::Tss(TssArch { ops }));
                        }
                    }
                }
                out
            }
            Arch::Sss(a) => {
                let mut out = Vec::with_capacity(35);
                for layer in 0..5 {
                    for c in SSS_CHANNELS {
                        if c != a.channels[layer] {
                            let mut channels = a.channels;
                            channels[layer] = c;
                            out.push(Arch::Sss(SssArch { channels }));
                        }
                    }
                }
                out
            }
        }
    }

    /// Uniform draw among the single-position changes.
    pub fn mutate<R: Rng + ?Sized>(&self, rng: &mut R) -> Arch {
        match self {
            Arch::Tss(a) => {
                let edge = rng.gen_range(0..6);
                let current = a.ops[edge].code();
                let r = rng.gen_range(0..4);
                let mut ops = a.ops;
                ops[edge] = TssOp::ALL[if r >= current { r + 1 } else { r }];
                Arch::Tss(TssArch { ops })
            }
            Arch::Sss(a) => {
                let layer = rng.gen_range(0..5);
                let current = a.channels[layer] as usize / 8 - 1;
                let r = rng.gen_range(0..7);
                let mut channels = a.channels;
                channels[layer] = SSS_CHANNELS[if r >= current { r + 1 } else { r }];
                Arch::Sss(SssArch { channels })
            }
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arch::Tss(a) => a.fmt(f),
            Arch::Sss(a) => a.fmt(f),
        }
    }
}

impl FromStr for Arch {
    type Err = Error;

    /// TSS strings start with `|`; anything else is read as SSS.
    fn from_str(s: &str) -> Result<Self> {
        if s.starts_with('|') {
            s.parse().map(Arch::Tss)
        } else {
            s.parse().map(Arch::Sss)
        }
    }
}

/// All 15,625 cells, lexicographic in op codes.
pub fn enumerate_tss() -> Vec<TssArch> {
    (0..TSS_SIZE).map(|i| TssArch::from_index(i).unwrap()).collect()
}

/// All 32,768 width configurations, lexicographic in channels.
pub fn enumerate_sss() -> Vec<SssArch> {
    (0..SSS_SIZE).map(|i| SssArch::from_index(i).unwrap()).collect()
}

pub fn enumerate(space: SearchSpace) -> Vec<Arch> {
    match space {
        SearchSpace::Tss => enumerate_tss().into_iter().map(Arch::Tss).collect(),
        SearchSpace::Sss => enumerate_sss().into_iter().map(Arch::Sss).collect(),
    }
}
