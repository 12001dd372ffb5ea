//! Black-box search over a tabular benchmark: random search, regularized
//! evolution and best-improvement local search.
//!
//! Every query counts against the budget, including repeated queries of the
//! same architecture; repeated queries are answered from a memo table.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arch::Arch;
use super::benchmark::{BenchEntry, TabularBenchmark};
use crate::analysis::hcs;
use crate::error::{Error, Result};

/// Quantity to maximise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Accuracy,
    /// `-ECE`, so lower calibration error scores higher.
    NegEce,
    Hcs { beta: f64 },
}

impl Objective {
    pub fn value(&self, e: &BenchEntry) -> Result<f64> {
        match *self {
            Objective::Accuracy => Ok(e.accuracy),
            Objective::NegEce => Ok(-e.ece),
            Objective::Hcs { beta } => hcs(e.accuracy, e.ece, beta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Random,
    Evolution,
    LocalSearch,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Random => "random",
            Algorithm::Evolution => "re",
            Algorithm::LocalSearch => "ls",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" | "rs" => Ok(Algorithm::Random),
            "re" | "evolution" => Ok(Algorithm::Evolution),
            "ls" | "local" => Ok(Algorithm::LocalSearch),
            _ => Err(Error::InvalidInput(format!("unknown search algorithm `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    pub objective: Objective,
    pub budget: usize,
    pub seed: u64,
    pub population_size: usize,
    pub sample_size: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Evolution,
            objective: Objective::Accuracy,
            budget: 500,
            seed: 0,
            population_size: 20,
            sample_size: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub arch: String,
    pub value: f64,
    /// Best value seen so far, including this query.
    pub best_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_arch: String,
    pub best_value: f64,
    pub evaluations: usize,
    pub trajectory: Vec<TrajectoryPoint>,
}

/// Budgeted, memoised objective lookups.
struct Evaluator<'a> {
    bench: &'a TabularBenchmark,
    objective: Objective,
    budget: usize,
    memo: HashMap<Arch, f64>,
    best: Option<(Arch, f64)>,
    trajectory: Vec<TrajectoryPoint>,
}

impl<'a> Evaluator<'a> {
    fn new(bench: &'a TabularBenchmark, objective: Objective, budget: usize) -> Self {
        Self {
            bench,
            objective,
            budget,
            memo: HashMap::new(),
            best: None,
            trajectory: Vec::with_capacity(budget),
        }
    }

    fn remaining(&self) -> usize {
        self.budget - self.trajectory.len()
    }

    fn evaluate(&mut self, arch: Arch) -> Result<f64> {
        debug_assert!(self.remaining() > 0);
        let value = match self.memo.get(&arch) {
            Some(&v) => v,
            None => {
                let v = self.objective.value(&self.bench.get(&arch)?)?;
                self.memo.insert(arch, v);
                v
            }
        };
        if self.best.is_none_or(|(_, b)| value > b) {
            self.best = Some((arch, value));
        }
        self.trajectory.push(TrajectoryPoint {
            arch: arch.to_string(),
            value,
            best_value: self.best.unwrap().1,
        });
        Ok(value)
    }

    fn finish(self) -> SearchResult {
        let (arch, value) = self.best.expect("at least one evaluation");
        SearchResult {
            best_arch: arch.to_string(),
            best_value: value,
            evaluations: self.trajectory.len(),
            trajectory: self.trajectory,
        }
    }
}

fn check_common(bench: &TabularBenchmark, config: &SearchConfig) -> Result<()> {
    if config.budget == 0 {
        return Err(Error::param("budget", "must be positive"));
    }
    if config.budget > bench.len() && config.algorithm == Algorithm::Random {
        return Err(Error::Exhausted(format!(
            "budget {} exceeds the {} architectures available",
            config.budget,
            bench.len()
        )));
    }
    Ok(())
}

/// Uniform sampling without replacement.
pub fn random_search(bench: &TabularBenchmark, config: &SearchConfig) -> Result<SearchResult> {
    check_common(bench, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut eval = Evaluator::new(bench, config.objective, config.budget);
    for i in sample(&mut rng, bench.len(), config.budget) {
        eval.evaluate(bench.archs()[i])?;
    }
    Ok(eval.finish())
}

/// Regularized (aging) evolution.
///
/// The initial population is drawn exactly like random search, so a budget
/// equal to the population size reproduces random search for the same seed.
pub fn regularized_evolution(bench: &TabularBenchmark, config: &SearchConfig) -> Result<SearchResult> {
    check_common(bench, config)?;
    let (p, s) = (config.population_size, config.sample_size);
    if p == 0 || s == 0 || s > p {
        return Err(Error::param(
            "sample_size",
            format!("need 1 <= sample ({s}) <= population ({p})"),
        ));
    }
    if p > config.budget {
        return Err(Error::param(
            "population_size",
            format!("population {p} exceeds budget {}", config.budget),
        ));
    }
    if p > bench.len() {
        return Err(Error::Exhausted(format!(
            "population {p} exceeds the {} architectures available",
            bench.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut eval = Evaluator::new(bench, config.objective, config.budget);
    let mut population = VecDeque::with_capacity(p);
    for i in sample(&mut rng, bench.len(), p) {
        let arch = bench.archs()[i];
        population.push_back((arch, eval.evaluate(arch)?));
    }
    while eval.remaining() > 0 {
        let mut parent: Option<(Arch, f64)> = None;
        for i in sample(&mut rng, population.len(), s) {
            let candidate = population[i];
            if parent.is_none_or(|(_, v)| candidate.1 > v) {
                parent = Some(candidate);
            }
        }
        let child = parent.unwrap().0.mutate(&mut rng);
        let value = eval.evaluate(child)?;
        population.push_back((child, value));
        population.pop_front();
    }
    Ok(eval.finish())
}

/// Best-improvement hill climbing from a random start.
///
/// Each step scores the full neighbourhood and moves to its best member if
/// that is strictly better; the search stops at a local optimum or when the
/// budget runs out.
pub fn local_search(bench: &TabularBenchmark, config: &SearchConfig) -> Result<SearchResult> {
    check_common(bench, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut eval = Evaluator::new(bench, config.objective, config.budget);
    let start = bench.archs()[sample(&mut rng, bench.len(), 1).index(0)];
    let mut current = (start, eval.evaluate(start)?);
    'outer: loop {
        let mut best_move: Option<(Arch, f64)> = None;
        for n in current.0.neighbors() {
            if eval.remaining() == 0 {
                break 'outer;
            }
            let v = eval.evaluate(n)?;
            if best_move.is_none_or(|(_, b)| v > b) {
                best_move = Some((n, v));
            }
        }
        match best_move {
            Some(m) if m.1 > current.1 => current = m,
            _ => break,
        }
    }
    Ok(eval.finish())
}

pub fn run_search(bench: &TabularBenchmark, config: &SearchConfig) -> Result<SearchResult> {
    match config.algorithm {
        Algorithm::Random => random_search(bench, config),
        Algorithm::Evolution => regularized_evolution(bench, config),
        Algorithm::LocalSearch => local_search(bench, config),
    }
}
