use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use calibrex::analysis::{
    boxplot_csv, boxplot_stats, correlation_matrix, size_brackets, BoxplotStats, MetricTable,
};
use calibrex::archspace::benchmark::{load_benchmark, synthetic_benchmark, LoadOptions, SynthMode};
use calibrex::archspace::fingerprint::{canonical_fingerprint, dedupe, semantic_fingerprint};
use calibrex::archspace::search::{run_search, Algorithm, Objective, SearchConfig};
use calibrex::archspace::{enumerate, enumerate_tss, Arch, SearchSpace, TssArch};
use calibrex::predictions::{read_csv_predictions, read_logits_file};
use calibrex::predictions::{PredictionSet, ScoreKind, SplitSpec};
use calibrex::suite::{
    read_records, records_to_jsonl, run_suite, Metric, OodInputs, RecordContext, SuiteConfig,
};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] calibrex::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Parser)]
#[command(name = "calibrex", version, about = "Calibration metrics and calibration-aware architecture search")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Show metric values as percentages in printed summaries and reports.
    #[arg(long, global = true)]
    percent: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the measurement suite on saved predictions.
    Eval(EvalArgs),
    /// Kendall tau-b correlation matrix of table columns.
    Correlate(CorrelateArgs),
    /// Search a tabular benchmark.
    Search(SearchArgs),
    /// List every architecture of a search space.
    Enumerate(EnumerateArgs),
    /// Grouped summary statistics of measurement records.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Bin,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputKind {
    Logits,
    Probs,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceArg {
    Tss,
    Sss,
}

impl From<SpaceArg> for SearchSpace {
    fn from(s: SpaceArg) -> Self {
        match s {
            SpaceArg::Tss => SearchSpace::Tss,
            SpaceArg::Sss => SearchSpace::Sss,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Prediction files, one model each.
    #[arg(long, required = true, num_args = 1..)]
    logits: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "bin")]
    format: InputFormat,
    /// Whether CSV scores are logits or probabilities.
    #[arg(long, value_enum, default_value = "logits")]
    kind: InputKind,
    /// Comma-separated bin counts.
    #[arg(long, value_delimiter = ',', default_value = "5,10,15,20,25,50,100,200,500")]
    bins: Vec<usize>,
    /// Comma-separated metric names (default: all but accuracy).
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<String>,
    /// Also measure after temperature scaling (`--temperature-scale=false` to skip).
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = true, default_missing_value = "true")]
    temperature_scale: bool,
    #[arg(long, default_value_t = 0.2)]
    val_fraction: f64,
    /// Keep class proportions in the validation split.
    #[arg(long)]
    stratified: bool,
    #[arg(long, env = "CALIBREX_SEED", default_value_t = 0)]
    seed: u64,
    /// Confidences on a shifted set sharing the label space, one per line.
    #[arg(long)]
    ood_in: Vec<PathBuf>,
    /// Confidences on a set from another label space, one per line.
    #[arg(long)]
    ood_out: Vec<PathBuf>,
    #[arg(long, default_value = "cifar10")]
    dataset: String,
    #[arg(long, value_enum, default_value = "tss")]
    space: SpaceArg,
    /// Architecture index per model (default: 0, 1, 2, ...).
    #[arg(long, value_delimiter = ',')]
    arch_index: Vec<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorrelateArgs {
    /// Metric table CSV with an `arch_index` column first.
    #[arg(long, conflicts_with = "records", required_unless_present = "records")]
    table: Option<PathBuf>,
    /// JSONL measurement records, pivoted into a table.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Dataset to pivot when reading records.
    #[arg(long)]
    dataset: Option<String>,
    /// Columns to correlate (default: all).
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    #[arg(long, requires = "by")]
    top_k: Option<usize>,
    /// Column ranking rows for --top-k.
    #[arg(long)]
    by: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Re,
    Ls,
    Rs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Acc,
    Ece,
    Hcs,
}

#[derive(Args)]
struct SearchArgs {
    /// Records JSONL, or `synthetic`, `planted:ARCH`, `unimodal:ARCH`.
    #[arg(long)]
    benchmark: String,
    /// Architecture index CSV (default: `<benchmark>.index.csv`).
    #[arg(long)]
    index: Option<PathBuf>,
    /// Seed of a synthetic benchmark.
    #[arg(long, default_value_t = 0)]
    bench_seed: u64,
    #[arg(long)]
    dataset: Option<String>,
    /// Bin count of the ECE records used as the benchmark's ECE.
    #[arg(long, default_value_t = 15)]
    ece_bins: u32,
    #[arg(long, value_enum, default_value = "tss")]
    space: SpaceArg,
    #[arg(long, value_enum, default_value = "re")]
    algo: AlgoArg,
    #[arg(long, value_enum, default_value = "acc")]
    objective: ObjectiveArg,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 500)]
    budget: usize,
    #[arg(long, env = "CALIBREX_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    population: usize,
    #[arg(long, default_value_t = 5)]
    sample: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FingerprintArg {
    Nats,
    Semantic,
}

#[derive(Args)]
struct EnumerateArgs {
    #[arg(long, value_enum, default_value = "tss")]
    space: SpaceArg,
    /// Keep one representative per isomorphism class (TSS only).
    #[arg(long)]
    dedupe: bool,
    #[arg(long, value_enum, default_value = "nats")]
    fingerprint: FingerprintArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupBy {
    #[value(name = "bin_count", alias = "bin-count")]
    BinCount,
    #[value(name = "size_bracket", alias = "size-bracket")]
    SizeBracket,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatArg {
    Boxplot,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long, value_enum, default_value = "bin_count")]
    group_by: GroupBy,
    #[arg(long, value_enum, default_value = "boxplot")]
    stat: StatArg,
    /// Only records of this metric.
    #[arg(long)]
    metric: Option<String>,
    /// Architecture index CSV for size brackets (default: `<records>.index.csv`).
    #[arg(long)]
    index: Option<PathBuf>,
    /// Ascending bracket edges on model size.
    #[arg(long, value_delimiter = ',')]
    brackets: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Writes to a temporary file beside `path` and renames it into place, or
/// prints to stdout when no path is given.
fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    let Some(path) = path else {
        let mut stdout = std::io::stdout().lock();
        return match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
            // the reader went away (`| head`); nothing left to report
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => r.map_err(io_err(Path::new("<stdout>"))),
        };
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(text.as_bytes()).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn sibling_index(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".index.csv");
    PathBuf::from(s)
}

fn read_confidences(path: &Path) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|_| {
                CliError::Usage(format!("{}: line {}: {l:?} is not a number", path.display(), i + 1))
            })
        })
        .collect()
}

fn scale(percent: bool) -> f64 {
    if percent {
        100.0
    } else {
        1.0
    }
}

fn cmd_eval(args: EvalArgs) -> CliResult<()> {
    let n = args.logits.len();
    for (flag, given) in [("--ood-in", &args.ood_in), ("--ood-out", &args.ood_out)] {
        if !given.is_empty() && given.len() != n {
            return Err(CliError::Usage(format!(
                "{flag} given {} times for {n} prediction files",
                given.len()
            )));
        }
    }
    if !args.arch_index.is_empty() && args.arch_index.len() != n {
        return Err(CliError::Usage(format!(
            "--arch-index has {} entries for {n} prediction files",
            args.arch_index.len()
        )));
    }
    let metrics = if args.metrics.is_empty() {
        Metric::default_set()
    } else {
        args.metrics
            .iter()
            .map(|m| m.parse::<Metric>())
            .collect::<Result<_, _>>()?
    };
    let mut bins = args.bins.clone();
    bins.sort_unstable();
    bins.dedup();
    let base = SuiteConfig {
        bin_sizes: bins,
        metrics,
        split: SplitSpec {
            validation_fraction: args.val_fraction,
            seed: args.seed,
            stratified: args.stratified,
        },
        temperature_scale: args.temperature_scale,
        ..SuiteConfig::default()
    };

    let outputs = (0..n)
        .into_par_iter()
        .map(|i| -> CliResult<_> {
            let path = &args.logits[i];
            let preds: PredictionSet = match args.format {
                InputFormat::Bin => read_logits_file(path)?,
                InputFormat::Csv => read_csv_predictions(
                    path,
                    match args.kind {
                        InputKind::Logits => ScoreKind::Logits,
                        InputKind::Probs => ScoreKind::Probabilities,
                    },
                )?,
            };
            let ood = if args.ood_in.is_empty() && args.ood_out.is_empty() {
                None
            } else {
                Some(OodInputs {
                    ood_in: args.ood_in.get(i).map(|p| read_confidences(p)).transpose()?.unwrap_or_default(),
                    ood_out: args.ood_out.get(i).map(|p| read_confidences(p)).transpose()?.unwrap_or_default(),
                })
            };
            let config = SuiteConfig {
                ood_inputs: ood,
                context: RecordContext {
                    benchmark_dataset: args.dataset.clone(),
                    search_space: args.space.into(),
                    arch_index: args.arch_index.get(i).copied().unwrap_or(i as u64),
                },
                ..base.clone()
            };
            Ok(run_suite(&preds, &config)?.records)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let records: Vec<_> = outputs.into_iter().flatten().collect();
    emit(Some(&args.out), &records_to_jsonl(&records)?)?;
    println!("{} records written", records.len());
    Ok(())
}

fn cmd_correlate(args: CorrelateArgs) -> CliResult<()> {
    let table = match (&args.table, &args.records) {
        (Some(t), _) => MetricTable::read_csv(t)?,
        (None, Some(r)) => {
            let records = read_records(r)?;
            let dataset = match &args.dataset {
                Some(d) => d.clone(),
                None => records
                    .first()
                    .map(|r| r.benchmark_dataset.clone())
                    .ok_or_else(|| CliError::Usage("no records".into()))?,
            };
            MetricTable::from_records(&records, &dataset)?
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    let table = match (args.top_k, &args.by) {
        (Some(k), Some(by)) => table.top_k_by(by, k)?,
        _ => table,
    };
    let columns: Vec<&str> = if args.columns.is_empty() {
        table.names().iter().map(String::as_str).collect()
    } else {
        args.columns.iter().map(String::as_str).collect()
    };
    let matrix = correlation_matrix(&table, &columns)?;
    emit(args.out.as_deref(), &matrix.to_csv())
}

fn parse_synth(spec: &str, space: SearchSpace) -> CliResult<Option<SynthMode>> {
    if spec == "synthetic" {
        return Ok(Some(SynthMode::Hashed));
    }
    for (prefix, make) in [
        ("planted:", SynthMode::Planted as fn(Arch) -> SynthMode),
        ("unimodal:", SynthMode::Unimodal),
    ] {
        if let Some(arch) = spec.strip_prefix(prefix) {
            return Ok(Some(make(Arch::parse_in(space, arch)?)));
        }
    }
    Ok(None)
}

fn cmd_search(args: SearchArgs, percent: bool) -> CliResult<()> {
    let space: SearchSpace = args.space.into();
    let bench = match parse_synth(&args.benchmark, space)? {
        Some(mode) => synthetic_benchmark(space, &mode, args.bench_seed)?,
        None => {
            let records = PathBuf::from(&args.benchmark);
            let index = args.index.clone().unwrap_or_else(|| sibling_index(&records));
            let options = LoadOptions {
                dataset: args.dataset.clone(),
                ece_bins: args.ece_bins,
                ..LoadOptions::default()
            };
            let bench = load_benchmark(&records, &index, &options)?;
            if bench.space() != space {
                return Err(CliError::Usage(format!(
                    "benchmark holds {} architectures, but --space is {space}",
                    bench.space()
                )));
            }
            bench
        }
    };
    let config = SearchConfig {
        algorithm: match args.algo {
            AlgoArg::Re => Algorithm::Evolution,
            AlgoArg::Ls => Algorithm::LocalSearch,
            AlgoArg::Rs => Algorithm::Random,
        },
        objective: match args.objective {
            ObjectiveArg::Acc => Objective::Accuracy,
            ObjectiveArg::Ece => Objective::NegEce,
            ObjectiveArg::Hcs => Objective::Hcs { beta: args.beta },
        },
        budget: args.budget,
        seed: args.seed,
        population_size: args.population,
        sample_size: args.sample,
    };
    let result = run_search(&bench, &config)?;
    let mut json = serde_json::to_string_pretty(&result).expect("results always serialise");
    json.push('\n');
    emit(args.out.as_deref(), &json)?;
    if args.out.is_some() {
        println!(
            "best {} value {} after {} evaluations",
            result.best_arch,
            result.best_value * scale(percent),
            result.evaluations
        );
    }
    Ok(())
}

fn cmd_enumerate(args: EnumerateArgs) -> CliResult<()> {
    let space: SearchSpace = args.space.into();
    let archs: Vec<String> = if args.dedupe {
        if space != SearchSpace::Tss {
            return Err(CliError::Usage("--dedupe applies to the tss space only".into()));
        }
        let all = enumerate_tss();
        let kept: Vec<TssArch> = match args.fingerprint {
            FingerprintArg::Nats => dedupe(&all, canonical_fingerprint),
            FingerprintArg::Semantic => dedupe(&all, semantic_fingerprint),
        };
        kept.iter().map(ToString::to_string).collect()
    } else {
        enumerate(space).iter().map(ToString::to_string).collect()
    };
    let mut text = archs.join("\n");
    text.push('\n');
    emit(args.out.as_deref(), &text)?;
    if args.out.is_some() {
        println!("{} architectures written", archs.len());
    }
    Ok(())
}

fn cmd_report(args: ReportArgs, percent: bool) -> CliResult<()> {
    let StatArg::Boxplot = args.stat;
    let k = scale(percent);
    let records: Vec<_> = read_records(&args.records)?
        .into_iter()
        .filter(|r| args.metric.as_ref().is_none_or(|m| &r.metric == m))
        .collect();
    if records.is_empty() {
        return Err(CliError::Usage(format!("{}: no records", args.records.display())));
    }
    let groups: Vec<(String, usize, Option<BoxplotStats>)> = match args.group_by {
        GroupBy::BinCount => {
            let mut by_bins: BTreeMap<Option<u32>, Vec<f64>> = BTreeMap::new();
            for r in &records {
                by_bins.entry(r.bin_count).or_default().push(r.value * k);
            }
            // binned groups ascending, unbinned last
            let mut out = Vec::new();
            let unbinned = by_bins.remove(&None);
            for (bins, values) in by_bins {
                out.push((bins.unwrap().to_string(), values.len(), Some(boxplot_stats(&values)?)));
            }
            if let Some(values) = unbinned {
                out.push(("none".to_string(), values.len(), Some(boxplot_stats(&values)?)));
            }
            out
        }
        GroupBy::SizeBracket => {
            if args.brackets.is_empty() {
                return Err(CliError::Usage("--brackets is required for size_bracket".into()));
            }
            let index_path = args.index.clone().unwrap_or_else(|| sibling_index(&args.records));
            let index = calibrex::archspace::benchmark::read_index(&index_path, Some(SearchSpace::Sss))?;
            let mut sizes = Vec::with_capacity(records.len());
            for r in &records {
                match index.get(&r.arch_index) {
                    Some(Arch::Sss(a)) => sizes.push(f64::from(a.model_size())),
                    _ => {
                        return Err(CliError::Usage(format!(
                            "arch_index {} is not an sss architecture in {}",
                            r.arch_index,
                            index_path.display()
                        )))
                    }
                }
            }
            let table = MetricTable::new(
                records.iter().map(|r| r.arch_index).collect(),
                vec!["model_size".into(), "value".into()],
                vec![sizes, records.iter().map(|r| r.value * k).collect()],
            )?;
            size_brackets(&table, "model_size", "value", &args.brackets)?
                .into_iter()
                .map(|b| (b.label(), b.count, b.stats))
                .collect()
        }
    };
    emit(args.out.as_deref(), &boxplot_csv(&groups))
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Correlate(a) => cmd_correlate(a),
        Command::Search(a) => cmd_search(a, cli.percent),
        Command::Enumerate(a) => cmd_enumerate(a),
        Command::Report(a) => cmd_report(a, cli.percent),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
