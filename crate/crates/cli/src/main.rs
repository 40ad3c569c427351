mod manifest;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use archgraph::bench::{
    default_synthetic_tasks, gen_synthetic, kendall_tau, pearson, spearman, BenchError, BudgetCaps, BudgetLedger,
    Direction, SynthTask, TabularBenchmark, MICRO_NODE_COUNT, MICRO_OP_VOCAB,
};
use archgraph::graph::{format_edge_list, parse_edge_list, GraphError};
use archgraph::mwas::{mwas_approx, mwas_bruteforce, MwasError};
use archgraph::predictor::{PairScorer, PredictorError, PredictorState};
use archgraph::rng::derive_seed;
use archgraph::search::{
    arch_graph_search, coarse_rank, finetune_on_target, long_csv, pretrain_source, reference_from_judge,
    run_experiment, trust_weighted_graph, Method, SearchConfig, SearchError, SubsetJudge,
};
use archgraph::trust::TrustError;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use manifest::{Outputs, RunManifest};

/// Relation-graph architecture search on tabular benchmarks.
///
/// Exit codes: 0 success, 1 output failure, 2 configuration error, 3 data error.
#[derive(Debug, Parser)]
#[command(name = "archgraph", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Root seed; overrides `seed` from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML file with search configuration keys (m, b_f, b_v, p, top_k,
    /// source_task, target_task, seed, [mwas], [trust], [train]).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Primary output file; stdout when absent. Sidecars and the run
    /// manifest are written next to it.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic benchmark in JSON-lines format.
    GenSynth {
        /// Number of architectures; the full space when equal to its size.
        #[arg(long, default_value_t = 4096)]
        n: usize,
        #[arg(long, default_value_t = MICRO_NODE_COUNT)]
        nodes: usize,
        #[arg(long, default_value_t = MICRO_OP_VOCAB)]
        ops: usize,
        /// Standard deviation of Gaussian metric noise.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Comma-separated `name:max|min:corr` entries; the first is the
        /// reference task. Defaults to a source task and three targets.
        #[arg(long)]
        tasks: Option<String>,
    },
    /// Train the pairwise predictor on the source task and write a checkpoint.
    Pretrain {
        #[arg(long, value_name = "FILE")]
        bench: PathBuf,
    },
    /// Run one search on the target task; writes a method,task,metric,value,seed CSV.
    Search {
        #[arg(long, value_name = "FILE")]
        bench: PathBuf,
        #[arg(long, default_value = "arch-graph")]
        method: Method,
        /// Target task; overrides `target_task` from the config.
        #[arg(long)]
        target: Option<String>,
        /// Pretrained checkpoint; skips source pretraining.
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
    },
    /// Run every (method, target task, seed) combination. Writes one
    /// best_true_rank row per run, plus summary and details sidecars.
    Experiment {
        /// Benchmark file; the default synthetic benchmark generated from
        /// `--seed` when absent.
        #[arg(long, value_name = "FILE")]
        bench: Option<PathBuf>,
        /// Comma-separated methods.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "arch-graph,arch-graph-zero,arch-graph-single,random-search"
        )]
        methods: Vec<Method>,
        /// Seed list: `a..b` (inclusive), `a..=b`, or comma-separated values.
        #[arg(long, default_value = "1..20")]
        seeds: SeedList,
    },
    /// Extract a maximal weighted acyclic subgraph from an edge-list file.
    Mwas {
        #[arg(value_name = "FILE")]
        graph: PathBuf,
        /// Drop-ratio threshold.
        #[arg(long)]
        eps: Option<f64>,
        /// Exhaustive search instead of the approximation.
        #[arg(long)]
        brute_force: bool,
    },
    /// Kendall tau, Pearson and Spearman correlations, as one JSON line.
    Metrics {
        #[command(flatten)]
        input: MetricsInput,
    },
    /// Build the trust-weighted relation graph over the coarse top-k
    /// candidates of the target task; writes an edge list.
    BuildGraph {
        #[arg(long, value_name = "FILE")]
        bench: PathBuf,
        #[arg(long)]
        target: Option<String>,
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        top_k: Option<usize>,
        /// Fraction of reference points filtered per class.
        #[arg(long)]
        trust_alpha: Option<f64>,
        /// Neighbours for the density filter.
        #[arg(long)]
        trust_k: Option<usize>,
        /// Upper bound on a single trust score.
        #[arg(long)]
        trust_cap: Option<f64>,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = true)]
struct MetricsInput {
    /// Benchmark file; correlates the two tasks named by `--tasks`.
    #[arg(long, value_name = "FILE", requires = "tasks", conflicts_with = "csv")]
    bench: Option<PathBuf>,
    /// Two comma-separated task names.
    #[arg(long, value_delimiter = ',')]
    tasks: Vec<String>,
    /// CSV file with a header; correlates the columns named by `--x` and `--y`.
    #[arg(long, value_name = "FILE", requires_all = ["x", "y"])]
    csv: Option<PathBuf>,
    #[arg(long)]
    x: Option<String>,
    #[arg(long)]
    y: Option<String>,
}

#[derive(Debug, Clone)]
struct SeedList(Vec<u64>);

impl std::str::FromStr for SeedList {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("bad seed {t:?}: {e}"));
        let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
            let (lo, hi) = (num(a)?, num(b.strip_prefix('=').unwrap_or(b))?);
            if lo > hi {
                return Err(format!("empty seed range {s}"));
            }
            (lo..=hi).collect()
        } else {
            s.split(',').map(num).collect::<std::result::Result<_, _>>()?
        };
        if seeds.is_empty() {
            return Err("no seeds".into());
        }
        Ok(SeedList(seeds))
    }
}

/// Invalid flag or config value detected by the front end.
#[derive(Debug)]
struct ConfigError(String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Input data that cannot be read or does not satisfy a module contract.
#[derive(Debug)]
struct DataError(String);

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() || cause.is::<toml::de::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<SearchError>() {
            return if matches!(e, SearchError::Config(_)) { 2 } else { 3 };
        }
        if let Some(e) = cause.downcast_ref::<MwasError>() {
            return if matches!(e, MwasError::InvalidParams(_)) { 2 } else { 3 };
        }
        if let Some(e) = cause.downcast_ref::<PredictorError>() {
            return if matches!(e, PredictorError::InvalidConfig(_)) { 2 } else { 3 };
        }
        if let Some(e) = cause.downcast_ref::<BenchError>() {
            return if matches!(e, BenchError::InvalidParam(_)) { 2 } else { 3 };
        }
        if cause.is::<DataError>() || cause.is::<GraphError>() || cause.is::<TrustError>() {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn read_input(path: &Path, manifest: &mut RunManifest) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| DataError(format!("reading {}: {e}", path.display())))?;
    manifest.add_input(path, &bytes);
    Ok(bytes)
}

fn read_text(path: &Path, manifest: &mut RunManifest) -> Result<String> {
    String::from_utf8(read_input(path, manifest)?)
        .map_err(|_| DataError(format!("{} is not UTF-8", path.display())).into())
}

fn load_config(global: &Global) -> Result<(SearchConfig, Option<(PathBuf, Vec<u8>)>)> {
    let (mut cfg, raw) = match &global.config {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| config_error(format!("reading {}: {e}", path.display())))?;
            let text = std::str::from_utf8(&bytes).map_err(|_| config_error("config is not UTF-8"))?;
            let cfg: SearchConfig = toml::from_str(text).with_context(|| format!("parsing {}", path.display()))?;
            (cfg, Some((path.clone(), bytes)))
        }
        None => (SearchConfig::default(), None),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    Ok((cfg, raw))
}

fn load_bench(path: &Path, manifest: &mut RunManifest) -> Result<TabularBenchmark> {
    let text = read_text(path, manifest)?;
    TabularBenchmark::from_jsonl(&text).with_context(|| format!("loading {}", path.display()))
}

fn parse_tasks(spec: &str) -> Result<Vec<SynthTask>> {
    spec.split(',')
        .map(|entry| {
            let parts: Vec<&str> = entry.trim().split(':').collect();
            let [name, dir, corr] = parts[..] else {
                return Err(config_error(format!("task {entry:?} is not name:max|min:corr")));
            };
            let direction = match dir {
                "max" => Direction::Max,
                "min" => Direction::Min,
                _ => return Err(config_error(format!("task {name}: direction {dir:?} is not max or min"))),
            };
            let corr = corr.parse::<f64>().map_err(|e| config_error(format!("task {name}: corr {corr:?}: {e}")))?;
            Ok(SynthTask::new(name, direction, corr))
        })
        .collect()
}

#[derive(Serialize)]
struct Correlations {
    n: usize,
    kendall_tau: f64,
    pearson: f64,
    spearman: f64,
}

fn correlations(a: &[f64], b: &[f64]) -> Result<Correlations> {
    Ok(Correlations { n: a.len(), kendall_tau: kendall_tau(a, b)?, pearson: pearson(a, b)?, spearman: spearman(a, b)? })
}

fn csv_columns(text: &str, x: &str, y: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| DataError(format!("CSV header: {e}")))?.clone();
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| config_error(format!("no column {name:?} in CSV header")))
    };
    let (ix, iy) = (col(x)?, col(y)?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| DataError(format!("CSV row {}: {e}", k + 2)))?;
        let get = |i: usize| -> Result<f64> {
            let f = rec.get(i).unwrap_or_default();
            f.parse().map_err(|e| DataError(format!("CSV row {}: {f:?}: {e}", k + 2)).into())
        };
        xs.push(get(ix)?);
        ys.push(get(iy)?);
    }
    Ok((xs, ys))
}

fn run(cli: Cli) -> Result<()> {
    let (mut cfg, raw_config) = load_config(&cli.global)?;
    let jobs = cli.global.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(config_error("--jobs must be positive"));
    }
    let mut out = Outputs::new(cli.global.out.clone());
    let name = match &cli.command {
        Command::GenSynth { .. } => "gen-synth",
        Command::Pretrain { .. } => "pretrain",
        Command::Search { .. } => "search",
        Command::Experiment { .. } => "experiment",
        Command::Mwas { .. } => "mwas",
        Command::Metrics { .. } => "metrics",
        Command::BuildGraph { .. } => "build-graph",
    };
    let mut manifest = RunManifest::new(name, &cfg, vec![cfg.seed]);
    if let Some((path, bytes)) = &raw_config {
        manifest.add_input(path, bytes);
    }

    match cli.command {
        Command::GenSynth { n, nodes, ops, noise, tasks } => {
            let tasks = match tasks {
                Some(spec) => parse_tasks(&spec)?,
                None => default_synthetic_tasks(),
            };
            let bench = gen_synthetic(n, nodes, ops, &tasks, noise, cfg.seed)?;
            out.primary(bench.to_jsonl());
        }
        Command::Pretrain { bench } => {
            let b = load_bench(&bench, &mut manifest)?;
            let (state, _) = pretrain_source(&b, &cfg, derive_seed(cfg.seed, "pretrain"))?;
            out.primary(state.to_json());
        }
        Command::Search { bench, method, target, checkpoint } => {
            if let Some(t) = target {
                cfg.target_task = t;
            }
            let b = load_bench(&bench, &mut manifest)?;
            let pretrained = match &checkpoint {
                Some(p) => Some(PredictorState::from_json(&read_text(p, &mut manifest)?)?),
                None => None,
            };
            let mut res = arch_graph_search(&b, &cfg, method, pretrained.as_ref())?;
            if pretrained.is_some() && method.uses_source() {
                res.source_evaluations = cfg.m;
            }
            out.primary(long_csv(std::slice::from_ref(&res)));
        }
        Command::Experiment { bench, methods, seeds } => {
            let b = match &bench {
                Some(p) => load_bench(p, &mut manifest)?,
                None => gen_synthetic(
                    MICRO_OP_VOCAB.pow(MICRO_NODE_COUNT as u32),
                    MICRO_NODE_COUNT,
                    MICRO_OP_VOCAB,
                    &default_synthetic_tasks(),
                    0.0,
                    cfg.seed,
                )?,
            };
            manifest.seeds = seeds.0.clone();
            let report = run_experiment(&b, &methods, &seeds.0, &cfg, jobs)?;
            out.primary(report.to_csv());
            out.sidecar("summary.csv", report.summary_csv());
            out.sidecar("details.csv", report.details_csv());
        }
        Command::Mwas { graph, eps, brute_force } => {
            let text = read_text(&graph, &mut manifest)?;
            let g = parse_edge_list(&text, 0)?;
            if let Some(e) = eps {
                cfg.mwas.eps = e;
            }
            manifest.config = cfg.clone();
            let res = if brute_force {
                cfg.mwas.validate()?;
                mwas_bruteforce(&g, cfg.mwas.eps)?
            } else {
                mwas_approx(&g, &cfg.mwas, cfg.seed)?
            };
            let summary = serde_json::to_string(&res.summary())?;
            out.primary(format!("{}{summary}\n", format_edge_list(&res.subgraph)));
        }
        Command::Metrics { input } => {
            let (a, b) = if let Some(path) = &input.bench {
                let [first, second] = &input.tasks[..] else {
                    bail!(config_error("--tasks needs exactly two task names"));
                };
                let bench = load_bench(path, &mut manifest)?;
                let ta = bench.task_index(first)?;
                let tb = bench.task_index(second)?;
                (bench.metrics[ta].clone(), bench.metrics[tb].clone())
            } else if let Some(path) = &input.csv {
                let text = read_text(path, &mut manifest)?;
                csv_columns(&text, input.x.as_deref().unwrap_or_default(), input.y.as_deref().unwrap_or_default())?
            } else {
                bail!(config_error("metrics needs --bench or --csv"));
            };
            out.primary(serde_json::to_string(&correlations(&a, &b)?)? + "\n");
        }
        Command::BuildGraph { bench, target, checkpoint, top_k, trust_alpha, trust_k, trust_cap } => {
            if let Some(t) = target {
                cfg.target_task = t;
            }
            if let Some(k) = top_k {
                cfg.top_k = k;
                cfg.p = cfg.p.min(k);
            }
            cfg.trust.alpha = trust_alpha.unwrap_or(cfg.trust.alpha);
            cfg.trust.k = trust_k.unwrap_or(cfg.trust.k);
            cfg.trust.t_max = trust_cap.unwrap_or(cfg.trust.t_max);
            cfg.validate()?;
            manifest.config = cfg.clone();
            let b = load_bench(&bench, &mut manifest)?;
            let start = match &checkpoint {
                Some(p) => PredictorState::from_json(&read_text(p, &mut manifest)?)?,
                None => pretrain_source(&b, &cfg, derive_seed(cfg.seed, "pretrain"))?.0,
            };
            let target = b.task_index(&cfg.target_task)?;
            let run_seed = archgraph::rng::derive_seed_parts(cfg.seed, &["run", &cfg.target_task]);
            let mut ledger = BudgetLedger::new(BudgetCaps { finetune: cfg.b_f + cfg.b_v, ..BudgetCaps::default() });
            let fit = finetune_on_target(&b, &cfg, target, &start, None, &mut ledger, run_seed)?;
            let spec = &b.tasks[target];
            let scorer = PairScorer::new(&fit.state, &b.archs, &spec.embedding.vec)?;
            let reference = reference_from_judge(&scorer, &[fit.train, fit.val], spec.direction, &cfg.trust)?;
            let coarse = coarse_rank(&scorer, run_seed);
            let top = &coarse[..cfg.top_k.min(coarse.len())];
            let g = trust_weighted_graph(&SubsetJudge { inner: &scorer, idx: top }, &reference, cfg.trust.t_max)?;
            let mut text = format_edge_list(&g);
            for (node, &arch) in top.iter().enumerate() {
                text.push_str(&format!("# node {node} {}\n", b.ids[arch]));
            }
            out.primary(text);
        }
    }
    out.finish(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!("1..3".parse::<SeedList>().unwrap().0, vec![1, 2, 3]);
        assert_eq!("1..=2".parse::<SeedList>().unwrap().0, vec![1, 2]);
        assert_eq!("4,9".parse::<SeedList>().unwrap().0, vec![4, 9]);
        assert!("3..1".parse::<SeedList>().is_err());
        assert!("x".parse::<SeedList>().is_err());
    }

    #[test]
    fn task_specs() {
        let t = parse_tasks("s:max:1,t:min:0.5").unwrap();
        assert_eq!(t[1], SynthTask::new("t", Direction::Min, 0.5));
        assert!(parse_tasks("s:up:1").is_err());
    }

    #[test]
    fn csv_column_extraction() {
        let (x, y) = csv_columns("a,b,c\n1,2,3\n4,5,6\n", "c", "a").unwrap();
        assert_eq!((x, y), (vec![3.0, 6.0], vec![1.0, 4.0]));
        assert!(csv_columns("a,b\n1,2\n", "a", "z").is_err());
    }
}
