use rayon::prelude::*;
use serde::Serialize;

use super::pipeline::{arch_graph_search, pretrain_source};
use super::{Method, Result, SearchConfig, SearchError, SearchResult};
use crate::bench::TabularBenchmark;
use crate::predictor::PredictorState;
use crate::rng::derive_seed;

/// Task label of the per-method average over target tasks.
pub const AVERAGE_TASK: &str = "average";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: Method,
    pub task: String,
    pub runs: usize,
    pub mean_rank: f64,
    /// Unbiased sample variance; 0 for a single run.
    pub var_rank: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    /// Ordered by method (as requested), then target task, then seed.
    pub results: Vec<SearchResult>,
    pub summary: Vec<SummaryRow>,
}

#[derive(Serialize)]
struct MainRow<'a> {
    method: Method,
    task: &'a str,
    metric: &'static str,
    value: f64,
    seed: u64,
}

#[derive(Serialize)]
struct DetailRow<'a> {
    method: Method,
    task: &'a str,
    seed: u64,
    best_arch: &'a str,
    best_metric: f64,
    best_true_rank: usize,
    target_evaluations: usize,
    source_evaluations: usize,
    val_acc: Option<f64>,
    coarse_tau: Option<f64>,
    final_tau: Option<f64>,
    relation_edges: Option<usize>,
    mwas_score: Option<f64>,
    mwas_drop_ratio: Option<f64>,
    mwas_met_threshold: Option<bool>,
    mwas_r_used: Option<usize>,
}

fn write_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}

impl ExperimentReport {
    /// Columns `method,task,metric,value,seed`; one `best_true_rank` row per run.
    pub fn to_csv(&self) -> String {
        write_csv(self.results.iter().map(|r| MainRow {
            method: r.method,
            task: &r.task,
            metric: "best_true_rank",
            value: r.best_true_rank as f64,
            seed: r.seed,
        }))
    }

    /// Per-run diagnostics: taus, validation accuracy, MWAS summary.
    pub fn details_csv(&self) -> String {
        write_csv(self.results.iter().map(|r| DetailRow {
            method: r.method,
            task: &r.task,
            seed: r.seed,
            best_arch: &r.best_arch,
            best_metric: r.best_metric,
            best_true_rank: r.best_true_rank,
            target_evaluations: r.target_evaluations(),
            source_evaluations: r.source_evaluations,
            val_acc: r.val_acc,
            coarse_tau: r.coarse_tau,
            final_tau: r.final_tau,
            relation_edges: r.relation_edges,
            mwas_score: r.mwas_summary.map(|s| s.score),
            mwas_drop_ratio: r.mwas_summary.map(|s| s.drop_ratio),
            mwas_met_threshold: r.mwas_summary.map(|s| s.met_threshold),
            mwas_r_used: r.mwas_summary.map(|s| s.r_used),
        }))
    }

    pub fn summary_csv(&self) -> String {
        write_csv(&self.summary)
    }
}

/// Columns `method,task,metric,value,seed` with every scalar of each result
/// as its own row; absent values are omitted.
pub fn long_csv(results: &[SearchResult]) -> String {
    write_csv(results.iter().flat_map(|r| {
        let scalars: [(&'static str, Option<f64>); 7] = [
            ("best_true_rank", Some(r.best_true_rank as f64)),
            ("best_metric", Some(r.best_metric)),
            ("target_evaluations", Some(r.target_evaluations() as f64)),
            ("source_evaluations", Some(r.source_evaluations as f64)),
            ("val_acc", r.val_acc),
            ("coarse_tau", r.coarse_tau),
            ("final_tau", r.final_tau),
        ];
        scalars.into_iter().filter_map(move |(metric, v)| {
            v.map(|value| MainRow { method: r.method, task: &r.task, metric, value, seed: r.seed })
        })
    }))
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var)
}

fn summarize(results: &[SearchResult], methods: &[Method], targets: &[String]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &method in methods {
        let mine: Vec<&SearchResult> = results.iter().filter(|r| r.method == method).collect();
        for task in targets {
            let ranks: Vec<f64> = mine.iter().filter(|r| &r.task == task).map(|r| r.best_true_rank as f64).collect();
            let (mean_rank, var_rank) = mean_var(&ranks);
            rows.push(SummaryRow { method, task: task.clone(), runs: ranks.len(), mean_rank, var_rank });
        }
        // Average over targets per seed, then mean/variance across seeds.
        let mut seeds: Vec<u64> = mine.iter().map(|r| r.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        let per_seed: Vec<f64> = seeds
            .iter()
            .map(|&s| {
                let ranks: Vec<f64> = mine.iter().filter(|r| r.seed == s).map(|r| r.best_true_rank as f64).collect();
                mean_var(&ranks).0
            })
            .collect();
        let (mean_rank, var_rank) = mean_var(&per_seed);
        rows.push(SummaryRow { method, task: AVERAGE_TASK.into(), runs: per_seed.len(), mean_rank, var_rank });
    }
    rows
}

/// Runs every `(method, target task, seed)` combination. Target tasks are
/// all tasks except `cfg.source_task`; `cfg.seed` and `cfg.target_task` are
/// overridden per run. Transfer methods share one source predictor per seed.
/// Output order and bytes do not depend on `jobs`.
pub fn run_experiment(
    bench: &TabularBenchmark,
    methods: &[Method],
    seeds: &[u64],
    cfg: &SearchConfig,
    jobs: usize,
) -> Result<ExperimentReport> {
    if methods.is_empty() || seeds.is_empty() {
        return Err(SearchError::Config("need at least one method and one seed".into()));
    }
    let mut uniq = seeds.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    if uniq.len() != seeds.len() {
        return Err(SearchError::Config("duplicate seeds".into()));
    }
    let targets: Vec<String> = bench.tasks.iter().map(|t| t.name.clone()).filter(|n| *n != cfg.source_task).collect();
    if targets.is_empty() {
        return Err(SearchError::Config("no target tasks besides the source task".into()));
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SearchError::Config(format!("thread pool: {e}")))?;

    pool.install(|| {
        let pretrained: Vec<Option<PredictorState>> = if methods.iter().any(|m| m.uses_source()) {
            seeds
                .par_iter()
                .map(|&seed| {
                    let run = SearchConfig { seed, ..cfg.clone() };
                    pretrain_source(bench, &run, derive_seed(seed, "pretrain")).map(|(s, _)| Some(s))
                })
                .collect::<Result<_>>()?
        } else {
            vec![None; seeds.len()]
        };

        let jobs: Vec<(Method, &String, usize)> = methods
            .iter()
            .flat_map(|&m| targets.iter().flat_map(move |t| (0..seeds.len()).map(move |k| (m, t, k))))
            .collect();
        let mut results: Vec<SearchResult> = jobs
            .par_iter()
            .map(|&(method, task, k)| {
                let run = SearchConfig { seed: seeds[k], target_task: task.clone(), ..cfg.clone() };
                let src = if method.uses_source() { pretrained[k].as_ref() } else { None };
                let mut res = arch_graph_search(bench, &run, method, src)?;
                if method.uses_source() {
                    res.source_evaluations = cfg.m;
                }
                Ok(res)
            })
            .collect::<Result<_>>()?;
        results.shrink_to_fit();
        let summary = summarize(&results, methods, &targets);
        Ok(ExperimentReport { results, summary })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{gen_synthetic, Direction, SynthTask};

    fn tiny() -> (TabularBenchmark, SearchConfig) {
        let tasks = [
            SynthTask::new("source", Direction::Max, 1.0),
            SynthTask::new("t1", Direction::Max, 0.9),
            SynthTask::new("t2", Direction::Min, 0.7),
        ];
        let bench = gen_synthetic(200, 4, 4, &tasks, 0.0, 1).unwrap();
        let mut cfg = SearchConfig { top_k: 50, ..SearchConfig::default() };
        cfg.train.epochs = 5;
        cfg.train.finetune_epochs = 3;
        (bench, cfg)
    }

    #[test]
    fn row_count_and_job_independence() {
        let (bench, cfg) = tiny();
        let methods = [Method::ArchGraph, Method::RandomSearch];
        let a = run_experiment(&bench, &methods, &[1, 2, 3], &cfg, 1).unwrap();
        let b = run_experiment(&bench, &methods, &[1, 2, 3], &cfg, 3).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.details_csv(), b.details_csv());
        assert_eq!(a.to_csv().lines().count(), 1 + 2 * 2 * 3);
        assert!(a.to_csv().starts_with("method,task,metric,value,seed\n"));
        assert_eq!(a.summary.len(), 2 * 3);
    }

    #[test]
    fn single_run_is_one_row() {
        let (bench, cfg) = tiny();
        let cfg = SearchConfig { source_task: "t2".into(), ..cfg };
        let bench = TabularBenchmark::new(
            bench.ids.clone(),
            bench.archs.clone(),
            bench.tasks[1..].to_vec(),
            bench.metrics[1..].to_vec(),
            bench.op_vocab,
            bench.default_topology.clone(),
        )
        .unwrap();
        let rep = run_experiment(&bench, &[Method::RandomSearch], &[4], &cfg, 1).unwrap();
        assert_eq!(rep.results.len(), 1);
        assert_eq!(rep.summary[0].var_rank, 0.0);
    }

    #[test]
    fn rejects_duplicate_seeds() {
        let (bench, cfg) = tiny();
        assert!(run_experiment(&bench, &[Method::RandomSearch], &[1, 1], &cfg, 1).is_err());
    }
}
