use rand::seq::index;
use rand::seq::SliceRandom;

use super::zero::{arch_graph_zero, judge_relation};
use super::{Method, Result, SearchConfig, SearchError, SearchResult};
use crate::bench::{kendall_tau, BudgetCaps, BudgetLedger, Direction, Phase, TabularBenchmark};
use crate::graph::{topological_order_with_priority, transitive_reduction, DirectedGraph};
use crate::mwas::{mwas_approx, MwasParams, MwasSummary};
use crate::predictor::{
    finetune_target, relation_graph, train_source, ArchEncoding, PairJudge, PairScorer, PredictorConfig, PredictorState,
};
use crate::rng::{derive_seed, derive_seed_parts, seeded};
use crate::trust::{build_reference_set, edge_weights, ReferenceSet, TrustParams};

/// Ground-truth comparator over a candidate list: the better candidate wins
/// with probability 1, ties are a coin flip (and so incomparable).
pub struct OracleJudge {
    goodness: Vec<f64>,
}

impl OracleJudge {
    pub fn new(bench: &TabularBenchmark, task: usize) -> Self {
        let dir = bench.tasks[task].direction;
        Self { goodness: bench.metrics[task].iter().map(|&v| dir.goodness(v)).collect() }
    }
}

impl PairJudge for OracleJudge {
    fn len(&self) -> usize {
        self.goodness.len()
    }

    fn p_first(&self, i: usize, j: usize) -> f64 {
        match self.goodness[i].total_cmp(&self.goodness[j]) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Less => 0.0,
            std::cmp::Ordering::Equal => 0.5,
        }
    }

    fn features(&self, i: usize, j: usize) -> Vec<f64> {
        vec![2.0 * self.p_first(i, j) - 1.0]
    }
}

/// A judge restricted to `idx`: local candidate `k` is `idx[k]` of `inner`.
pub struct SubsetJudge<'a, J: ?Sized> {
    pub inner: &'a J,
    pub idx: &'a [usize],
}

impl<J: PairJudge + ?Sized> PairJudge for SubsetJudge<'_, J> {
    fn len(&self) -> usize {
        self.idx.len()
    }

    fn p_first(&self, i: usize, j: usize) -> f64 {
        self.inner.p_first(self.idx[i], self.idx[j])
    }

    fn features(&self, i: usize, j: usize) -> Vec<f64> {
        self.inner.features(self.idx[i], self.idx[j])
    }
}

/// Trust reference set from every labelled ordered pair within each group
/// of `(candidate, metric)` observations. Tied pairs are skipped.
pub fn reference_from_judge(
    judge: &(impl PairJudge + ?Sized),
    groups: &[Vec<(usize, f64)>],
    direction: Direction,
    params: &TrustParams,
) -> Result<ReferenceSet> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for group in groups {
        for &(a, ma) in group {
            for &(b, mb) in group {
                if a == b {
                    continue;
                }
                let label = if direction.better(ma, mb) {
                    0
                } else if direction.better(mb, ma) {
                    1
                } else {
                    continue;
                };
                points.push(judge.features(a, b));
                labels.push(label);
            }
        }
    }
    Ok(build_reference_set(&points, &labels, params.alpha, params.k)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    /// Every candidate, best first, from the comparator insertion sort.
    pub coarse: Vec<usize>,
    /// The first `top_k` entries of `coarse`.
    pub top: Vec<usize>,
    /// Topological order of the Hasse diagram over `top`; `None` for the
    /// coarse-only ranking.
    pub refined: Option<Vec<usize>>,
    pub mwas: Option<MwasSummary>,
    pub relation_edges: Option<usize>,
}

impl Ranking {
    pub fn final_order(&self) -> &[usize] {
        self.refined.as_deref().unwrap_or(&self.coarse)
    }
}

/// Comparator insertion sort over every candidate of `judge`, best first,
/// from a seeded shuffle of the candidate indices.
pub fn coarse_rank(judge: &(impl PairJudge + ?Sized), seed: u64) -> Vec<usize> {
    let mut input: Vec<usize> = (0..judge.len()).collect();
    input.shuffle(&mut seeded(derive_seed(seed, "coarse-input-order")));
    arch_graph_zero(&input, |a, b| judge_relation(judge, a, b))
}

/// Relation graph over `judge` with trust-score edge weights.
pub fn trust_weighted_graph(
    judge: &(impl PairJudge + ?Sized),
    reference: &ReferenceSet,
    t_max: f64,
) -> Result<DirectedGraph> {
    let (g, data) = relation_graph(judge);
    if g.edge_count() == 0 {
        return Ok(g);
    }
    Ok(edge_weights(&g, &data, reference, t_max)?.weighted_graph(&g)?)
}

/// Steps from the coarse sort to the final order. `seed` fixes the input
/// order of the insertion sort and the max-MAS restarts.
pub fn rank_candidates(
    judge: &(impl PairJudge + ?Sized),
    cfg: &SearchConfig,
    eps: f64,
    reference: &ReferenceSet,
    coarse_only: bool,
    seed: u64,
) -> Result<Ranking> {
    let coarse = coarse_rank(judge, seed);
    let top: Vec<usize> = coarse[..cfg.top_k.min(coarse.len())].to_vec();
    if coarse_only {
        return Ok(Ranking { coarse, top, refined: None, mwas: None, relation_edges: None });
    }

    let weighted = trust_weighted_graph(&SubsetJudge { inner: judge, idx: &top }, reference, cfg.trust.t_max)?;
    let edges = weighted.edge_count();
    if edges == 0 {
        // Everything incomparable: the relation graph carries no order.
        let refined = Some(top.clone());
        return Ok(Ranking { coarse, top, refined, mwas: None, relation_edges: Some(0) });
    }
    let params = MwasParams { eps: eps.clamp(0.0, 1.0), ..cfg.mwas };
    let res = mwas_approx(&weighted, &params, derive_seed(seed, "mwas"))?;
    let hasse = transitive_reduction(&res.subgraph)?;
    let order = topological_order_with_priority(&hasse, &res.subgraph.weight_balance())?;
    let refined = Some(order.into_iter().map(|k| top[k]).collect());
    Ok(Ranking { coarse, top, refined, mwas: Some(res.summary()), relation_edges: Some(edges) })
}

/// Kendall tau between the position in `order` and the ground truth over `set`.
fn order_tau(bench: &TabularBenchmark, task: usize, set: &[usize], order: &[usize]) -> Option<f64> {
    let dir = bench.tasks[task].direction;
    let mut pos = std::collections::HashMap::with_capacity(order.len());
    for (k, &a) in order.iter().enumerate() {
        pos.insert(a, k);
    }
    let predicted: Vec<f64> = set.iter().map(|a| -(pos[a] as f64)).collect();
    let truth: Vec<f64> = set.iter().map(|&a| dir.goodness(bench.metric(task, a))).collect();
    kendall_tau(&predicted, &truth).ok()
}

/// Ranking, final evaluations and result assembly for one target task.
/// `judge` ranges over every architecture of `bench`; `ledger` may already
/// hold the finetune evaluations.
#[allow(clippy::too_many_arguments)]
pub fn search_with_judge(
    bench: &TabularBenchmark,
    cfg: &SearchConfig,
    target: usize,
    method: Method,
    judge: &(impl PairJudge + ?Sized),
    val_acc: f64,
    reference: &ReferenceSet,
    mut ledger: BudgetLedger,
    seed: u64,
) -> Result<SearchResult> {
    if judge.len() != bench.len() {
        return Err(SearchError::Config(format!("judge covers {} of {} architectures", judge.len(), bench.len())));
    }
    let coarse_only = match method {
        Method::ArchGraphZero => true,
        Method::ArchGraph | Method::ArchGraphSingle => false,
        Method::RandomSearch => return Err(SearchError::Config("random search takes no judge".into())),
    };
    let ranking = rank_candidates(judge, cfg, 1.0 - val_acc, reference, coarse_only, seed)?;

    // Already-evaluated candidates are skipped, not charged.
    let mut spent = 0;
    for &a in ranking.final_order() {
        if spent == cfg.p {
            break;
        }
        if ledger.contains(target, a) {
            continue;
        }
        ledger.evaluate(bench, target, a, Phase::Final)?;
        spent += 1;
    }

    let coarse_tau = order_tau(bench, target, &ranking.top, &ranking.coarse);
    let final_tau = match &ranking.refined {
        Some(r) => order_tau(bench, target, &ranking.top, r),
        None => coarse_tau,
    };
    let mut result = assemble(bench, cfg, target, method, ledger)?;
    result.coarse_tau = coarse_tau;
    result.final_tau = final_tau;
    result.val_acc = Some(val_acc);
    result.mwas_summary = ranking.mwas;
    result.relation_edges = ranking.relation_edges;
    Ok(result)
}

fn assemble(
    bench: &TabularBenchmark,
    cfg: &SearchConfig,
    target: usize,
    method: Method,
    ledger: BudgetLedger,
) -> Result<SearchResult> {
    let best = ledger.best(bench, target).ok_or_else(|| SearchError::Config("no target evaluations".into()))?.clone();
    Ok(SearchResult {
        method,
        task: bench.tasks[target].name.clone(),
        seed: cfg.seed,
        best_arch: bench.ids[best.arch].clone(),
        best_index: best.arch,
        best_metric: best.metric,
        best_true_rank: bench.true_rank(target, best.arch),
        coarse_tau: None,
        final_tau: None,
        val_acc: None,
        mwas_summary: None,
        relation_edges: None,
        source_evaluations: 0,
        ledger,
    })
}

fn sample_distinct(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k > n {
        return Err(SearchError::Config(format!("cannot sample {k} of {n} architectures")));
    }
    Ok(index::sample(&mut seeded(seed), n, k).into_vec())
}

/// Samples `m` source architectures, evaluates them through a source
/// ledger and trains a predictor on all their ordered pairs.
pub fn pretrain_source(
    bench: &TabularBenchmark,
    cfg: &SearchConfig,
    seed: u64,
) -> Result<(PredictorState, BudgetLedger)> {
    cfg.validate()?;
    let source = bench.task_index(&cfg.source_task)?;
    let mut ledger = BudgetLedger::new(BudgetCaps { source: cfg.m, ..BudgetCaps::default() });
    let mut sample = Vec::with_capacity(cfg.m);
    for a in sample_distinct(bench.len(), cfg.m, derive_seed(seed, "source-sample"))? {
        let metric = ledger.evaluate(bench, source, a, Phase::Source)?;
        sample.push((bench.archs[a].clone(), metric));
    }
    let spec = &bench.tasks[source];
    let state = train_source(
        &sample,
        spec.direction,
        &spec.embedding.vec,
        &cfg.train_config(),
        derive_seed(seed, "source-train"),
    )?;
    Ok((state, ledger))
}

#[derive(Debug, Clone)]
pub struct TargetFit {
    pub state: PredictorState,
    pub val_acc: f64,
    /// Benchmark indices and metrics of the finetune and validation samples.
    pub train: Vec<(usize, f64)>,
    pub val: Vec<(usize, f64)>,
}

/// Evaluates `b_f + b_v` fresh target architectures and finetunes `start`
/// on them. `epochs` overrides the finetune epoch count.
pub fn finetune_on_target(
    bench: &TabularBenchmark,
    cfg: &SearchConfig,
    target: usize,
    start: &PredictorState,
    epochs: Option<usize>,
    ledger: &mut BudgetLedger,
    seed: u64,
) -> Result<TargetFit> {
    let n_fit = cfg.b_f + cfg.b_v;
    let mut picked: Vec<(usize, f64)> = Vec::with_capacity(n_fit);
    for a in sample_distinct(bench.len(), n_fit, derive_seed(seed, "target-sample"))? {
        picked.push((a, ledger.evaluate(bench, target, a, Phase::Finetune)?));
    }
    let list: Vec<(ArchEncoding, f64)> = picked.iter().map(|&(a, v)| (bench.archs[a].clone(), v)).collect();
    let mut tcfg = cfg.train_config();
    if let Some(e) = epochs {
        tcfg.finetune_epochs = e;
    }
    let spec = &bench.tasks[target];
    let out = finetune_target(start, &list, spec.direction, &spec.embedding.vec, &tcfg, derive_seed(seed, "finetune"))?;
    Ok(TargetFit {
        state: out.state,
        val_acc: out.val_acc,
        train: out.train_idx.iter().map(|&k| picked[k]).collect(),
        val: out.val_idx.iter().map(|&k| picked[k]).collect(),
    })
}

/// Uniform sample of `b_f + b_v + p` target architectures.
pub fn random_search(bench: &TabularBenchmark, cfg: &SearchConfig, target: usize, seed: u64) -> Result<SearchResult> {
    let budget = cfg.target_budget();
    let mut ledger = BudgetLedger::new(BudgetCaps { final_: budget, ..BudgetCaps::default() });
    for a in sample_distinct(bench.len(), budget, derive_seed(seed, "random-sample"))? {
        ledger.evaluate(bench, target, a, Phase::Final)?;
    }
    assemble(bench, cfg, target, Method::RandomSearch, ledger)
}

/// One search run of `method` on `cfg.target_task`.
///
/// Streams shared by every method (source sample, target sample,
/// finetuning, coarse input order, max-MAS restarts) derive from
/// `(cfg.seed, target)`, so methods run on the same seed are paired.
/// `pretrained` skips source pretraining for the transfer methods.
pub fn arch_graph_search(
    bench: &TabularBenchmark,
    cfg: &SearchConfig,
    method: Method,
    pretrained: Option<&PredictorState>,
) -> Result<SearchResult> {
    cfg.validate()?;
    let target = bench.task_index(&cfg.target_task)?;
    let run_seed = derive_seed_parts(cfg.seed, &["run", &cfg.target_task]);
    if method == Method::RandomSearch {
        let seed = derive_seed_parts(cfg.seed, &[method.as_str(), &cfg.target_task]);
        return random_search(bench, cfg, target, seed);
    }

    let mut source_evaluations = 0;
    let (start, epochs) = if method.uses_source() {
        if cfg.source_task == cfg.target_task {
            return Err(SearchError::Config("transfer needs distinct source and target tasks".into()));
        }
        match pretrained {
            Some(s) => (s.clone(), None),
            None => {
                let (s, src) = pretrain_source(bench, cfg, derive_seed(cfg.seed, "pretrain"))?;
                source_evaluations = src.len();
                (s, None)
            }
        }
    } else {
        let pcfg = PredictorConfig::new(bench.op_vocab, bench.task_dim());
        // From scratch: the source schedule's epoch count on the target sample.
        (PredictorState::new(pcfg, derive_seed(run_seed, "single-init")), Some(cfg.train.epochs))
    };

    let mut ledger = BudgetLedger::new(BudgetCaps { source: 0, finetune: cfg.b_f + cfg.b_v, final_: cfg.p });
    let fit = finetune_on_target(bench, cfg, target, &start, epochs, &mut ledger, run_seed)?;
    let spec = &bench.tasks[target];
    let scorer = PairScorer::new(&fit.state, &bench.archs, &spec.embedding.vec)?;
    let reference = reference_from_judge(&scorer, &[fit.train.clone(), fit.val.clone()], spec.direction, &cfg.trust)?;
    let mut result = search_with_judge(bench, cfg, target, method, &scorer, fit.val_acc, &reference, ledger, run_seed)?;
    result.source_evaluations = source_evaluations;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{gen_synthetic, SynthTask};

    fn small_bench() -> TabularBenchmark {
        let tasks = [SynthTask::new("source", Direction::Max, 1.0), SynthTask::new("target", Direction::Min, 0.8)];
        gen_synthetic(256, 4, 4, &tasks, 0.0, 3).unwrap()
    }

    fn small_cfg() -> SearchConfig {
        let mut cfg = SearchConfig { top_k: 60, target_task: "target".into(), ..SearchConfig::default() };
        cfg.train.epochs = 10;
        cfg.train.finetune_epochs = 5;
        cfg
    }

    #[test]
    fn oracle_pipeline_finds_optimum() {
        let bench = small_bench();
        let cfg = small_cfg();
        let judge = OracleJudge::new(&bench, 1);
        let group: Vec<(usize, f64)> = (0..30).map(|a| (a, bench.metric(1, a))).collect();
        let reference = reference_from_judge(&judge, &[group], Direction::Min, &cfg.trust).unwrap();
        let ledger = BudgetLedger::new(BudgetCaps { final_: cfg.p, ..BudgetCaps::default() });
        let res = search_with_judge(&bench, &cfg, 1, Method::ArchGraph, &judge, 1.0, &reference, ledger, 5).unwrap();
        assert_eq!(res.best_true_rank, 1);
        assert_eq!(res.final_tau, Some(1.0));
        assert_eq!(res.coarse_tau, Some(1.0));
        assert_eq!(res.target_evaluations(), cfg.p);
    }

    #[test]
    fn budgets_hold_for_every_method() {
        let bench = small_bench();
        let cfg = small_cfg();
        for method in Method::ALL {
            let res = arch_graph_search(&bench, &cfg, method, None).unwrap();
            assert!(res.target_evaluations() <= cfg.target_budget(), "{method}");
            assert!(res.ledger.evaluated().iter().any(|e| e.arch == res.best_index));
            assert_eq!(res.source_evaluations, if method.uses_source() { cfg.m } else { 0 });
            let mut seen = std::collections::HashSet::new();
            assert!(res.ledger.evaluated().iter().all(|e| seen.insert(e.arch)));
        }
    }

    #[test]
    fn transfer_needs_distinct_tasks() {
        let bench = small_bench();
        let cfg = SearchConfig { target_task: "source".into(), ..small_cfg() };
        assert!(matches!(arch_graph_search(&bench, &cfg, Method::ArchGraph, None), Err(SearchError::Config(_))));
    }
}
