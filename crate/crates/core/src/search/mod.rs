//! Budgeted search drivers: the comparator insertion sort, the full
//! relation-graph pipeline, its single-task variant, random search, and a
//! multi-seed experiment runner.

mod experiment;
mod pipeline;
mod zero;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::{BenchError, BudgetLedger};
use crate::graph::GraphError;
use crate::mwas::{MwasError, MwasParams, MwasSummary};
use crate::predictor::{PredictorError, TrainConfig};
use crate::trust::{TrustError, TrustParams};

pub use experiment::{long_csv, run_experiment, ExperimentReport, SummaryRow, AVERAGE_TASK};
pub use pipeline::{
    arch_graph_search, coarse_rank, finetune_on_target, pretrain_source, random_search, rank_candidates,
    reference_from_judge, search_with_judge, trust_weighted_graph, OracleJudge, Ranking, SubsetJudge, TargetFit,
};
pub use zero::{arch_graph_zero, judge_relation, Relation};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Mwas(#[from] MwasError),
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub type Result<T> = std::result::Result<T, SearchError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ArchGraph,
    ArchGraphZero,
    ArchGraphSingle,
    RandomSearch,
}

impl Method {
    pub const ALL: [Method; 4] =
        [Method::ArchGraph, Method::ArchGraphZero, Method::ArchGraphSingle, Method::RandomSearch];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::ArchGraph => "arch-graph",
            Method::ArchGraphZero => "arch-graph-zero",
            Method::ArchGraphSingle => "arch-graph-single",
            Method::RandomSearch => "random-search",
        }
    }

    /// Whether the method pretrains on the source task.
    pub fn uses_source(self) -> bool {
        matches!(self, Method::ArchGraph | Method::ArchGraphZero)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = SearchError;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| SearchError::Config(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Source-task sample size for pretraining.
    pub m: usize,
    pub b_f: usize,
    pub b_v: usize,
    /// Final evaluations of ranked candidates.
    pub p: usize,
    /// Coarse-ranked candidates kept for the relation graph.
    pub top_k: usize,
    pub source_task: String,
    pub target_task: String,
    pub seed: u64,
    pub mwas: MwasParams,
    pub trust: TrustParams,
    /// Optimizer scalars; its budget fields are taken from this config.
    pub train: TrainConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            m: 50,
            b_f: 20,
            b_v: 10,
            p: 20,
            top_k: 500,
            source_task: "source".into(),
            target_task: "target-a".into(),
            seed: 0,
            mwas: MwasParams::default(),
            trust: TrustParams::default(),
            train: TrainConfig::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SearchError::Config(msg));
        if self.m < 2 || self.b_f < 2 || self.b_v < 2 {
            return bad(format!("m={}, b_f={}, b_v={} must each be at least 2", self.m, self.b_f, self.b_v));
        }
        if self.p == 0 || self.top_k == 0 {
            return bad("p and top_k must be positive".into());
        }
        if self.p > self.top_k {
            return bad(format!("p={} exceeds top_k={}", self.p, self.top_k));
        }
        if !(self.trust.t_max > 0.0) || !(0.0..1.0).contains(&self.trust.alpha) || self.trust.k == 0 {
            return bad(format!("invalid trust parameters {:?}", self.trust));
        }
        self.mwas.validate()?;
        self.train_config().validate()?;
        Ok(())
    }

    /// The optimizer settings with this config's budgets.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { m: self.m, b_f: self.b_f, b_v: self.b_v, ..self.train.clone() }
    }

    /// Target-task evaluations a single run may spend.
    pub fn target_budget(&self) -> usize {
        self.b_f + self.b_v + self.p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub method: Method,
    pub task: String,
    pub seed: u64,
    pub best_arch: String,
    pub best_index: usize,
    pub best_metric: f64,
    pub best_true_rank: usize,
    /// Kendall tau of the coarse order against ground truth over the top_k set.
    pub coarse_tau: Option<f64>,
    /// Kendall tau of the final order against ground truth over the top_k set.
    pub final_tau: Option<f64>,
    pub val_acc: Option<f64>,
    pub mwas_summary: Option<MwasSummary>,
    pub relation_edges: Option<usize>,
    /// Source-task evaluations spent on pretraining, reported separately.
    pub source_evaluations: usize,
    pub ledger: BudgetLedger,
}

impl SearchResult {
    pub fn target_evaluations(&self) -> usize {
        self.ledger.len()
    }
}
