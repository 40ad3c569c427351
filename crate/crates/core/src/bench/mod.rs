//! Tabular benchmarks: every architecture of a space with its measured
//! metric on every task, plus ground-truth comparison, ranking metrics and
//! budget accounting.

mod ledger;
mod metrics;
mod synth;

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predictor::{ArchEncoding, EmbeddingSource, PredictorError, TaskEmbedding, Topology};

pub use ledger::{BudgetCaps, BudgetLedger, Evaluation, Phase};
pub use metrics::{kendall_tau, pearson, spearman};
pub use synth::{default_synthetic_tasks, gen_synthetic, SynthTask, MICRO_NODE_COUNT, MICRO_OP_VOCAB};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("architecture {id} has no finite metric for task {task}")]
    MissingMetric { id: String, task: String },
    #[error("duplicate architecture id {0}")]
    DuplicateId(String),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("unknown architecture {0}")]
    UnknownArch(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("architecture {arch} already evaluated on task {task}")]
    DuplicateEvaluation { arch: String, task: String },
    #[error("{phase:?} budget of {cap} evaluations exhausted")]
    BudgetExceeded { phase: Phase, cap: usize },
    #[error(transparent)]
    Arch(#[from] PredictorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "higher-better", alias = "max")]
    Max,
    #[serde(rename = "lower-better", alias = "min")]
    Min,
}

impl Direction {
    /// Strict direction-aware comparison: is `a` better than `b`?
    #[inline]
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Max => a > b,
            Direction::Min => a < b,
        }
    }

    pub fn compare(self, a: f64, b: f64) -> Outcome {
        if self.better(a, b) {
            Outcome::First
        } else if self.better(b, a) {
            Outcome::Second
        } else {
            Outcome::Tie
        }
    }

    /// Maps a metric to a value where larger is always better.
    #[inline]
    pub fn goodness(self, v: f64) -> f64 {
        match self {
            Direction::Max => v,
            Direction::Min => -v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    First,
    Second,
    Tie,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub name: String,
    pub direction: Direction,
    pub embedding: TaskEmbedding,
}

/// Immutable after construction; every cell is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularBenchmark {
    pub ids: Vec<String>,
    pub archs: Vec<ArchEncoding>,
    pub tasks: Vec<TaskSpec>,
    /// `metrics[task][arch]`.
    pub metrics: Vec<Vec<f64>>,
    pub op_vocab: usize,
    /// Space-level topology, written once in the header when every
    /// architecture shares it.
    pub default_topology: Option<Arc<Topology>>,
    index: HashMap<String, usize>,
}

impl TabularBenchmark {
    pub fn new(
        ids: Vec<String>,
        archs: Vec<ArchEncoding>,
        tasks: Vec<TaskSpec>,
        metrics: Vec<Vec<f64>>,
        op_vocab: usize,
        default_topology: Option<Arc<Topology>>,
    ) -> Result<Self> {
        if ids.len() != archs.len() {
            return Err(BenchError::InvalidParam(format!("{} ids for {} architectures", ids.len(), archs.len())));
        }
        if metrics.len() != tasks.len() {
            return Err(BenchError::InvalidParam(format!(
                "{} metric columns for {} tasks",
                metrics.len(),
                tasks.len()
            )));
        }
        if tasks.is_empty() {
            return Err(BenchError::InvalidParam("no tasks".into()));
        }
        let dim = tasks[0].embedding.dim();
        if let Some(t) = tasks.iter().find(|t| t.embedding.dim() != dim) {
            return Err(BenchError::InvalidParam(format!("task {} embedding dimension differs", t.name)));
        }
        let mut names = std::collections::HashSet::new();
        if let Some(t) = tasks.iter().find(|t| !names.insert(t.name.as_str())) {
            return Err(BenchError::InvalidParam(format!("duplicate task {}", t.name)));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (k, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), k).is_some() {
                return Err(BenchError::DuplicateId(id.clone()));
            }
        }
        for a in &archs {
            if a.op_vocab_size != op_vocab {
                return Err(BenchError::InvalidParam(format!(
                    "architecture vocabulary {} differs from space vocabulary {op_vocab}",
                    a.op_vocab_size
                )));
            }
        }
        for (t, col) in tasks.iter().zip(&metrics) {
            if col.len() != archs.len() {
                return Err(BenchError::InvalidParam(format!("task {} has {} cells", t.name, col.len())));
            }
            if let Some(k) = col.iter().position(|v| !v.is_finite()) {
                return Err(BenchError::MissingMetric { id: ids[k].clone(), task: t.name.clone() });
            }
        }
        Ok(Self { ids, archs, tasks, metrics, op_vocab, default_topology, index })
    }

    pub fn len(&self) -> usize {
        self.archs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.archs.is_empty()
    }

    pub fn task_index(&self, name: &str) -> Result<usize> {
        self.tasks.iter().position(|t| t.name == name).ok_or_else(|| BenchError::UnknownTask(name.to_string()))
    }

    pub fn arch_index(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| BenchError::UnknownArch(id.to_string()))
    }

    pub fn task_dim(&self) -> usize {
        self.tasks[0].embedding.dim()
    }

    /// Ground-truth metric without budget accounting. Search code reads
    /// metrics through a [`BudgetLedger`] instead.
    pub fn metric(&self, task: usize, arch: usize) -> f64 {
        self.metrics[task][arch]
    }

    pub fn better(&self, task: usize, i: usize, j: usize) -> Outcome {
        let col = &self.metrics[task];
        self.tasks[task].direction.compare(col[i], col[j])
    }

    /// 1 + number of strictly better architectures; ties share the minimum rank.
    pub fn true_rank(&self, task: usize, arch: usize) -> usize {
        let dir = self.tasks[task].direction;
        let col = &self.metrics[task];
        let v = col[arch];
        1 + col.iter().filter(|&&w| dir.better(w, v)).count()
    }

    pub fn true_ranks(&self, task: usize) -> Vec<usize> {
        let dir = self.tasks[task].direction;
        let col = &self.metrics[task];
        let mut order: Vec<usize> = (0..col.len()).collect();
        order.sort_by(|&a, &b| dir.goodness(col[b]).total_cmp(&dir.goodness(col[a])));
        let mut ranks = vec![0; col.len()];
        for (pos, &a) in order.iter().enumerate() {
            ranks[a] = if pos > 0 && col[order[pos - 1]] == col[a] { ranks[order[pos - 1]] } else { pos + 1 };
        }
        ranks
    }

    pub fn to_jsonl(&self) -> String {
        let shared = self.default_topology.as_ref().filter(|t| self.archs.iter().all(|a| &a.topology == *t));
        let header = Header {
            tasks: self
                .tasks
                .iter()
                .map(|t| TaskHeader {
                    name: t.name.clone(),
                    direction: t.direction,
                    embedding: (t.embedding.source != EmbeddingSource::Zeros).then(|| t.embedding.vec.clone()),
                    embedding_source: (t.embedding.source == EmbeddingSource::DiagFim)
                        .then_some(EmbeddingSource::DiagFim),
                })
                .collect(),
            op_vocab: self.op_vocab,
            embedding_dim: self.task_dim(),
            adjacency: shared.map(|t| t.adjacency().to_vec()),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for (k, a) in self.archs.iter().enumerate() {
            let metrics = self
                .tasks
                .iter()
                .zip(&self.metrics)
                .map(|(t, col)| (t.name.clone(), serde_json::Value::from(col[k])))
                .collect();
            let rec = Record {
                id: self.ids[k].clone(),
                ops: a.node_ops.clone(),
                adjacency: if shared.is_some() { None } else { Some(a.topology.adjacency().to_vec()) },
                metrics,
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hline, htext) = lines.next().ok_or(BenchError::Parse { line: 1, msg: "missing header".into() })?;
        let header: Header =
            serde_json::from_str(htext).map_err(|e| BenchError::Parse { line: hline + 1, msg: e.to_string() })?;
        if header.op_vocab == 0 {
            return Err(BenchError::Parse { line: hline + 1, msg: "op_vocab must be positive".into() });
        }
        let default_topology = header
            .adjacency
            .map(|a| Topology::new(a).map(Arc::new))
            .transpose()
            .map_err(|e| BenchError::Parse { line: hline + 1, msg: e.to_string() })?;
        let dim = header.tasks.iter().filter_map(|t| t.embedding.as_ref().map(Vec::len)).next();
        let dim = dim.unwrap_or(header.embedding_dim);
        let mut tasks = Vec::with_capacity(header.tasks.len());
        for t in header.tasks {
            let embedding = match t.embedding {
                Some(v) => TaskEmbedding::new(v, t.embedding_source.unwrap_or(EmbeddingSource::ExternalFile))
                    .map_err(|e| BenchError::Parse { line: hline + 1, msg: e.to_string() })?,
                None => TaskEmbedding::zeros(dim),
            };
            tasks.push(TaskSpec { name: t.name, direction: t.direction, embedding });
        }

        let mut ids = Vec::new();
        let mut archs = Vec::new();
        let mut metrics = vec![Vec::new(); tasks.len()];
        for (lno, line) in lines {
            let line_no = lno + 1;
            let rec: Record = match serde_json::from_str(line) {
                Ok(r) => r,
                Err(e) => {
                    // Bare NaN/Infinity tokens are not JSON; report them as missing cells.
                    let patched = line.replace("-Infinity", "null").replace("Infinity", "null").replace("NaN", "null");
                    serde_json::from_str(&patched)
                        .map_err(|_| BenchError::Parse { line: line_no, msg: e.to_string() })?
                }
            };
            let topology = match (rec.adjacency, &default_topology) {
                (Some(a), Some(d)) if a == d.adjacency() => d.clone(),
                (Some(a), _) => {
                    Arc::new(Topology::new(a).map_err(|e| BenchError::Parse { line: line_no, msg: e.to_string() })?)
                }
                (None, Some(d)) => d.clone(),
                (None, None) => {
                    return Err(BenchError::Parse { line: line_no, msg: "no adjacency and no header default".into() })
                }
            };
            let arch = ArchEncoding::new(rec.ops, topology, header.op_vocab)
                .map_err(|e| BenchError::Parse { line: line_no, msg: e.to_string() })?;
            for (t, col) in tasks.iter().zip(metrics.iter_mut()) {
                let v = rec.metrics.get(&t.name).and_then(serde_json::Value::as_f64);
                match v {
                    Some(v) if v.is_finite() => col.push(v),
                    _ => return Err(BenchError::MissingMetric { id: rec.id.clone(), task: t.name.clone() }),
                }
            }
            ids.push(rec.id);
            archs.push(arch);
        }
        Self::new(ids, archs, tasks, metrics, header.op_vocab, default_topology)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct TaskHeader {
    name: String,
    direction: Direction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding_source: Option<EmbeddingSource>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    tasks: Vec<TaskHeader>,
    op_vocab: usize,
    /// Dimension of the zero embedding given to tasks without one.
    #[serde(default)]
    embedding_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adjacency: Option<Vec<Vec<u8>>>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    ops: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adjacency: Option<Vec<Vec<u8>>>,
    metrics: serde_json::Map<String, serde_json::Value>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = r#"{"tasks":[{"name":"acc","direction":"higher-better"},{"name":"loss","direction":"lower-better"}],"op_vocab":3,"adjacency":[[0,1],[0,0]]}
{"id":"a","ops":[0,1],"metrics":{"acc":0.9,"loss":57.75}}
{"id":"b","ops":[1,2],"metrics":{"acc":0.7,"loss":59.35}}
{"id":"c","ops":[2,2],"metrics":{"acc":0.7,"loss":60.0}}
"#;

    #[test]
    fn fixture_loads() {
        let b = TabularBenchmark::from_jsonl(FIXTURE).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b.metrics.iter().map(Vec::len).sum::<usize>(), 6);
        assert_eq!(b.better(0, 0, 1), Outcome::First);
        assert_eq!(b.better(1, 0, 1), Outcome::First);
        assert_eq!(b.better(0, 1, 2), Outcome::Tie);
        assert_eq!(b.true_rank(0, 0), 1);
        assert_eq!(b.true_rank(0, 2), 2);
        assert_eq!(b.true_rank(1, 2), 3);
        assert_eq!(b.true_ranks(0), vec![1, 2, 2]);
        assert_eq!(b.arch_index("b").unwrap(), 1);
    }

    #[test]
    fn round_trip() {
        let b = TabularBenchmark::from_jsonl(FIXTURE).unwrap();
        let again = TabularBenchmark::from_jsonl(&b.to_jsonl()).unwrap();
        assert_eq!(again, b);
    }

    #[test]
    fn missing_and_nan_cells() {
        let nan = FIXTURE.replace("\"acc\":0.7,\"loss\":60.0", "\"acc\":NaN,\"loss\":60.0");
        assert!(matches!(TabularBenchmark::from_jsonl(&nan), Err(BenchError::MissingMetric { .. })));
        let missing = FIXTURE.replace(",\"loss\":60.0", "");
        assert!(matches!(TabularBenchmark::from_jsonl(&missing), Err(BenchError::MissingMetric { .. })));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = FIXTURE.replace("{\"id\":\"b\"", "{\"id\":");
        match TabularBenchmark::from_jsonl(&bad) {
            Err(BenchError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let dup = FIXTURE.replace("\"id\":\"c\"", "\"id\":\"a\"");
        assert!(matches!(TabularBenchmark::from_jsonl(&dup), Err(BenchError::DuplicateId(_))));
        let bad_op = FIXTURE.replace("[2,2]", "[2,3]");
        assert!(matches!(TabularBenchmark::from_jsonl(&bad_op), Err(BenchError::Parse { line: 4, .. })));
    }
}
