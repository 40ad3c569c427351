//! Seeded synthetic benchmark over a fixed ladder topology.
//!
//! Every task is driven by a latent "quality" function of an architecture:
//! a per-operation effect, a per-(node, operation) effect and a pairwise
//! effect along each DAG edge. Task 0 uses a base latent; task k mixes the
//! base latent with an independent latent orthogonalized against it, with
//! the mixing weight chosen so that the rank correlation with task 0
//! approaches the requested value.

use std::sync::Arc;

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};

use super::{BenchError, Direction, Result, TabularBenchmark, TaskSpec};
use crate::predictor::{diag_fim, ArchEncoding, BernoulliProbe, Topology};
use crate::rng::{derive_seed, seeded, StreamRng};

/// Node count and operation vocabulary of the default micro-scale space:
/// 4^6 = 4096 architectures.
pub const MICRO_NODE_COUNT: usize = 6;
pub const MICRO_OP_VOCAB: usize = 4;

/// Scale of the (node, operation) effect relative to the operation effect.
const POSITION_SCALE: f64 = 0.1;
/// Scale of the pairwise effect along edges.
const EDGE_SCALE: f64 = 0.05;
/// Metric = CENTER ± SPREAD * standardized latent (+ noise).
const CENTER: f64 = 50.0;
const SPREAD: f64 = 10.0;
/// Architectures fed to the task-embedding probe.
const PROBE_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTask {
    pub name: String,
    pub direction: Direction,
    /// Target rank correlation with task 0; ignored for task 0 itself.
    pub corr: f64,
}

impl SynthTask {
    pub fn new(name: &str, direction: Direction, corr: f64) -> Self {
        Self { name: name.to_string(), direction, corr }
    }
}

/// Source task followed by three targets of varying similarity.
pub fn default_synthetic_tasks() -> Vec<SynthTask> {
    vec![
        SynthTask::new("source", Direction::Max, 1.0),
        SynthTask::new("target-a", Direction::Max, 0.9),
        SynthTask::new("target-b", Direction::Min, 0.8),
        SynthTask::new("target-c", Direction::Max, 0.6),
    ]
}

struct Latent {
    op: Vec<f64>,
    /// `pos[node * vocab + op]`
    pos: Vec<f64>,
    /// `edge[op_src * vocab + op_dst]`
    edge: Vec<f64>,
}

impl Latent {
    fn draw(rng: &mut StreamRng, nodes: usize, vocab: usize) -> Self {
        let mut normal = |k: usize, s: f64| -> Vec<f64> {
            (0..k)
                .map(|_| {
                    let x: f64 = StandardNormal.sample(&mut *rng);
                    s * x
                })
                .collect::<Vec<f64>>()
        };
        let op = normal(vocab, 1.0);
        let pos = normal(nodes * vocab, POSITION_SCALE);
        let edge = normal(vocab * vocab, EDGE_SCALE);
        Self { op, pos, edge }
    }

    fn eval(&self, ops: &[usize], edges: &[(usize, usize)], vocab: usize) -> f64 {
        let unary: f64 = ops.iter().enumerate().map(|(i, &o)| self.op[o] + self.pos[i * vocab + o]).sum();
        let pair: f64 = edges.iter().map(|&(i, j)| self.edge[ops[i] * vocab + ops[j]]).sum();
        unary + pair
    }

    /// Linear coefficients on one-hot (node, operation) features.
    fn linear(&self, nodes: usize, vocab: usize) -> Vec<f64> {
        (0..nodes * vocab).map(|k| self.op[k % vocab] + self.pos[k]).collect()
    }
}

fn standardize(v: &mut [f64]) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    v.iter_mut().for_each(|x| *x = (*x - mean) / sd);
}

fn decode(mut code: usize, nodes: usize, vocab: usize) -> Vec<usize> {
    let mut ops = vec![0; nodes];
    for slot in ops.iter_mut().rev() {
        *slot = code % vocab;
        code /= vocab;
    }
    ops
}

/// Generates `n_archs` distinct architectures (the whole space when
/// `n_archs` equals its size) with one metric column per task.
pub fn gen_synthetic(
    n_archs: usize,
    node_count: usize,
    op_vocab: usize,
    tasks: &[SynthTask],
    noise_sd: f64,
    seed: u64,
) -> Result<TabularBenchmark> {
    if tasks.is_empty() {
        return Err(BenchError::InvalidParam("no tasks".into()));
    }
    if let Some(t) = tasks.iter().find(|t| !(-1.0..=1.0).contains(&t.corr)) {
        return Err(BenchError::InvalidParam(format!("task {} corr {} outside [-1, 1]", t.name, t.corr)));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(BenchError::InvalidParam(format!("noise_sd {noise_sd}")));
    }
    if node_count == 0 || op_vocab == 0 {
        return Err(BenchError::InvalidParam("node_count and op_vocab must be positive".into()));
    }
    let space = u32::try_from(node_count)
        .ok()
        .and_then(|n| op_vocab.checked_pow(n))
        .ok_or_else(|| BenchError::InvalidParam("space size overflows".into()))?;
    if n_archs < 2 || n_archs > space {
        return Err(BenchError::InvalidParam(format!("n_archs {n_archs} outside [2, {space}]")));
    }

    let topology = Arc::new(Topology::ladder(node_count)?);
    let edges: Vec<(usize, usize)> = (0..node_count)
        .flat_map(|i| (0..node_count).map(move |j| (i, j)))
        .filter(|&(i, j)| topology.adjacency()[i][j] == 1)
        .collect();
    let mut codes: Vec<usize> = if n_archs == space {
        (0..space).collect()
    } else {
        index::sample(&mut seeded(derive_seed(seed, "synth-archs")), space, n_archs).into_vec()
    };
    codes.sort_unstable();
    let ops: Vec<Vec<usize>> = codes.iter().map(|&c| decode(c, node_count, op_vocab)).collect();

    let base = Latent::draw(&mut seeded(derive_seed(seed, "synth-latent-base")), node_count, op_vocab);
    let mut z0: Vec<f64> = ops.iter().map(|o| base.eval(o, &edges, op_vocab)).collect();
    standardize(&mut z0);

    let mut noise_rng = seeded(derive_seed(seed, "synth-noise"));
    let probe_idx = index::sample(&mut seeded(derive_seed(seed, "synth-probe")), n_archs, PROBE_SAMPLES.min(n_archs));
    let probe_inputs: Vec<Vec<f64>> = probe_idx
        .iter()
        .map(|k| {
            let mut x = vec![0.0; node_count * op_vocab];
            for (i, &o) in ops[k].iter().enumerate() {
                x[i * op_vocab + o] = 1.0;
            }
            x
        })
        .collect();

    let mut specs = Vec::with_capacity(tasks.len());
    let mut metrics = Vec::with_capacity(tasks.len());
    for (k, task) in tasks.iter().enumerate() {
        let (z, coef) = if k == 0 {
            (z0.clone(), base.linear(node_count, op_vocab))
        } else {
            let label = format!("synth-latent-{k}");
            let ind = Latent::draw(&mut seeded(derive_seed(seed, &label)), node_count, op_vocab);
            let mut zi: Vec<f64> = ops.iter().map(|o| ind.eval(o, &edges, op_vocab)).collect();
            standardize(&mut zi);
            let proj = zi.iter().zip(&z0).map(|(a, b)| a * b).sum::<f64>() / z0.len() as f64;
            zi.iter_mut().zip(&z0).for_each(|(a, b)| *a -= proj * b);
            standardize(&mut zi);
            // Pearson weight giving the requested Spearman correlation for Gaussian margins.
            let r = 2.0 * (std::f64::consts::PI * task.corr / 6.0).sin();
            let s = (1.0 - r * r).max(0.0).sqrt();
            let z = z0.iter().zip(&zi).map(|(a, b)| r * a + s * b).collect();
            let coef = base
                .linear(node_count, op_vocab)
                .iter()
                .zip(ind.linear(node_count, op_vocab))
                .map(|(a, b)| r * a + s * b)
                .collect();
            (z, coef)
        };
        let sign = match task.direction {
            Direction::Max => 1.0,
            Direction::Min => -1.0,
        };
        let col: Vec<f64> = z
            .iter()
            .map(|v| {
                let eps: f64 = StandardNormal.sample(&mut noise_rng);
                CENTER + sign * SPREAD * v + noise_sd * eps
            })
            .collect();
        let norm = coef.iter().map(|c| c * c).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let probe = BernoulliProbe::new(coef.iter().map(|c| 2.0 * c / norm).collect());
        specs.push(TaskSpec {
            name: task.name.clone(),
            direction: task.direction,
            embedding: diag_fim(&probe, &probe_inputs),
        });
        metrics.push(col);
    }

    let ids = ops.iter().map(|o| o.iter().map(usize::to_string).collect::<Vec<_>>().join("-")).collect();
    let archs = ops
        .into_iter()
        .map(|o| ArchEncoding::new(o, topology.clone(), op_vocab))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    TabularBenchmark::new(ids, archs, specs, metrics, op_vocab, Some(topology))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::spearman;

    #[test]
    fn micro_space_size() {
        let b = gen_synthetic(4096, MICRO_NODE_COUNT, MICRO_OP_VOCAB, &default_synthetic_tasks(), 0.0, 1).unwrap();
        assert_eq!(b.len(), 4096);
        assert_eq!(b.tasks.len(), 4);
        assert_eq!(b.task_dim(), MICRO_NODE_COUNT * MICRO_OP_VOCAB);
    }

    #[test]
    fn perfect_correlation_copies_ranking() {
        let tasks = [SynthTask::new("a", Direction::Max, 1.0), SynthTask::new("b", Direction::Min, 1.0)];
        let b = gen_synthetic(200, 5, 3, &tasks, 0.0, 4).unwrap();
        assert_eq!(b.true_ranks(0), b.true_ranks(1));
    }

    #[test]
    fn reproducible_bytes() {
        let tasks = default_synthetic_tasks();
        let a = gen_synthetic(200, 6, 4, &tasks, 0.3, 9).unwrap().to_jsonl();
        let b = gen_synthetic(200, 6, 4, &tasks, 0.3, 9).unwrap().to_jsonl();
        let c = gen_synthetic(200, 6, 4, &tasks, 0.3, 10).unwrap().to_jsonl();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_parameters() {
        let t = [SynthTask::new("a", Direction::Max, 1.5)];
        assert!(gen_synthetic(10, 3, 3, &t, 0.0, 0).is_err());
        let t = [SynthTask::new("a", Direction::Max, 1.0)];
        assert!(gen_synthetic(28, 3, 3, &t, 0.0, 0).is_err());
        assert!(gen_synthetic(10, 3, 3, &t, -1.0, 0).is_err());
    }

    #[test]
    fn realized_correlation_tracks_target() {
        let tasks = [SynthTask::new("a", Direction::Max, 1.0), SynthTask::new("b", Direction::Max, 0.8)];
        let b = gen_synthetic(4096, 6, 4, &tasks, 0.0, 2).unwrap();
        let rho = spearman(&b.metrics[0], &b.metrics[1]).unwrap();
        assert!((rho - 0.8).abs() < 0.05, "{rho}");
    }
}
