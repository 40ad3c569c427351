//! Maximal Weighted Acyclic Subgraph extraction.
//!
//! [`mwas_approx`] bisects the per-vertex cut budget `r` from the total edge
//! count downwards, calling the max-MAS heuristic at each probe and keeping
//! the heaviest candidate whose edge drop ratio stays below `eps`.
//! [`mwas_bruteforce`] is the exhaustive reference for small graphs.

mod brute;
mod maxmas;
mod spectral;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DirectedGraph, GraphError};

pub use brute::{mwas_bruteforce, BRUTE_FORCE_MAX_EDGES};
pub use maxmas::{max_mas, MAX_SIFT_SWEEPS, RESTARTS, SWAPS_PER_NODE};
pub use spectral::spectral_radius;

#[derive(Debug, Error)]
pub enum MwasError {
    #[error("graph has no edges")]
    NoEdges,
    #[error("{edges} edges exceed the exhaustive-search cap of {cap}")]
    TooLarge { edges: usize, cap: usize },
    #[error("max-MAS found no feasible subgraph at any probed budget")]
    NoFeasibleSubgraph,
    #[error("power iteration did not converge in {iterations} iterations (last estimate {estimate})")]
    NonConvergence { iterations: usize, estimate: f64 },
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub type Result<T> = std::result::Result<T, MwasError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MwasParams {
    /// Drop-ratio threshold; the pipeline sets it to 1 - validation accuracy.
    pub eps: f64,
    pub max_iterations: usize,
    pub power_iter_tol: f64,
    pub power_iter_max: usize,
}

impl Default for MwasParams {
    fn default() -> Self {
        Self { eps: 0.5, max_iterations: 10_000, power_iter_tol: 1e-9, power_iter_max: 100_000 }
    }
}

impl MwasParams {
    pub fn with_eps(eps: f64) -> Self {
        Self { eps, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eps) {
            return Err(MwasError::InvalidParams(format!("eps {} outside [0, 1]", self.eps)));
        }
        if self.max_iterations == 0 || self.power_iter_max == 0 {
            return Err(MwasError::InvalidParams("iteration caps must be positive".into()));
        }
        if !(self.power_iter_tol > 0.0) {
            return Err(MwasError::InvalidParams("power_iter_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MwasResult {
    pub subgraph: DirectedGraph,
    /// Retained trust weight, Σ (A_T ⊙ S).
    pub score: f64,
    /// 1 - |E_T| / |E|.
    pub drop_ratio: f64,
    pub met_threshold: bool,
    /// Cut budget at which the retained subgraph was produced.
    pub r_used: usize,
    /// Bisection loop iterations executed.
    pub iterations: usize,
    /// Probes on which max-MAS reported no feasible subgraph.
    pub infeasible_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MwasSummary {
    pub score: f64,
    pub drop_ratio: f64,
    pub met_threshold: bool,
    pub r_used: usize,
}

impl MwasResult {
    pub fn summary(&self) -> MwasSummary {
        MwasSummary {
            score: self.score,
            drop_ratio: self.drop_ratio,
            met_threshold: self.met_threshold,
            r_used: self.r_used,
        }
    }
}

/// Approximate MWAS by integer bisection over the max-MAS cut budget.
///
/// `seed` drives the randomized restarts of the max-MAS heuristic. If no
/// probed candidate reaches a drop ratio below `eps`, the heaviest feasible
/// candidate is returned with `met_threshold = false`.
pub fn mwas_approx(g: &DirectedGraph, params: &MwasParams, seed: u64) -> Result<MwasResult> {
    params.validate()?;
    let total = g.edge_count();
    if total == 0 {
        return Err(MwasError::NoEdges);
    }
    let mut solver = maxmas::MaxMasSolver::new(g, seed);

    struct Kept {
        cand: maxmas::Candidate,
        r: usize,
    }
    let drop_ratio = |kept: usize| 1.0 - kept as f64 / total as f64;

    let mut best: Option<Kept> = None;
    let mut fallback: Option<Kept> = None;
    let mut s0 = 0.0;
    let mut r = total;
    let mut seg = total;
    let mut iterations = 0;
    let mut infeasible_steps = 0;

    // With a single edge the bisection loop never runs; probe the start once.
    let mut force_probe = seg <= 1;
    while (seg > 1 || force_probe) && iterations < params.max_iterations {
        force_probe = false;
        iterations += 1;
        match solver.solve(r) {
            None => {
                infeasible_steps += 1;
                r = (r + 1).min(total);
            }
            Some(cand) => {
                let s = cand.score;
                let ratio = drop_ratio(cand.kept);
                let beats_fallback = match &fallback {
                    None => true,
                    Some(f) => s > f.cand.score || (s == f.cand.score && cand.kept > f.cand.kept),
                };
                if ratio < params.eps && s > s0 {
                    s0 = s;
                    best = Some(Kept { cand: cand.clone(), r });
                }
                if beats_fallback {
                    fallback = Some(Kept { cand, r });
                }
                seg /= 2;
                r = r.saturating_sub(seg);
            }
        }
    }

    let (chosen, met) = match (best, fallback) {
        (Some(b), _) => (b, true),
        (None, Some(f)) => {
            let met = drop_ratio(f.cand.kept) < params.eps;
            (f, met)
        }
        (None, None) => return Err(MwasError::NoFeasibleSubgraph),
    };
    Ok(MwasResult {
        drop_ratio: drop_ratio(chosen.cand.kept),
        score: chosen.cand.score,
        subgraph: chosen.cand.graph,
        met_threshold: met,
        r_used: chosen.r,
        iterations,
        infeasible_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::is_acyclic;

    fn triangle() -> DirectedGraph {
        DirectedGraph::from_weighted_edges(3, &[(0, 1, 0.9), (1, 2, 0.8), (2, 0, 0.1)]).unwrap()
    }

    #[test]
    fn acyclic_input_is_kept() {
        let g = DirectedGraph::from_weighted_edges(4, &[(0, 1, 0.5), (1, 2, 0.25), (0, 3, 1.5)]).unwrap();
        let res = mwas_approx(&g, &MwasParams::with_eps(0.5), 0).unwrap();
        assert_eq!(res.subgraph, g);
        assert_eq!(res.score, g.total_weight());
        assert_eq!(res.drop_ratio, 0.0);
        assert!(res.met_threshold);
    }

    #[test]
    fn triangle_keeps_heavy_pair() {
        let res = mwas_approx(&triangle(), &MwasParams::with_eps(0.5), 0).unwrap();
        assert!((res.score - 1.7).abs() < 1e-12);
        assert!((res.drop_ratio - 1.0 / 3.0).abs() < 1e-12);
        assert!(res.met_threshold);
        assert!(is_acyclic(&res.subgraph));
        assert!(!res.subgraph.has_edge(2, 0));
    }

    #[test]
    fn triangle_below_threshold_falls_back() {
        let res = mwas_approx(&triangle(), &MwasParams::with_eps(0.2), 0).unwrap();
        assert!(!res.met_threshold);
        assert!((res.score - 1.7).abs() < 1e-12);
    }

    #[test]
    fn single_edge_graph() {
        let g = DirectedGraph::from_weighted_edges(2, &[(1, 0, 0.3)]).unwrap();
        let res = mwas_approx(&g, &MwasParams::with_eps(0.5), 0).unwrap();
        assert_eq!(res.subgraph, g);
        assert_eq!(res.iterations, 1);
    }

    #[test]
    fn errors() {
        let g = DirectedGraph::new_weighted(3).unwrap();
        assert!(matches!(mwas_approx(&g, &MwasParams::default(), 0), Err(MwasError::NoEdges)));
        let bad = MwasParams { eps: 1.5, ..MwasParams::default() };
        assert!(matches!(mwas_approx(&triangle(), &bad, 0), Err(MwasError::InvalidParams(_))));
    }
}
