use super::{MwasError, MwasResult, Result};
use crate::graph::DirectedGraph;

/// Largest edge count the exhaustive solver accepts.
pub const BRUTE_FORCE_MAX_EDGES: usize = 22;

struct Search<'a> {
    edges: &'a [(usize, usize, f64)],
    /// Edge indices in visiting order (heaviest first, for pruning).
    visit: Vec<usize>,
    /// suffix[k] = total weight of visit[k..].
    suffix: Vec<f64>,
    total: usize,
    eps: f64,
    constrained: bool,
    best: Option<(f64, u32)>,
}

impl Search<'_> {
    fn score(&self, mask: u32) -> f64 {
        // summed in edge order so equal subsets give bitwise-equal scores
        (0..self.edges.len()).filter(|&e| mask >> e & 1 == 1).map(|e| self.edges[e].2).sum()
    }

    fn better(&self, score: f64, mask: u32) -> bool {
        let Some((bs, bm)) = self.best else { return true };
        if score != bs {
            return score > bs;
        }
        let (k, bk) = (mask.count_ones(), bm.count_ones());
        if k != bk {
            return k > bk;
        }
        // Lexicographically smaller edge list. Edge indices follow
        // (src, dst) order, so the first differing edge decides: the set
        // holding the lower index is smaller.
        let diff = mask ^ bm;
        mask >> diff.trailing_zeros() & 1 == 1
    }

    fn run(&mut self, depth: usize, mask: u32, partial: f64, dropped: usize, reach: &mut Vec<u64>) {
        if self.constrained && dropped as f64 / self.total as f64 >= self.eps {
            return;
        }
        if let Some((bs, _)) = self.best {
            if partial + self.suffix[depth] < bs - 1e-9 {
                return;
            }
        }
        if depth == self.visit.len() {
            let s = self.score(mask);
            if self.better(s, mask) {
                self.best = Some((s, mask));
            }
            return;
        }
        let e = self.visit[depth];
        let (u, v, w) = self.edges[e];
        if reach[v] >> u & 1 == 0 {
            let saved = reach.clone();
            for x in 0..reach.len() {
                if reach[x] >> u & 1 == 1 {
                    reach[x] |= saved[v];
                }
            }
            self.run(depth + 1, mask | 1 << e, partial + w, dropped, reach);
            *reach = saved;
        }
        self.run(depth + 1, mask, partial, dropped + 1, reach);
    }
}

/// Exact maximum-weight acyclic edge subset with drop ratio below `eps`.
/// Ties prefer more retained edges, then the lexicographically smallest
/// edge list. When no subset meets the threshold the unconstrained optimum
/// is returned with `met_threshold = false`.
pub fn mwas_bruteforce(g: &DirectedGraph, eps: f64) -> Result<MwasResult> {
    let edges: Vec<(usize, usize, f64)> = g.weighted_edges().collect();
    if edges.is_empty() {
        return Err(MwasError::NoEdges);
    }
    if edges.len() > BRUTE_FORCE_MAX_EDGES {
        return Err(MwasError::TooLarge { edges: edges.len(), cap: BRUTE_FORCE_MAX_EDGES });
    }

    // compact the endpoints so reachability fits in one u64 per node
    let mut ids: Vec<usize> = edges.iter().flat_map(|&(u, v, _)| [u, v]).collect();
    ids.sort_unstable();
    ids.dedup();
    let local = |x: usize| ids.binary_search(&x).unwrap();
    let compact: Vec<(usize, usize, f64)> = edges.iter().map(|&(u, v, w)| (local(u), local(v), w)).collect();

    let mut visit: Vec<usize> = (0..compact.len()).collect();
    visit.sort_by(|&a, &b| compact[b].2.total_cmp(&compact[a].2).then(a.cmp(&b)));
    let mut suffix = vec![0.0; visit.len() + 1];
    for k in (0..visit.len()).rev() {
        suffix[k] = suffix[k + 1] + compact[visit[k]].2;
    }

    let mut search =
        Search { edges: &compact, visit, suffix, total: compact.len(), eps, constrained: true, best: None };
    let fresh = || (0..ids.len()).map(|x| 1u64 << x).collect::<Vec<u64>>();
    search.run(0, 0, 0.0, 0, &mut fresh());
    let met = search.best.is_some();
    if !met {
        search.constrained = false;
        search.run(0, 0, 0.0, 0, &mut fresh());
    }
    let (score, mask) = search.best.expect("the empty subset is always acyclic");

    let subgraph = g.filter_edges(|i, j| {
        let e = edges.iter().position(|&(u, v, _)| (u, v) == (i, j)).unwrap();
        mask >> e & 1 == 1
    });
    let kept = mask.count_ones() as usize;
    let before = g.in_degrees();
    let after = subgraph.in_degrees();
    let r_used = before.iter().zip(&after).map(|(b, a)| b - a).max().unwrap_or(0);
    Ok(MwasResult {
        subgraph,
        score,
        drop_ratio: 1.0 - kept as f64 / edges.len() as f64,
        met_threshold: met,
        r_used,
        iterations: 0,
        infeasible_steps: 0,
    })
}
