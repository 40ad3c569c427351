//! Ordering-based heuristic for the max-MAS subproblem: find a vertex order,
//! drop the edges pointing backwards, then put back any dropped edge that
//! does not close a cycle. Feasibility at budget `r` means no vertex lost
//! more than `r` incoming edges.

use rand::Rng;

use crate::graph::{scc, topological_order, words_for, DirectedGraph};
use crate::rng::{derive_seed, seeded};

/// Seeded randomized restarts evaluated next to the deterministic order.
pub const RESTARTS: usize = 8;
/// Adjacent-swap budget per vertex in the local search.
pub const SWAPS_PER_NODE: usize = 20;
/// Cap on full insertion sweeps after the swap phase.
pub const MAX_SIFT_SWEEPS: usize = 25;

#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub graph: DirectedGraph,
    pub score: f64,
    pub kept: usize,
    /// Largest number of incoming edges removed from any single vertex.
    pub max_cut: usize,
}

/// Caches the deterministic candidate and the seeded restarts of one graph,
/// so repeated probes at different budgets cost only a feasibility check.
pub(crate) struct MaxMasSolver<'g> {
    g: &'g DirectedGraph,
    seed: u64,
    candidates: Vec<Candidate>,
}

impl<'g> MaxMasSolver<'g> {
    pub fn new(g: &'g DirectedGraph, seed: u64) -> Self {
        Self { g, seed, candidates: Vec::new() }
    }

    fn candidates(&mut self) -> &[Candidate] {
        if self.candidates.is_empty() {
            let g = self.g;
            self.candidates.push(candidate_from_order(g, weighted_order(g, None)));
            for k in 1..=RESTARTS {
                let mut rng = seeded(derive_seed(self.seed, &format!("max-mas-restart-{k}")));
                let order = weighted_order(g, Some(&mut rng));
                self.candidates.push(candidate_from_order(g, order));
            }
        }
        &self.candidates
    }

    /// Heaviest candidate cutting at most `r` incoming edges per vertex, or
    /// `None` when neither the deterministic order nor any restart fits.
    /// Ties go to the earlier candidate.
    pub fn solve(&mut self, r: usize) -> Option<Candidate> {
        self.candidates()
            .iter()
            .filter(|c| c.max_cut <= r)
            .fold(None::<&Candidate>, |best, c| match best {
                Some(b) if b.score >= c.score => Some(b),
                _ => Some(c),
            })
            .cloned()
    }
}

/// Vertex order: strongly connected components in topological order of
/// the condensation, each component ordered by [`component_order`]. Edges
/// between components are then always forward.
fn weighted_order(g: &DirectedGraph, mut rng: Option<&mut crate::rng::StreamRng>) -> Vec<usize> {
    let comps = scc(g);
    let mut comp_of = vec![0; g.node_count()];
    for (c, nodes) in comps.iter().enumerate() {
        for &v in nodes {
            comp_of[v] = c;
        }
    }
    let mut condensed = DirectedGraph::new(comps.len()).expect("at least one component");
    for (i, j) in g.edges() {
        if comp_of[i] != comp_of[j] {
            condensed.add_edge(comp_of[i], comp_of[j]).expect("distinct components");
        }
    }
    let comp_order = topological_order(&condensed).expect("condensation is acyclic");
    let mut order = Vec::with_capacity(g.node_count());
    for c in comp_order {
        let nodes = &comps[c];
        if nodes.len() == 1 {
            order.push(nodes[0]);
        } else {
            let sub = g.induced(nodes).expect("non-empty component");
            let local = component_order(&sub, rng.as_deref_mut());
            order.extend(local.into_iter().map(|k| nodes[k]));
        }
    }
    order
}

/// Weighted greedy order followed by adjacent-swap and insertion local
/// search. With an rng, edge weights are jittered by a factor in [0.5, 1.5)
/// for the greedy phase only.
fn component_order(g: &DirectedGraph, rng: Option<&mut crate::rng::StreamRng>) -> Vec<usize> {
    let n = g.node_count();
    let edges: Vec<(usize, usize, f64)> = match rng {
        None => g.weighted_edges().collect(),
        Some(rng) => g.weighted_edges().map(|(i, j, w)| (i, j, w * rng.random_range(0.5..1.5))).collect(),
    };
    let mut out_adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut in_adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut delta = vec![0.0; n];
    for &(i, j, w) in &edges {
        out_adj[i].push((j, w));
        in_adj[j].push((i, w));
        delta[i] += w;
        delta[j] -= w;
    }

    let mut removed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pick = usize::MAX;
        for v in 0..n {
            if !removed[v] && (pick == usize::MAX || delta[v] > delta[pick]) {
                pick = v;
            }
        }
        removed[pick] = true;
        order.push(pick);
        for &(v, w) in &out_adj[pick] {
            delta[v] += w;
        }
        for &(u, w) in &in_adj[pick] {
            delta[u] -= w;
        }
    }

    // Swapping neighbours u, v only flips the status of the edges between them.
    let mut budget = SWAPS_PER_NODE * n;
    let mut improved = true;
    while improved && budget > 0 {
        improved = false;
        for k in 0..n.saturating_sub(1) {
            let (u, v) = (order[k], order[k + 1]);
            if g.weight(v, u) > g.weight(u, v) {
                order.swap(k, k + 1);
                improved = true;
                budget -= 1;
                if budget == 0 {
                    break;
                }
            }
        }
    }
    sift(g, &mut order);
    order
}

/// Insertion moves: each vertex in turn is moved to the position that
/// minimizes backward weight, until a sweep changes nothing.
fn sift(g: &DirectedGraph, order: &mut Vec<usize>) {
    let n = order.len();
    for _ in 0..MAX_SIFT_SWEEPS {
        let mut improved = false;
        for v in 0..n {
            let p = order.iter().position(|&x| x == v).unwrap();
            order.remove(p);
            // cost(q): backward weight touching v if v is inserted before order[q]
            let mut cost: f64 = order.iter().map(|&w| g.weight(w, v)).sum();
            let mut best = (cost, 0);
            let mut at_p = cost;
            for q in 0..order.len() {
                let x = order[q];
                cost += g.weight(v, x) - g.weight(x, v);
                if q + 1 == p {
                    at_p = cost;
                }
                if cost < best.0 {
                    best = (cost, q + 1);
                }
            }
            if p == 0 {
                at_p = order.iter().map(|&w| g.weight(w, v)).sum();
            }
            if best.0 < at_p - 1e-12 {
                order.insert(best.1, v);
                improved = true;
            } else {
                order.insert(p, v);
            }
        }
        if !improved {
            break;
        }
    }
}

fn candidate_from_order(g: &DirectedGraph, order: Vec<usize>) -> Candidate {
    let n = g.node_count();
    let mut pos = vec![0; n];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    let mut kept = g.filter_edges(|i, j| pos[i] < pos[j]);

    let mut backward: Vec<(usize, usize, f64)> = g.weighted_edges().filter(|&(i, j, _)| pos[i] > pos[j]).collect();
    if !backward.is_empty() {
        backward.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));
        let words = words_for(n);
        // reach[x] = nodes reachable from x in `kept`, x included
        let mut reach = vec![0u64; n * words];
        for &u in order.iter().rev() {
            reach[u * words + u / 64] |= 1 << (u % 64);
            let succ: Vec<usize> = kept.successors(u).collect();
            for v in succ {
                for w in 0..words {
                    let bits = reach[v * words + w];
                    reach[u * words + w] |= bits;
                }
            }
        }
        for (u, v, w) in backward {
            // u -> v closes a cycle iff v already reaches u
            if reach[v * words + u / 64] >> (u % 64) & 1 == 1 {
                continue;
            }
            kept.add_weighted_edge(u, v, w).expect("edge taken from a valid graph");
            let rv: Vec<u64> = reach[v * words..(v + 1) * words].to_vec();
            for x in 0..n {
                if reach[x * words + u / 64] >> (u % 64) & 1 == 1 {
                    for (dst, src) in reach[x * words..(x + 1) * words].iter_mut().zip(&rv) {
                        *dst |= *src;
                    }
                }
            }
        }
    }

    let before = g.in_degrees();
    let after = kept.in_degrees();
    let max_cut = before.iter().zip(&after).map(|(b, a)| b - a).max().unwrap_or(0);
    let score = kept.total_weight();
    let kept_edges = kept.edge_count();
    Candidate { graph: kept, score, kept: kept_edges, max_cut }
}

/// One max-MAS call at budget `r`. The returned subgraph is acyclic and
/// cuts at most `r` incoming edges from every vertex.
pub fn max_mas(g: &DirectedGraph, r: usize, seed: u64) -> Option<DirectedGraph> {
    MaxMasSolver::new(g, seed).solve(r).map(|c| c.graph)
}
