//! Dense directed graphs over architecture candidates.
//!
//! Adjacency is stored as one bit row per node; an optional dense weight
//! matrix rides alongside it. An edge `i -> j` reads "candidate `i` is
//! predicted to beat candidate `j`".

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("a graph needs at least one node")]
    Empty,
    #[error("node {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("edge {src}->{dst} has invalid weight {weight}")]
    InvalidWeight { src: usize, dst: usize, weight: f64 },
    #[error("graph contains a directed cycle")]
    CyclicInput,
    #[error("priority vector has length {got}, expected {expected}")]
    PriorityLength { got: usize, expected: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GraphError>;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    n: usize,
    words: usize,
    rows: Vec<u64>,
    weights: Option<Vec<f64>>,
}

#[inline]
pub(crate) fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

impl DirectedGraph {
    /// Edgeless, unweighted graph on `n` nodes.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let words = words_for(n);
        Ok(Self { n, words, rows: vec![0; n * words], weights: None })
    }

    /// Edgeless graph carrying a (zero) weight matrix.
    pub fn new_weighted(n: usize) -> Result<Self> {
        let mut g = Self::new(n)?;
        g.weights = Some(vec![0.0; n * n]);
        Ok(g)
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::new(n)?;
        for &(i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn from_weighted_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut g = Self::new_weighted(n)?;
        for &(i, j, w) in edges {
            g.add_weighted_edge(i, j, w)?;
        }
        Ok(g)
    }

    /// Builds a graph from a dense 0/1 matrix; any nonzero entry is an edge.
    pub fn from_dense(adj: &[Vec<f64>]) -> Result<Self> {
        let mut g = Self::new(adj.len())?;
        for (i, row) in adj.iter().enumerate() {
            if row.len() != adj.len() {
                return Err(GraphError::NodeOutOfRange { node: row.len(), n: adj.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    g.add_edge(i, j)?;
                }
            }
        }
        Ok(g)
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        for node in [i, j] {
            if node >= self.n {
                return Err(GraphError::NodeOutOfRange { node, n: self.n });
            }
        }
        if i == j {
            return Err(GraphError::SelfLoop(i));
        }
        Ok(())
    }

    /// Adds `i -> j`. On a weighted graph the new edge gets weight 1.
    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        self.check(i, j)?;
        self.rows[i * self.words + j / 64] |= 1 << (j % 64);
        if let Some(w) = self.weights.as_mut() {
            w[i * self.n + j] = 1.0;
        }
        Ok(())
    }

    /// Adds `i -> j` with a non-negative finite weight. An unweighted graph
    /// is promoted, existing edges keeping weight 1.
    pub fn add_weighted_edge(&mut self, i: usize, j: usize, weight: f64) -> Result<()> {
        self.check(i, j)?;
        if !weight.is_finite() || weight < 0.0 {
            return Err(GraphError::InvalidWeight { src: i, dst: j, weight });
        }
        if self.weights.is_none() {
            let mut w = vec![0.0; self.n * self.n];
            for (a, b) in self.edges() {
                w[a * self.n + b] = 1.0;
            }
            self.weights = Some(w);
        }
        self.rows[i * self.words + j / 64] |= 1 << (j % 64);
        self.weights.as_mut().unwrap()[i * self.n + j] = weight;
        Ok(())
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        if i < self.n && j < self.n {
            self.rows[i * self.words + j / 64] &= !(1 << (j % 64));
            if let Some(w) = self.weights.as_mut() {
                w[i * self.n + j] = 0.0;
            }
        }
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && self.rows[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    /// Weight of `i -> j`: 0 without an edge, 1 for an edge of an unweighted graph.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if !self.has_edge(i, j) {
            return 0.0;
        }
        match &self.weights {
            Some(w) => w[i * self.n + j],
            None => 1.0,
        }
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub(crate) fn row(&self, i: usize) -> &[u64] {
        &self.rows[i * self.words..(i + 1) * self.words]
    }

    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        iter_bits(self.row(i))
    }

    pub fn predecessors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&i| self.has_edge(i, j))
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.row(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for i in 0..self.n {
            for j in self.successors(i) {
                deg[j] += 1;
            }
        }
        deg
    }

    /// All edges in lexicographic `(src, dst)` order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| self.successors(i).map(move |j| (i, j)))
    }

    pub fn weighted_edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges().map(move |(i, j)| (i, j, self.weight(i, j)))
    }

    /// Σ over edges of their weights, summed in edge order.
    pub fn total_weight(&self) -> f64 {
        self.weighted_edges().map(|(_, _, w)| w).sum()
    }

    /// Weighted out-degree minus weighted in-degree for every node.
    pub fn weight_balance(&self) -> Vec<f64> {
        let mut bal = vec![0.0; self.n];
        for (i, j, w) in self.weighted_edges() {
            bal[i] += w;
            bal[j] -= w;
        }
        bal
    }

    /// Same node set, keeping only the edges accepted by `keep`.
    pub fn filter_edges(&self, mut keep: impl FnMut(usize, usize) -> bool) -> Self {
        let mut out = Self {
            n: self.n,
            words: self.words,
            rows: vec![0; self.rows.len()],
            weights: self.weights.as_ref().map(|w| vec![0.0; w.len()]),
        };
        for (i, j) in self.edges() {
            if keep(i, j) {
                out.rows[i * self.words + j / 64] |= 1 << (j % 64);
                if let (Some(dst), Some(src)) = (out.weights.as_mut(), self.weights.as_ref()) {
                    dst[i * self.n + j] = src[i * self.n + j];
                }
            }
        }
        out
    }

    /// Dense copy of the adjacency (or of the weights when `weighted`).
    pub fn to_dense(&self, weighted: bool) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (i, j, w) in self.weighted_edges() {
            m[i][j] = if weighted { w } else { 1.0 };
        }
        m
    }

    /// Induced subgraph on `nodes`; node `k` of the result is `nodes[k]`.
    pub fn induced(&self, nodes: &[usize]) -> Result<Self> {
        let mut out = if self.is_weighted() { Self::new_weighted(nodes.len())? } else { Self::new(nodes.len())? };
        for (a, &u) in nodes.iter().enumerate() {
            for (b, &v) in nodes.iter().enumerate() {
                if self.has_edge(u, v) {
                    if self.is_weighted() {
                        out.add_weighted_edge(a, b, self.weight(u, v))?;
                    } else {
                        out.add_edge(a, b)?;
                    }
                }
            }
        }
        Ok(out)
    }
}

pub(crate) fn iter_bits(row: &[u64]) -> impl Iterator<Item = usize> + '_ {
    row.iter().enumerate().flat_map(|(wi, &word)| {
        let mut w = word;
        std::iter::from_fn(move || {
            if w == 0 {
                None
            } else {
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            }
        })
    })
}

/// Kahn-style elimination. Returns the sources-first order if it covers every node.
fn kahn(g: &DirectedGraph) -> Option<Vec<usize>> {
    let mut indeg = g.in_degrees();
    let mut stack: Vec<usize> = (0..g.n).rev().filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(g.n);
    while let Some(u) = stack.pop() {
        order.push(u);
        for v in g.successors(u) {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                stack.push(v);
            }
        }
    }
    (order.len() == g.n).then_some(order)
}

pub fn is_acyclic(g: &DirectedGraph) -> bool {
    kahn(g).is_some()
}

/// Strongly connected components (Tarjan, iterative). Each component is
/// sorted, and components are listed by their smallest node.
pub fn scc(g: &DirectedGraph) -> Vec<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let n = g.n;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    let succ: Vec<Vec<usize>> = (0..n).map(|i| g.successors(i).collect()).collect();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        // (node, position in its successor list)
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (u, ref mut pos)) = call.last_mut() {
            if *pos < succ[u].len() {
                let v = succ[u][*pos];
                *pos += 1;
                if index[v] == UNSEEN {
                    index[v] = next;
                    low[v] = next;
                    next += 1;
                    stack.push(v);
                    on_stack[v] = true;
                    call.push((v, 0));
                } else if on_stack[v] {
                    low[u] = low[u].min(index[v]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[u]);
                }
                if low[u] == index[u] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == u {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps.sort_by_key(|c| c[0]);
    comps
}

#[derive(Debug, Clone, Copy)]
struct Ready {
    priority: f64,
    node: usize,
}

impl PartialEq for Ready {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ready {}
impl PartialOrd for Ready {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ready {
    // max-heap: larger priority first, then smaller node id
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority).then_with(|| other.node.cmp(&self.node))
    }
}

/// Topological order; among available nodes the highest weighted
/// out-minus-in degree goes first, then the smallest id.
pub fn topological_order(g: &DirectedGraph) -> Result<Vec<usize>> {
    topological_order_with_priority(g, &g.weight_balance())
}

/// Topological order of `g` using an externally supplied priority per node
/// (higher first, ties by ascending id).
pub fn topological_order_with_priority(g: &DirectedGraph, priority: &[f64]) -> Result<Vec<usize>> {
    if priority.len() != g.n {
        return Err(GraphError::PriorityLength { got: priority.len(), expected: g.n });
    }
    let mut indeg = g.in_degrees();
    let mut heap: BinaryHeap<Ready> =
        (0..g.n).filter(|&i| indeg[i] == 0).map(|node| Ready { priority: priority[node], node }).collect();
    let mut order = Vec::with_capacity(g.n);
    while let Some(Ready { node, .. }) = heap.pop() {
        order.push(node);
        for v in g.successors(node) {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                heap.push(Ready { priority: priority[v], node: v });
            }
        }
    }
    if order.len() != g.n {
        return Err(GraphError::CyclicInput);
    }
    Ok(order)
}

/// Strict reachability bit rows of a DAG, given a topological order of it.
fn dag_reach(g: &DirectedGraph, topo: &[usize]) -> Vec<u64> {
    let words = g.words;
    let mut reach = vec![0u64; g.n * words];
    for &u in topo.iter().rev() {
        let mut acc = g.row(u).to_vec();
        for v in g.successors(u) {
            let rv = &reach[v * words..(v + 1) * words];
            for (a, b) in acc.iter_mut().zip(rv) {
                *a |= *b;
            }
        }
        reach[u * words..(u + 1) * words].copy_from_slice(&acc);
    }
    reach
}

/// Hasse diagram of an acyclic graph: drops every edge implied by a longer
/// path. Retained edges keep their weights.
pub fn transitive_reduction(g: &DirectedGraph) -> Result<DirectedGraph> {
    let topo = kahn(g).ok_or(GraphError::CyclicInput)?;
    let mut pos = vec![0; g.n];
    for (k, &u) in topo.iter().enumerate() {
        pos[u] = k;
    }
    let reach = dag_reach(g, &topo);
    let words = g.words;
    let mut keep = vec![0u64; g.n * words];
    for u in 0..g.n {
        let mut succ: Vec<usize> = g.successors(u).collect();
        succ.sort_by_key(|&v| pos[v]);
        let mut covered = vec![0u64; words];
        for v in succ {
            if covered[v / 64] >> (v % 64) & 1 == 1 {
                continue;
            }
            keep[u * words + v / 64] |= 1 << (v % 64);
            let rv = &reach[v * words..(v + 1) * words];
            for (c, r) in covered.iter_mut().zip(rv) {
                *c |= *r;
            }
        }
    }
    Ok(g.filter_edges(|i, j| keep[i * words + j / 64] >> (j % 64) & 1 == 1))
}

/// Transitive closure (strict reachability) of any digraph, as a graph.
/// Pairs `i ~> i` through a cycle are not representable and are omitted.
pub fn transitive_closure(g: &DirectedGraph) -> DirectedGraph {
    let mut out = DirectedGraph::new(g.n).expect("n >= 1");
    let mut seen = vec![false; g.n];
    let mut stack = Vec::new();
    for s in 0..g.n {
        seen.iter_mut().for_each(|x| *x = false);
        stack.clear();
        stack.extend(g.successors(s));
        while let Some(u) = stack.pop() {
            if seen[u] {
                continue;
            }
            seen[u] = true;
            stack.extend(g.successors(u).filter(|&v| !seen[v]));
        }
        for (t, &hit) in seen.iter().enumerate() {
            if hit && t != s {
                out.rows[s * out.words + t / 64] |= 1 << (t % 64);
            }
        }
    }
    out
}

/// Parses the `src dst weight` edge-list format. Blank lines and `#`
/// comments are skipped; the node count is one past the largest id seen,
/// or `min_nodes` if that is larger.
pub fn parse_edge_list(text: &str, min_nodes: usize) -> Result<DirectedGraph> {
    let mut edges = Vec::new();
    let mut max_id = None::<usize>;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| GraphError::Parse { line: lineno + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(err(format!("expected `src dst weight`, got {} fields", fields.len())));
        }
        let src: usize = fields[0].parse().map_err(|e| err(format!("bad src: {e}")))?;
        let dst: usize = fields[1].parse().map_err(|e| err(format!("bad dst: {e}")))?;
        let w: f64 = fields[2].parse().map_err(|e| err(format!("bad weight: {e}")))?;
        if src == dst {
            return Err(err(format!("self-loop on node {src}")));
        }
        if !w.is_finite() || w < 0.0 {
            return Err(err(format!("weight {w} must be finite and non-negative")));
        }
        max_id = Some(max_id.map_or(src.max(dst), |m| m.max(src).max(dst)));
        edges.push((src, dst, w));
    }
    let n = max_id.map_or(0, |m| m + 1).max(min_nodes).max(1);
    DirectedGraph::from_weighted_edges(n, &edges)
}

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<DirectedGraph> {
    parse_edge_list(&std::fs::read_to_string(path)?, 0)
}

pub fn format_edge_list(g: &DirectedGraph) -> String {
    let mut out = format!("# nodes {}\n", g.n);
    for (i, j, w) in g.weighted_edges() {
        let _ = writeln!(out, "{i} {j} {w}");
    }
    out
}
