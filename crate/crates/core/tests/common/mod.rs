#![allow(dead_code)]

pub mod gradient;

use archgraph::graph::DirectedGraph;
use rand::seq::SliceRandom;
use rand::Rng;

/// Random weighted digraph with `n` nodes and up to `max_edges` edges drawn
/// from all ordered pairs; weights U(0, 1).
pub fn random_weighted(rng: &mut impl Rng, n: usize, max_edges: usize) -> DirectedGraph {
    let mut pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    pairs.shuffle(rng);
    let cap = max_edges.min(pairs.len());
    let m = rng.random_range(1..=cap);
    let edges: Vec<(usize, usize, f64)> = pairs[..m].iter().map(|&(i, j)| (i, j, rng.random::<f64>())).collect();
    DirectedGraph::from_weighted_edges(n, &edges).unwrap()
}

/// Each ordered pair present independently with probability `p`.
pub fn random_digraph(rng: &mut impl Rng, n: usize, p: f64) -> DirectedGraph {
    let mut g = DirectedGraph::new(n).unwrap();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < p {
                g.add_edge(i, j).unwrap();
            }
        }
    }
    g
}

/// Random DAG: forward edges of a random permutation, probability `p`.
pub fn random_dag(rng: &mut impl Rng, n: usize, p: f64) -> DirectedGraph {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut g = DirectedGraph::new(n).unwrap();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < p {
                g.add_edge(perm[a], perm[b]).unwrap();
            }
        }
    }
    g
}

/// Boolean reachability by Floyd-Warshall over a dense matrix.
pub fn reachability(g: &DirectedGraph) -> Vec<Vec<bool>> {
    let n = g.node_count();
    let mut r: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| g.has_edge(i, j)).collect()).collect();
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

/// A^n = 0 under the boolean matrix product.
pub fn nilpotent(g: &DirectedGraph) -> bool {
    let n = g.node_count();
    let a: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| g.has_edge(i, j)).collect()).collect();
    let mut p = a.clone();
    for _ in 1..n {
        let mut q = vec![vec![false; n]; n];
        for i in 0..n {
            for k in 0..n {
                if p[i][k] {
                    for j in 0..n {
                        q[i][j] |= a[k][j];
                    }
                }
            }
        }
        p = q;
    }
    p.iter().flatten().all(|&x| !x)
}
