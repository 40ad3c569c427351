mod common;

use archgraph::graph::{is_acyclic, DirectedGraph};
use archgraph::mwas::{max_mas, mwas_approx, mwas_bruteforce, spectral_radius, MwasError, MwasParams};
use archgraph::rng::seeded;
use common::{nilpotent, random_dag, random_weighted};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn weighted(max_n: usize, max_edges: usize) -> impl Strategy<Value = DirectedGraph> {
    (2..=max_n, any::<u64>()).prop_map(move |(n, seed)| random_weighted(&mut seeded(seed), n, max_edges))
}

/// Best retained weight over every acyclic edge subset whose drop ratio is
/// below `eps`, by exhaustive enumeration with a boolean nilpotency check.
fn exhaustive_optimum(g: &DirectedGraph, eps: f64) -> Option<f64> {
    let edges: Vec<(usize, usize, f64)> = g.weighted_edges().collect();
    let m = edges.len();
    let mut best: Option<f64> = None;
    for mask in 1u32..(1 << m) {
        let kept = mask.count_ones() as usize;
        if 1.0 - kept as f64 / m as f64 >= eps {
            continue;
        }
        let sub: Vec<(usize, usize, f64)> = (0..m).filter(|k| mask >> k & 1 == 1).map(|k| edges[k]).collect();
        let h = DirectedGraph::from_weighted_edges(g.node_count(), &sub).unwrap();
        if nilpotent(&h) {
            let w: f64 = sub.iter().map(|e| e.2).sum();
            best = Some(best.map_or(w, |b: f64| b.max(w)));
        }
    }
    best
}

fn eigen_radius(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
    // Eigenvalues of a defective nilpotent matrix carry O(eps^(1/n)) rounding error.
    // Nonnegative entries make A^n == 0 exact in that case.
    if m.pow(n as u32).iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn approx_result_is_a_sound_subgraph(g in weighted(9, 30), eps in 0.0f64..=1.0, seed in any::<u64>()) {
        let res = mwas_approx(&g, &MwasParams::with_eps(eps), seed).unwrap();
        let h = &res.subgraph;
        prop_assert!(is_acyclic(h));
        prop_assert_eq!(h.node_count(), g.node_count());
        for (i, j, w) in h.weighted_edges() {
            prop_assert!(g.has_edge(i, j));
            prop_assert_eq!(w, g.weight(i, j));
        }
        prop_assert!((res.score - h.total_weight()).abs() < 1e-12);
        let ratio = 1.0 - h.edge_count() as f64 / g.edge_count() as f64;
        prop_assert!((res.drop_ratio - ratio).abs() < 1e-12);
        prop_assert_eq!(res.met_threshold, res.drop_ratio < eps);
        let bound = (g.edge_count() as f64).log2().ceil() as usize + res.infeasible_steps + 1;
        prop_assert!(res.iterations <= bound, "{} > {}", res.iterations, bound);
    }

    #[test]
    fn approx_is_deterministic_per_seed(g in weighted(8, 25), seed in any::<u64>()) {
        let p = MwasParams::with_eps(0.3);
        prop_assert_eq!(mwas_approx(&g, &p, seed).unwrap(), mwas_approx(&g, &p, seed).unwrap());
    }

    #[test]
    fn acyclic_inputs_are_returned_whole(n in 2usize..20, p in 0.1f64..0.9, seed in any::<u64>(), eps in 0.01f64..=1.0) {
        let mut rng = seeded(seed);
        let dag = random_dag(&mut rng, n, p);
        prop_assume!(dag.edge_count() > 0);
        let res = mwas_approx(&dag, &MwasParams::with_eps(eps), seed).unwrap();
        prop_assert_eq!(res.drop_ratio, 0.0);
        prop_assert_eq!(res.subgraph.edges().collect::<Vec<_>>(), dag.edges().collect::<Vec<_>>());
        prop_assert!(res.met_threshold);
    }

    #[test]
    fn max_mas_respects_cut_budget(g in weighted(9, 30), r in 0usize..6, seed in any::<u64>()) {
        if let Some(h) = max_mas(&g, r, seed) {
            prop_assert!(is_acyclic(&h));
            let (before, after) = (g.in_degrees(), h.in_degrees());
            prop_assert!(before.iter().zip(&after).all(|(b, a)| b - a <= r));
            prop_assert!(h.edges().all(|(i, j)| g.has_edge(i, j)));
        }
    }

    #[test]
    fn bruteforce_matches_exhaustive_enumeration(g in weighted(6, 10), eps in 0.05f64..=1.0) {
        let oracle = exhaustive_optimum(&g, eps);
        let res = mwas_bruteforce(&g, eps).unwrap();
        prop_assert!(is_acyclic(&res.subgraph));
        match oracle {
            Some(best) => {
                prop_assert!(res.met_threshold);
                prop_assert!((res.score - best).abs() < 1e-9, "{} vs {}", res.score, best);
            }
            None => prop_assert!(!res.met_threshold),
        }
    }

    #[test]
    fn spectral_radius_matches_eigendecomposition(n in 1usize..8, seed in any::<u64>(), density in 0.1f64..0.8) {
        use rand::Rng;
        let mut rng = seeded(seed);
        let a: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| if rng.random::<f64>() < density { rng.random::<f64>() } else { 0.0 }).collect())
            .collect();
        let rho = spectral_radius(&a, 1e-12, 1_000_000).unwrap();
        let want = eigen_radius(&a);
        prop_assert!((rho - want).abs() <= 1e-6 * (1.0 + want), "power {} vs eigen {}", rho, want);
    }
}

#[test]
fn approx_rejects_empty_and_bad_params() {
    let g = DirectedGraph::new(3).unwrap();
    assert!(matches!(mwas_approx(&g, &MwasParams::default(), 0), Err(MwasError::NoEdges)));
    let tri = DirectedGraph::from_weighted_edges(3, &[(0, 1, 0.9), (1, 2, 0.8), (2, 0, 0.1)]).unwrap();
    assert!(matches!(mwas_approx(&tri, &MwasParams::with_eps(1.5), 0), Err(MwasError::InvalidParams(_))));
}
