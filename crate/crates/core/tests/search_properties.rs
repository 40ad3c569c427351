use std::collections::HashSet;
use std::sync::Mutex;

use archgraph::bench::{gen_synthetic, kendall_tau, Direction, Phase, SynthTask, TabularBenchmark};
use archgraph::predictor::PairJudge;
use archgraph::rng::{seeded, stream, StreamRng};
use archgraph::search::{arch_graph_search, arch_graph_zero, judge_relation, Method, Relation, SearchConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn truth(a: usize, b: usize) -> Relation {
    match a.cmp(&b) {
        std::cmp::Ordering::Greater => Relation::FirstBetter,
        std::cmp::Ordering::Less => Relation::SecondBetter,
        std::cmp::Ordering::Equal => Relation::Incomparable,
    }
}

/// Kendall tau between the output positions and the true order (larger is better).
fn order_tau(order: &[usize]) -> f64 {
    let pos: Vec<f64> = (0..order.len()).map(|k| -(k as f64)).collect();
    let vals: Vec<f64> = order.iter().map(|&v| v as f64).collect();
    kendall_tau(&pos, &vals).unwrap()
}

proptest! {
    #[test]
    fn perfect_comparator_sorts_any_permutation(perm in (1usize..60).prop_flat_map(|n| Just((0..n).collect::<Vec<usize>>()).prop_shuffle())) {
        let out = arch_graph_zero(&perm, truth);
        prop_assert_eq!(out, (0..perm.len()).rev().collect::<Vec<_>>());
    }

    #[test]
    fn abstaining_comparator_keeps_input_order(input in proptest::collection::vec(any::<u32>(), 0..50)) {
        prop_assert_eq!(arch_graph_zero(&input, |_, _| Relation::Incomparable), input);
    }

    #[test]
    fn output_is_a_permutation(input in proptest::collection::vec(0usize..1000, 0..50), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let table: Vec<Relation> = (0..4).map(|k| [Relation::FirstBetter, Relation::SecondBetter, Relation::Incomparable][k % 3]).collect();
        let out = arch_graph_zero(&input, |_, _| table[rng.random_range(0..table.len())]);
        let (mut a, mut b) = (input.clone(), out);
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
    }
}

/// Ground truth `i > j`, with each directed query answered wrongly
/// with probability `rate`.
struct FlipJudge {
    n: usize,
    rate: f64,
    rng: Mutex<StreamRng>,
}

impl PairJudge for FlipJudge {
    fn len(&self) -> usize {
        self.n
    }
    fn p_first(&self, i: usize, j: usize) -> f64 {
        let right = i > j;
        let flipped = self.rng.lock().unwrap().random::<f64>() < self.rate;
        if right != flipped {
            1.0
        } else {
            0.0
        }
    }
    fn features(&self, _: usize, _: usize) -> Vec<f64> {
        Vec::new()
    }
}

#[test]
fn noisy_comparator_keeps_most_of_the_order() {
    let n = 50;
    let seeds = 20;
    let mut total = 0.0;
    for seed in 0..seeds {
        let mut input: Vec<usize> = (0..n).collect();
        input.shuffle(&mut stream(seed, "input-order"));
        let judge = FlipJudge { n, rate: 0.1, rng: Mutex::new(stream(seed, "flip-noise")) };
        let out = arch_graph_zero(&input, |a, b| judge_relation(&judge, a, b));
        total += order_tau(&out);
    }
    let mean = total / seeds as f64;
    assert!(mean >= 0.6, "mean tau {mean}");
}

fn small_bench() -> TabularBenchmark {
    let tasks = [SynthTask::new("source", Direction::Max, 1.0), SynthTask::new("target", Direction::Min, 0.8)];
    gen_synthetic(512, 6, 4, &tasks, 0.0, 21).unwrap()
}

#[test]
fn every_method_respects_budgets_without_duplicates() {
    let bench = small_bench();
    let mut cfg = SearchConfig { top_k: 80, target_task: "target".into(), ..SearchConfig::default() };
    cfg.train.epochs = 8;
    cfg.train.finetune_epochs = 4;
    for seed in 0..3 {
        cfg.seed = seed;
        for method in Method::ALL {
            let res = arch_graph_search(&bench, &cfg, method, None).unwrap();
            let ledger = &res.ledger;
            assert!(res.target_evaluations() <= cfg.target_budget(), "{method}");
            assert!(ledger.used(Phase::Finetune) <= cfg.b_f + cfg.b_v);
            assert!(
                ledger.used(Phase::Final) <= if method == Method::RandomSearch { cfg.target_budget() } else { cfg.p }
            );
            let mut seen = HashSet::new();
            assert!(
                ledger.evaluated().iter().all(|e| seen.insert((e.task, e.arch))),
                "{method} repeated an evaluation"
            );
            assert_eq!(res.best_true_rank, bench.true_rank(1, res.best_index));
            let best = ledger.evaluated().iter().map(|e| e.metric).fold(f64::INFINITY, f64::min);
            assert_eq!(res.best_metric, best);
        }
    }
}

#[test]
fn runs_are_reproducible_per_seed() {
    let bench = small_bench();
    let mut cfg = SearchConfig { top_k: 60, target_task: "target".into(), seed: 4, ..SearchConfig::default() };
    cfg.train.epochs = 6;
    cfg.train.finetune_epochs = 3;
    for method in Method::ALL {
        let a = arch_graph_search(&bench, &cfg, method, None).unwrap();
        let b = arch_graph_search(&bench, &cfg, method, None).unwrap();
        assert_eq!(a.best_index, b.best_index);
        assert_eq!(a.ledger.evaluated(), b.ledger.evaluated());
        assert_eq!(a.final_tau, b.final_tau);
    }
}
