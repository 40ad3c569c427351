//! Architecture relation graphs for transferable neural architecture search.
//!
//! A pairwise predictor compares candidate architectures; its decisions
//! form a weighted relation digraph, from which a maximal weighted acyclic
//! subgraph is extracted and topologically ordered to rank the candidates
//! under a small evaluation budget.

pub mod bench;
pub mod graph;
pub mod mwas;
pub mod predictor;
pub mod rng;
pub mod search;
pub mod trust;
