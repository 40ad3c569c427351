//! Trust scores for pairwise decisions and the edge-weight matrix built
//! from them.
//!
//! The trust score of a decision is the distance from its feature vector to
//! the nearest reference point of the *other* class divided by the distance
//! to the nearest point of the *predicted* class, capped at `t_max`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DirectedGraph, GraphError};

pub const DEFAULT_T_MAX: f64 = 1e6;
pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_K: usize = 5;
/// Edges keep a strictly positive weight even when the decision sits on a
/// reference point of the opposing class.
pub const MIN_EDGE_WEIGHT: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TrustError {
    #[error("class {class} has {have} points, needs at least {need}")]
    InsufficientData { class: usize, have: usize, need: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("label {0} is not a binary class id")]
    InvalidLabel(usize),
    #[error("{embeddings} embeddings but {labels} labels")]
    LengthMismatch { embeddings: usize, labels: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("edge {0}->{1} has no embedding or prediction")]
    MissingEdgeData(usize, usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub type Result<T> = std::result::Result<T, TrustError>;

/// Outcome of a pairwise query `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelationClass {
    FirstBetter,
    SecondBetter,
}

impl RelationClass {
    pub fn index(self) -> usize {
        match self {
            RelationClass::FirstBetter => 0,
            RelationClass::SecondBetter => 1,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(RelationClass::FirstBetter),
            1 => Ok(RelationClass::SecondBetter),
            other => Err(TrustError::InvalidLabel(other)),
        }
    }

    pub fn other(self) -> Self {
        match self {
            RelationClass::FirstBetter => RelationClass::SecondBetter,
            RelationClass::SecondBetter => RelationClass::FirstBetter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrustParams {
    pub alpha: f64,
    pub k: usize,
    pub t_max: f64,
}

impl Default for TrustParams {
    fn default() -> Self {
        Self { alpha: DEFAULT_ALPHA, k: DEFAULT_K, t_max: DEFAULT_T_MAX }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    class_points: [Vec<Vec<f64>>; 2],
    dim: usize,
    pub alpha: f64,
    pub k: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Drops the `floor(alpha * len)` points whose k-th within-class neighbour
/// is farthest. Order of the survivors is preserved.
fn density_filter(points: Vec<Vec<f64>>, alpha: f64, k: usize) -> Vec<Vec<f64>> {
    let drop = (alpha * points.len() as f64).floor() as usize;
    if drop == 0 {
        return points;
    }
    let mut radius: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut d: Vec<f64> =
                points.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, q)| sq_dist(p, q)).collect();
            d.sort_by(f64::total_cmp);
            (d[k - 1], i)
        })
        .collect();
    // farthest first; among equal radii the later point goes first
    radius.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)));
    let mut removed = vec![false; points.len()];
    for &(_, i) in radius.iter().take(drop) {
        removed[i] = true;
    }
    points.into_iter().zip(removed).filter_map(|(p, r)| (!r).then_some(p)).collect()
}

pub fn build_reference_set(embeddings: &[Vec<f64>], labels: &[usize], alpha: f64, k: usize) -> Result<ReferenceSet> {
    if embeddings.len() != labels.len() {
        return Err(TrustError::LengthMismatch { embeddings: embeddings.len(), labels: labels.len() });
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(TrustError::InvalidParam(format!("alpha {alpha} outside [0, 1)")));
    }
    if k == 0 {
        return Err(TrustError::InvalidParam("k must be positive".into()));
    }
    let dim = embeddings.first().map_or(0, Vec::len);
    let mut class_points: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    for (x, &y) in embeddings.iter().zip(labels) {
        if x.len() != dim {
            return Err(TrustError::DimensionMismatch { expected: dim, got: x.len() });
        }
        let class = RelationClass::from_index(y)?;
        class_points[class.index()].push(x.clone());
    }
    let need = if alpha > 0.0 { k + 1 } else { 1 };
    for (class, pts) in class_points.iter().enumerate() {
        if pts.len() < need {
            return Err(TrustError::InsufficientData { class, have: pts.len(), need });
        }
    }
    let [first, second] = class_points;
    let class_points = [density_filter(first, alpha, k), density_filter(second, alpha, k)];
    Ok(ReferenceSet { class_points, dim, alpha, k })
}

impl ReferenceSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self, class: RelationClass) -> &[Vec<f64>] {
        &self.class_points[class.index()]
    }

    fn nearest(&self, x: &[f64], class: RelationClass) -> f64 {
        self.class_points[class.index()].iter().map(|p| sq_dist(x, p)).fold(f64::INFINITY, f64::min).sqrt()
    }
}

pub fn trust_score(x: &[f64], y_pred: RelationClass, reference: &ReferenceSet, t_max: f64) -> Result<f64> {
    if x.len() != reference.dim {
        return Err(TrustError::DimensionMismatch { expected: reference.dim, got: x.len() });
    }
    let own = reference.nearest(x, y_pred);
    let other = reference.nearest(x, y_pred.other());
    if own == 0.0 {
        return Ok(t_max);
    }
    Ok((other / own).min(t_max))
}

/// Pairwise-decision data attached to the edges of a relation graph.
#[derive(Debug, Clone, Default)]
pub struct PairData {
    pub embeddings: HashMap<(usize, usize), Vec<f64>>,
    pub preds: HashMap<(usize, usize), RelationClass>,
}

/// Dense `n x n` trust-weight matrix aligned with a relation graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeightMatrix {
    n: usize,
    s: Vec<f64>,
}

impl EdgeWeightMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.s[i * self.n + j]
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.s.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// The relation graph with these trust weights on its edges.
    pub fn weighted_graph(&self, adj: &DirectedGraph) -> Result<DirectedGraph> {
        let mut g = DirectedGraph::new_weighted(adj.node_count())?;
        for (i, j) in adj.edges() {
            g.add_weighted_edge(i, j, self.get(i, j))?;
        }
        Ok(g)
    }
}

pub fn edge_weights(
    adj: &DirectedGraph,
    data: &PairData,
    reference: &ReferenceSet,
    t_max: f64,
) -> Result<EdgeWeightMatrix> {
    let n = adj.node_count();
    let mut s = vec![0.0; n * n];
    for (i, j) in adj.edges() {
        let x = data.embeddings.get(&(i, j)).ok_or(TrustError::MissingEdgeData(i, j))?;
        let y = *data.preds.get(&(i, j)).ok_or(TrustError::MissingEdgeData(i, j))?;
        s[i * n + j] = trust_score(x, y, reference, t_max)?.max(MIN_EDGE_WEIGHT);
    }
    Ok(EdgeWeightMatrix { n, s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use RelationClass::*;

    fn simple_ref() -> ReferenceSet {
        // class 0 at the origin, class 1 at (2, 0)
        build_reference_set(&[vec![0.0, 0.0], vec![2.0, 0.0]], &[0, 1], 0.0, 1).unwrap()
    }

    #[test]
    fn direct_formula() {
        let r = build_reference_set(&[vec![1.0, 0.0], vec![-2.0, 0.0]], &[0, 1], 0.0, 1).unwrap();
        assert_eq!(trust_score(&[0.0, 0.0], FirstBetter, &r, 1e6).unwrap(), 2.0);
        assert_eq!(trust_score(&[1.0, 0.0], SecondBetter, &simple_ref(), 1e6).unwrap(), 1.0);
    }

    #[test]
    fn coincident_point_hits_cap() {
        assert_eq!(trust_score(&[0.0, 0.0], FirstBetter, &simple_ref(), 7.0).unwrap(), 7.0);
        // numerator large, denominator small: capped
        let s = trust_score(&[1e-9, 0.0], FirstBetter, &simple_ref(), 100.0).unwrap();
        assert_eq!(s, 100.0);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            trust_score(&[0.0], FirstBetter, &simple_ref(), 1.0),
            Err(TrustError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn alpha_zero_is_identity() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let labels = [0, 1, 0, 1, 0, 1];
        let r = build_reference_set(&pts, &labels, 0.0, 2).unwrap();
        assert_eq!(r.points(FirstBetter), &[pts[0].clone(), pts[2].clone(), pts[4].clone()]);
        assert_eq!(r.points(SecondBetter).len(), 3);
    }

    #[test]
    fn half_filtering() {
        let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let labels = [0, 0, 0, 0, 1, 1, 1, 1];
        let r = build_reference_set(&pts, &labels, 0.5, 1).unwrap();
        assert_eq!(r.points(FirstBetter).len(), 2);
        assert_eq!(r.points(SecondBetter).len(), 2);
    }

    #[test]
    fn insufficient_and_bad_labels() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert!(matches!(build_reference_set(&pts, &[0, 0, 1], 0.1, 2), Err(TrustError::InsufficientData { .. })));
        assert!(matches!(
            build_reference_set(&pts, &[0, 0, 0], 0.0, 1),
            Err(TrustError::InsufficientData { class: 1, .. })
        ));
        assert!(matches!(build_reference_set(&pts, &[0, 2, 1], 0.0, 1), Err(TrustError::InvalidLabel(2))));
    }

    #[test]
    fn edge_matrix_examples() {
        let r = build_reference_set(&[vec![1.0, 0.0], vec![-2.0, 0.0]], &[0, 1], 0.0, 1).unwrap();
        let adj = DirectedGraph::from_edges(3, &[(0, 2)]).unwrap();
        let mut data = PairData::default();
        data.embeddings.insert((0, 2), vec![0.0, 0.0]);
        data.preds.insert((0, 2), FirstBetter);
        let s = edge_weights(&adj, &data, &r, 1e6).unwrap();
        assert_eq!(s.get(0, 2), 2.0);
        assert_eq!(s.to_rows().iter().flatten().filter(|&&v| v != 0.0).count(), 1);

        let empty = DirectedGraph::new(3).unwrap();
        let s = edge_weights(&empty, &PairData::default(), &r, 1e6).unwrap();
        assert!(s.to_rows().iter().flatten().all(|&v| v == 0.0));

        let missing = DirectedGraph::from_edges(3, &[(1, 2)]).unwrap();
        assert!(matches!(edge_weights(&missing, &data, &r, 1e6), Err(TrustError::MissingEdgeData(1, 2))));
    }
}
