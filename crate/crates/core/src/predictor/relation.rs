use super::{ArchEncoding, PredictorState, Result};
use crate::graph::DirectedGraph;
use crate::trust::{PairData, RelationClass};

/// Anything that answers ordered comparison queries over a fixed candidate
/// list, indexed `0..len()`.
pub trait PairJudge: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Probability that candidate `i` beats candidate `j` for the query `(i, j)`.
    fn p_first(&self, i: usize, j: usize) -> f64;

    /// Representation of the query `(i, j)` used for trust scoring.
    fn features(&self, i: usize, j: usize) -> Vec<f64>;
}

/// Predictor inference over a candidate list with the encoder and the
/// pair-independent parts of the head evaluated once per candidate.
///
/// The first head layer is linear in the concatenated input, so its
/// pre-activation splits into a first-slot term, a second-slot term and a
/// task term.
pub struct PairScorer {
    k: usize,
    first: Vec<f64>,
    second: Vec<f64>,
    bias: Vec<f64>,
    w_diff: Vec<f64>,
    b_diff: f64,
}

impl PairScorer {
    pub fn new(s: &PredictorState, cands: &[ArchEncoding], t: &[f64]) -> Result<Self> {
        s.check_task(t)?;
        let e = s.config.emb_dim;
        let k = s.config.head_dim;
        let w1 = &s.params.head_w1;
        let mut first = vec![0.0; cands.len() * k];
        let mut second = vec![0.0; cands.len() * k];
        for (idx, a) in cands.iter().enumerate() {
            let emb = s.encode_arch(a)?;
            let (f, sc) = (&mut first[idx * k..(idx + 1) * k], &mut second[idx * k..(idx + 1) * k]);
            for (r, &x) in emb.iter().enumerate() {
                for c in 0..k {
                    f[c] += x * w1.at(r, c);
                    sc[c] += x * w1.at(e + r, c);
                }
            }
        }
        let tp = s.project_task(t);
        let mut bias = s.params.head_b1.clone();
        for (r, &x) in tp.iter().enumerate() {
            for (c, b) in bias.iter_mut().enumerate() {
                *b += x * w1.at(2 * e + r, c);
            }
        }
        let w2 = &s.params.head_w2;
        let w_diff = (0..k).map(|c| w2.at(c, 0) - w2.at(c, 1)).collect();
        let b_diff = s.params.head_b2[0] - s.params.head_b2[1];
        Ok(Self { k, first, second, bias, w_diff, b_diff })
    }

    #[inline]
    fn hidden(&self, i: usize, j: usize, c: usize) -> f64 {
        (self.bias[c] + self.first[i * self.k + c] + self.second[j * self.k + c]).max(0.0)
    }
}

impl PairJudge for PairScorer {
    fn len(&self) -> usize {
        self.first.len() / self.k.max(1)
    }

    fn p_first(&self, i: usize, j: usize) -> f64 {
        let diff = (0..self.k).fold(self.b_diff, |acc, c| acc + self.w_diff[c] * self.hidden(i, j, c));
        super::model::prob_first(diff)
    }

    fn features(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.k).map(|c| self.hidden(i, j, c)).collect()
    }
}

/// Relation digraph under the agreement rule: `i -> j` iff query `(i, j)`
/// says `i` wins and query `(j, i)` says `j` loses. Pairs where the two
/// orders disagree stay incomparable. Each edge `i -> j` carries the
/// features of query `(i, j)` and the class "first is better".
pub fn relation_graph(judge: &(impl PairJudge + ?Sized)) -> (DirectedGraph, PairData) {
    let n = judge.len();
    let mut g = DirectedGraph::new(n.max(1)).expect("non-empty");
    let mut data = PairData::default();
    for i in 0..n {
        for j in i + 1..n {
            let ij = judge.p_first(i, j) > 0.5;
            let ji = judge.p_first(j, i) > 0.5;
            let edge = match (ij, ji) {
                (true, false) => (i, j),
                (false, true) => (j, i),
                _ => continue,
            };
            g.add_edge(edge.0, edge.1).expect("distinct in-range nodes");
            data.embeddings.insert(edge, judge.features(edge.0, edge.1));
            data.preds.insert(edge, RelationClass::FirstBetter);
        }
    }
    (g, data)
}

pub fn build_relation_graph(
    cands: &[ArchEncoding],
    s: &PredictorState,
    t: &[f64],
) -> Result<(DirectedGraph, PairData)> {
    Ok(relation_graph(&PairScorer::new(s, cands, t)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DirectedGraph;

    struct Table(Vec<Vec<f64>>);

    impl PairJudge for Table {
        fn len(&self) -> usize {
            self.0.len()
        }
        fn p_first(&self, i: usize, j: usize) -> f64 {
            self.0[i][j]
        }
        fn features(&self, i: usize, j: usize) -> Vec<f64> {
            vec![i as f64, j as f64]
        }
    }

    #[test]
    fn agreement_rule() {
        // (0,1): both orders say 0 wins. (0,2): both orders claim the first slot wins.
        let t = Table(vec![vec![0.5, 0.8, 0.9], vec![0.3, 0.5, 0.2], vec![0.7, 0.6, 0.5]]);
        let (g, data) = relation_graph(&t);
        assert_eq!(g, DirectedGraph::from_edges(3, &[(0, 1), (2, 1)]).unwrap());
        assert_eq!(data.embeddings[&(2, 1)], vec![2.0, 1.0]);
        assert_eq!(data.preds.len(), 2);
    }
}
