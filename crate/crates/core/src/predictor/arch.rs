use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{PredictorError, Result};
use crate::graph::{is_acyclic, DirectedGraph};

/// Fixed DAG shared by every architecture of a search space, together with
/// its degree-normalized propagation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u8>>", into = "Vec<Vec<u8>>")]
pub struct Topology {
    adjacency: Vec<Vec<u8>>,
    /// `norm[i][j]` weights node `j`'s state in node `i`'s update. Node `j`
    /// splits its state evenly between itself and its successors, so every
    /// column sums to 1 and propagation conserves the total over nodes.
    norm: Vec<Vec<f64>>,
}

impl Topology {
    pub fn new(adjacency: Vec<Vec<u8>>) -> Result<Self> {
        let n = adjacency.len();
        if n == 0 {
            return Err(PredictorError::InvalidArch("empty topology".into()));
        }
        let mut g = DirectedGraph::new(n).expect("n > 0");
        for (i, row) in adjacency.iter().enumerate() {
            if row.len() != n {
                return Err(PredictorError::InvalidArch(format!("adjacency row {i} has length {}", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 if i != j => g.add_edge(i, j).expect("checked bounds"),
                    _ => return Err(PredictorError::InvalidArch(format!("bad adjacency entry ({i},{j}) = {v}"))),
                }
            }
        }
        if !is_acyclic(&g) {
            return Err(PredictorError::InvalidArch("topology has a cycle".into()));
        }
        let share: Vec<f64> =
            adjacency.iter().map(|row| 1.0 / (row.iter().filter(|&&v| v == 1).count() + 1) as f64).collect();
        let mut norm = vec![vec![0.0; n]; n];
        for (i, row) in norm.iter_mut().enumerate() {
            row[i] = share[i];
            for j in (0..n).filter(|&j| adjacency[j][i] == 1) {
                row[j] = share[j];
            }
        }
        Ok(Self { adjacency, norm })
    }

    /// `i -> i+1` and `i -> i+2`: a chain with skip connections.
    pub fn ladder(nodes: usize) -> Result<Self> {
        let adj = (0..nodes).map(|i| (0..nodes).map(|j| u8::from(j == i + 1 || j == i + 2)).collect()).collect();
        Self::new(adj)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn adjacency(&self) -> &[Vec<u8>] {
        &self.adjacency
    }

    pub(crate) fn norm(&self) -> &[Vec<f64>] {
        &self.norm
    }
}

impl TryFrom<Vec<Vec<u8>>> for Topology {
    type Error = PredictorError;
    fn try_from(v: Vec<Vec<u8>>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Topology> for Vec<Vec<u8>> {
    fn from(t: Topology) -> Self {
        t.adjacency
    }
}

/// An architecture in operation-on-node form.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchEncoding {
    pub node_ops: Vec<usize>,
    pub topology: Arc<Topology>,
    pub op_vocab_size: usize,
}

impl ArchEncoding {
    pub fn new(node_ops: Vec<usize>, topology: Arc<Topology>, op_vocab_size: usize) -> Result<Self> {
        if node_ops.len() != topology.node_count() {
            return Err(PredictorError::InvalidArch(format!(
                "{} ops for a {}-node topology",
                node_ops.len(),
                topology.node_count()
            )));
        }
        if let Some(&op) = node_ops.iter().find(|&&op| op >= op_vocab_size) {
            return Err(PredictorError::InvalidArch(format!("op id {op} >= vocabulary size {op_vocab_size}")));
        }
        Ok(Self { node_ops, topology, op_vocab_size })
    }

    pub fn node_count(&self) -> usize {
        self.node_ops.len()
    }
}
