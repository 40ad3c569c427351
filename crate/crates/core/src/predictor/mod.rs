//! Pairwise superiority predictor: a two-layer message-passing encoder per
//! architecture, a projected task embedding, and a fully connected head
//! producing a two-class softmax over "first is better" / "second is better".

mod arch;
mod fim;
mod model;
mod relation;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use arch::{ArchEncoding, Topology};
pub use fim::{diag_fim, BernoulliProbe, ProbabilisticProbe};
pub use model::{Mat, Params, PredictorConfig, PredictorState, PARAM_GROUPS};
pub use relation::{build_relation_graph, relation_graph, PairJudge, PairScorer};
pub use train::{
    contradiction_rate, finetune_target, labeled_pairs, pair_accuracy, train_source, train_source_report,
    FinetuneOutcome, TrainConfig, TrainReport,
};

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("all metrics are equal; no pair has a winner")]
    DegenerateLabels,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid task embedding: {0}")]
    InvalidTaskEmbedding(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PredictorError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingSource {
    ExternalFile,
    DiagFim,
    Zeros,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEmbedding {
    pub vec: Vec<f64>,
    pub source: EmbeddingSource,
}

impl TaskEmbedding {
    pub fn new(vec: Vec<f64>, source: EmbeddingSource) -> Result<Self> {
        if let Some(x) = vec.iter().find(|x| !x.is_finite()) {
            return Err(PredictorError::InvalidTaskEmbedding(format!("non-finite entry {x}")));
        }
        Ok(Self { vec, source })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { vec: vec![0.0; dim], source: EmbeddingSource::Zeros }
    }

    /// Task embedding file: a JSON array of floats.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let vec: Vec<f64> = serde_json::from_str(&text)
            .map_err(|e| PredictorError::InvalidTaskEmbedding(format!("{}: {e}", path.display())))?;
        Self::new(vec, EmbeddingSource::ExternalFile)
    }

    pub fn dim(&self) -> usize {
        self.vec.len()
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config: PredictorConfig,
    seed: u64,
    params: Params,
}

impl PredictorState {
    pub fn to_json(&self) -> String {
        let ck = Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            seed: self.seed,
            params: self.params.clone(),
        };
        serde_json::to_string(&ck).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| PredictorError::Checkpoint(e.to_string()))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(PredictorError::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        let expected = Params::zeros(&ck.config);
        for ((name, got), (_, want)) in ck.params.groups().iter().zip(expected.groups().iter()) {
            if got.len() != want.len() {
                return Err(PredictorError::Checkpoint(format!(
                    "{name} has {} values, config implies {}",
                    got.len(),
                    want.len()
                )));
            }
        }
        let shapes_ok = [
            (&ck.params.enc_w1, &expected.enc_w1),
            (&ck.params.enc_w2, &expected.enc_w2),
            (&ck.params.task_w, &expected.task_w),
            (&ck.params.head_w1, &expected.head_w1),
            (&ck.params.head_w2, &expected.head_w2),
        ]
        .iter()
        .all(|(a, b)| a.rows == b.rows && a.cols == b.cols);
        if !shapes_ok {
            return Err(PredictorError::Checkpoint("matrix shape does not match config".into()));
        }
        if !ck.params.is_finite() {
            return Err(PredictorError::Checkpoint("non-finite parameter".into()));
        }
        Ok(Self { config: ck.config, seed: ck.seed, params: ck.params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;

    fn arch(ops: &[usize]) -> ArchEncoding {
        let t = Arc::new(Topology::ladder(ops.len()).unwrap());
        ArchEncoding::new(ops.to_vec(), t, 4).unwrap()
    }

    #[test]
    fn forward_is_a_distribution() {
        let s = PredictorState::new(PredictorConfig::new(4, 3), 11);
        let t = [0.2, -0.1, 0.5];
        for (a, b) in [([0, 1, 2, 3], [3, 2, 1, 0]), ([1, 1, 1, 1], [1, 1, 1, 1])] {
            let (pa, pb) = s.forward_pair(&arch(&a), &arch(&b), &t).unwrap();
            assert!(pa > 0.0 && pa < 1.0 && pb > 0.0 && pb < 1.0);
            assert!((pa + pb - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn shape_errors() {
        let s = PredictorState::new(PredictorConfig::new(4, 3), 1);
        let a = arch(&[0, 1, 2]);
        assert!(matches!(s.forward_pair(&a, &a, &[0.0; 2]), Err(PredictorError::ShapeMismatch(_))));
        let t5 = Arc::new(Topology::ladder(3).unwrap());
        let wide = ArchEncoding::new(vec![0, 4, 1], t5, 5).unwrap();
        assert!(matches!(s.encode_arch(&wide), Err(PredictorError::ShapeMismatch(_))));
    }

    #[test]
    fn zero_params_give_zero_embedding() {
        let cfg = PredictorConfig::new(4, 2);
        let s = PredictorState { params: Params::zeros(&cfg), config: cfg, seed: 0 };
        assert!(s.encode_arch(&arch(&[0, 3, 2, 1])).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn checkpoint_round_trip() {
        let s = PredictorState::new(PredictorConfig::new(4, 3), 5);
        let back = PredictorState::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        let mut v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        v["version"] = 99.into();
        assert!(PredictorState::from_json(&v.to_string()).is_err());
        assert!(PredictorState::from_json("{").is_err());
    }

    #[test]
    fn task_embedding_rejects_nan() {
        assert!(TaskEmbedding::new(vec![1.0, f64::NAN], EmbeddingSource::Zeros).is_err());
        assert_eq!(TaskEmbedding::zeros(3).dim(), 3);
    }
}
