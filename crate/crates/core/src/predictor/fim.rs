use super::{EmbeddingSource, TaskEmbedding};

/// A binary-output probability model `p_w(y = 1 | x)` exposing the gradient
/// of its log-likelihood with respect to its parameters `w`.
pub trait ProbabilisticProbe {
    fn param_count(&self) -> usize;
    fn prob_one(&self, x: &[f64]) -> f64;
    fn grad_log_lik(&self, x: &[f64], y: bool) -> Vec<f64>;
}

/// Logistic probe `p = sigmoid(w . x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliProbe {
    pub w: Vec<f64>,
}

impl BernoulliProbe {
    pub fn new(w: Vec<f64>) -> Self {
        Self { w }
    }
}

impl ProbabilisticProbe for BernoulliProbe {
    fn param_count(&self) -> usize {
        self.w.len()
    }

    fn prob_one(&self, x: &[f64]) -> f64 {
        let z: f64 = self.w.iter().zip(x).map(|(w, x)| w * x).sum();
        1.0 / (1.0 + (-z).exp())
    }

    fn grad_log_lik(&self, x: &[f64], y: bool) -> Vec<f64> {
        let r = f64::from(u8::from(y)) - self.prob_one(x);
        x.iter().map(|xi| r * xi).collect()
    }
}

/// Diagonal of the Fisher information, averaged over `inputs`. The label
/// expectation is taken exactly over both outcomes, weighted by the model's
/// own probabilities, so the result carries no sampling noise.
pub fn diag_fim(probe: &impl ProbabilisticProbe, inputs: &[Vec<f64>]) -> TaskEmbedding {
    let mut diag = vec![0.0; probe.param_count()];
    for x in inputs {
        let p1 = probe.prob_one(x);
        for (y, py) in [(true, p1), (false, 1.0 - p1)] {
            if py == 0.0 {
                continue;
            }
            for (d, g) in diag.iter_mut().zip(probe.grad_log_lik(x, y)) {
                *d += py * g * g;
            }
        }
    }
    if !inputs.is_empty() {
        let n = inputs.len() as f64;
        diag.iter_mut().for_each(|d| *d /= n);
    }
    TaskEmbedding { vec: diag, source: EmbeddingSource::DiagFim }
}
