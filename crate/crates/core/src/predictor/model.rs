use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ArchEncoding, PredictorError, Result};
use crate::rng::seeded;
use crate::trust::RelationClass;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub op_vocab: usize,
    pub task_dim: usize,
    pub hidden_dim: usize,
    pub emb_dim: usize,
    pub task_proj_dim: usize,
    pub head_dim: usize,
}

impl PredictorConfig {
    pub fn new(op_vocab: usize, task_dim: usize) -> Self {
        Self { op_vocab, task_dim, hidden_dim: 64, emb_dim: 32, task_proj_dim: 16, head_dim: 16 }
    }

    fn head_in(&self) -> usize {
        2 * self.emb_dim + self.task_proj_dim
    }
}

/// Row-major dense matrix; serialized as nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

impl TryFrom<Vec<Vec<f64>>> for Mat {
    type Error = String;
    fn try_from(v: Vec<Vec<f64>>) -> std::result::Result<Self, String> {
        let rows = v.len();
        let cols = v.first().map_or(0, Vec::len);
        if v.iter().any(|r| r.len() != cols) {
            return Err("ragged matrix".into());
        }
        Ok(Self { rows, cols, data: v.into_iter().flatten().collect() })
    }
}

impl From<Mat> for Vec<Vec<f64>> {
    fn from(m: Mat) -> Self {
        if m.cols == 0 {
            return vec![Vec::new(); m.rows];
        }
        m.data.chunks(m.cols).map(<[f64]>::to_vec).collect()
    }
}

/// All trainable tensors. Gradients and optimizer state reuse the layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub enc_w1: Mat,
    pub enc_b1: Vec<f64>,
    pub enc_w2: Mat,
    pub enc_b2: Vec<f64>,
    pub task_w: Mat,
    pub task_b: Vec<f64>,
    pub head_w1: Mat,
    pub head_b1: Vec<f64>,
    pub head_w2: Mat,
    pub head_b2: Vec<f64>,
}

pub const PARAM_GROUPS: [&str; 10] =
    ["enc_w1", "enc_b1", "enc_w2", "enc_b2", "task_w", "task_b", "head_w1", "head_b1", "head_w2", "head_b2"];

impl Params {
    pub fn zeros(cfg: &PredictorConfig) -> Self {
        Self {
            enc_w1: Mat::zeros(cfg.op_vocab, cfg.hidden_dim),
            enc_b1: vec![0.0; cfg.hidden_dim],
            enc_w2: Mat::zeros(cfg.hidden_dim, cfg.emb_dim),
            enc_b2: vec![0.0; cfg.emb_dim],
            task_w: Mat::zeros(cfg.task_dim, cfg.task_proj_dim),
            task_b: vec![0.0; cfg.task_proj_dim],
            head_w1: Mat::zeros(cfg.head_in(), cfg.head_dim),
            head_b1: vec![0.0; cfg.head_dim],
            head_w2: Mat::zeros(cfg.head_dim, 2),
            head_b2: vec![0.0; 2],
        }
    }

    /// He-normal weights, small positive biases on the ReLU layers so that
    /// no unit starts dead.
    pub fn init(cfg: &PredictorConfig, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let mut p = Self::zeros(cfg);
        let fill = |m: &mut Mat, rng: &mut crate::rng::StreamRng| {
            let sd = (2.0 / m.rows.max(1) as f64).sqrt();
            let normal = Normal::new(0.0, sd).expect("finite sd");
            m.data.iter_mut().for_each(|x| *x = normal.sample(rng));
        };
        fill(&mut p.enc_w1, &mut rng);
        fill(&mut p.enc_w2, &mut rng);
        fill(&mut p.task_w, &mut rng);
        fill(&mut p.head_w1, &mut rng);
        fill(&mut p.head_w2, &mut rng);
        for b in [&mut p.enc_b1, &mut p.enc_b2, &mut p.head_b1] {
            b.iter_mut().for_each(|x| *x = rng.random_range(0.0..0.1));
        }
        p
    }

    pub fn groups(&self) -> [(&'static str, &[f64]); 10] {
        [
            (PARAM_GROUPS[0], &self.enc_w1.data),
            (PARAM_GROUPS[1], &self.enc_b1),
            (PARAM_GROUPS[2], &self.enc_w2.data),
            (PARAM_GROUPS[3], &self.enc_b2),
            (PARAM_GROUPS[4], &self.task_w.data),
            (PARAM_GROUPS[5], &self.task_b),
            (PARAM_GROUPS[6], &self.head_w1.data),
            (PARAM_GROUPS[7], &self.head_b1),
            (PARAM_GROUPS[8], &self.head_w2.data),
            (PARAM_GROUPS[9], &self.head_b2),
        ]
    }

    pub fn groups_mut(&mut self) -> [&mut Vec<f64>; 10] {
        [
            &mut self.enc_w1.data,
            &mut self.enc_b1,
            &mut self.enc_w2.data,
            &mut self.enc_b2,
            &mut self.task_w.data,
            &mut self.task_b,
            &mut self.head_w1.data,
            &mut self.head_b1,
            &mut self.head_w2.data,
            &mut self.head_b2,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.groups().iter().all(|(_, g)| g.iter().all(|x| x.is_finite()))
    }

    fn scale(&mut self, s: f64) {
        for g in self.groups_mut() {
            g.iter_mut().for_each(|x| *x *= s);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorState {
    pub config: PredictorConfig,
    pub seed: u64,
    pub params: Params,
}

/// Intermediate values of one encoder pass, kept for backprop.
pub(crate) struct EncCache {
    a0: Vec<f64>,
    z1: Vec<f64>,
    m1: Vec<f64>,
    z2: Vec<f64>,
    pub emb: Vec<f64>,
}

/// Head pass for one ordered pair.
pub(crate) struct HeadOut {
    pub input: Vec<f64>,
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub p_first: f64,
}

#[inline]
fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Probability of class 0 from a logit difference, kept inside (0, 1).
#[inline]
pub(crate) fn prob_first(diff: f64) -> f64 {
    (1.0 / (1.0 + (-diff).exp())).clamp(f64::EPSILON, 1.0 - f64::EPSILON)
}

/// -log p_target for a two-class softmax with logit difference `l0 - l1`.
#[inline]
fn nll(diff: f64, target: RelationClass) -> f64 {
    let z = match target {
        RelationClass::FirstBetter => -diff,
        RelationClass::SecondBetter => diff,
    };
    // softplus(z)
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl PredictorState {
    pub fn new(config: PredictorConfig, seed: u64) -> Self {
        let params = Params::init(&config, seed);
        Self { config, seed, params }
    }

    pub fn check_arch(&self, a: &ArchEncoding) -> Result<()> {
        if a.op_vocab_size != self.config.op_vocab {
            return Err(PredictorError::ShapeMismatch(format!(
                "architecture vocabulary {} vs predictor vocabulary {}",
                a.op_vocab_size, self.config.op_vocab
            )));
        }
        Ok(())
    }

    pub fn check_task(&self, t: &[f64]) -> Result<()> {
        if t.len() != self.config.task_dim {
            return Err(PredictorError::ShapeMismatch(format!(
                "task embedding has {} entries, predictor expects {}",
                t.len(),
                self.config.task_dim
            )));
        }
        Ok(())
    }

    pub(crate) fn encode_cached(&self, a: &ArchEncoding) -> EncCache {
        let p = &self.params;
        let (v, h, e) = (self.config.op_vocab, self.config.hidden_dim, self.config.emb_dim);
        let n = a.node_count();
        let norm = a.topology.norm();

        let mut a0 = vec![0.0; n * v];
        for i in 0..n {
            for (j, &w) in norm[i].iter().enumerate() {
                if w != 0.0 {
                    a0[i * v + a.node_ops[j]] += w;
                }
            }
        }
        let mut z1 = vec![0.0; n * h];
        for i in 0..n {
            let zi = &mut z1[i * h..(i + 1) * h];
            zi.copy_from_slice(&p.enc_b1);
            for op in 0..v {
                let c = a0[i * v + op];
                if c != 0.0 {
                    for (z, w) in zi.iter_mut().zip(p.enc_w1.row(op)) {
                        *z += c * w;
                    }
                }
            }
        }
        let mut m1 = vec![0.0; n * h];
        for i in 0..n {
            for (j, &w) in norm[i].iter().enumerate() {
                if w != 0.0 {
                    for k in 0..h {
                        m1[i * h + k] += w * relu(z1[j * h + k]);
                    }
                }
            }
        }
        let mut z2 = vec![0.0; n * e];
        for i in 0..n {
            let zi = &mut z2[i * e..(i + 1) * e];
            zi.copy_from_slice(&p.enc_b2);
            for k in 0..h {
                let c = m1[i * h + k];
                if c != 0.0 {
                    for (z, w) in zi.iter_mut().zip(p.enc_w2.row(k)) {
                        *z += c * w;
                    }
                }
            }
        }
        let mut emb = vec![0.0; e];
        for i in 0..n {
            for (acc, z) in emb.iter_mut().zip(&z2[i * e..(i + 1) * e]) {
                *acc += relu(*z);
            }
        }
        emb.iter_mut().for_each(|x| *x /= n as f64);
        EncCache { a0, z1, m1, z2, emb }
    }

    /// Accumulates encoder gradients for `d_emb` into `grads`.
    pub(crate) fn encode_backward(&self, a: &ArchEncoding, cache: &EncCache, d_emb: &[f64], grads: &mut Params) {
        let p = &self.params;
        let (v, h, e) = (self.config.op_vocab, self.config.hidden_dim, self.config.emb_dim);
        let n = a.node_count();
        let norm = a.topology.norm();

        let mut dz2 = vec![0.0; n * e];
        for i in 0..n {
            for k in 0..e {
                if cache.z2[i * e + k] > 0.0 {
                    dz2[i * e + k] = d_emb[k] / n as f64;
                }
            }
        }
        let mut dm1 = vec![0.0; n * h];
        for i in 0..n {
            let dzi = &dz2[i * e..(i + 1) * e];
            for (k, &g) in dzi.iter().enumerate() {
                grads.enc_b2[k] += g;
            }
            for r in 0..h {
                let m = cache.m1[i * h + r];
                let gw = grads.enc_w2.row_mut(r);
                let w = p.enc_w2.row(r);
                let mut acc = 0.0;
                for k in 0..e {
                    gw[k] += m * dzi[k];
                    acc += dzi[k] * w[k];
                }
                dm1[i * h + r] = acc;
            }
        }
        let mut dz1 = vec![0.0; n * h];
        for i in 0..n {
            for (j, &w) in norm[i].iter().enumerate() {
                if w != 0.0 {
                    for k in 0..h {
                        dz1[j * h + k] += w * dm1[i * h + k];
                    }
                }
            }
        }
        for j in 0..n {
            for k in 0..h {
                if cache.z1[j * h + k] <= 0.0 {
                    dz1[j * h + k] = 0.0;
                }
            }
            let dzj = &dz1[j * h..(j + 1) * h];
            for (b, g) in grads.enc_b1.iter_mut().zip(dzj) {
                *b += g;
            }
            for op in 0..v {
                let c = cache.a0[j * v + op];
                if c != 0.0 {
                    for (gw, g) in grads.enc_w1.row_mut(op).iter_mut().zip(dzj) {
                        *gw += c * g;
                    }
                }
            }
        }
    }

    /// Architecture embedding after mean readout.
    pub fn encode_arch(&self, a: &ArchEncoding) -> Result<Vec<f64>> {
        self.check_arch(a)?;
        Ok(self.encode_cached(a).emb)
    }

    pub(crate) fn project_task(&self, t: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let mut out = p.task_b.clone();
        for (r, &x) in t.iter().enumerate() {
            if x != 0.0 {
                for (o, w) in out.iter_mut().zip(p.task_w.row(r)) {
                    *o += x * w;
                }
            }
        }
        out
    }

    pub(crate) fn head(&self, ea: &[f64], eb: &[f64], tp: &[f64]) -> HeadOut {
        let p = &self.params;
        let k = self.config.head_dim;
        let input: Vec<f64> = ea.iter().chain(eb).chain(tp).copied().collect();
        let mut pre = p.head_b1.clone();
        for (r, &x) in input.iter().enumerate() {
            if x != 0.0 {
                for (o, w) in pre.iter_mut().zip(p.head_w1.row(r)) {
                    *o += x * w;
                }
            }
        }
        let hidden: Vec<f64> = pre.iter().map(|&z| relu(z)).collect();
        let mut diff = p.head_b2[0] - p.head_b2[1];
        for c in 0..k {
            diff += hidden[c] * (p.head_w2.at(c, 0) - p.head_w2.at(c, 1));
        }
        HeadOut { input, pre, hidden, p_first: prob_first(diff) }
    }

    /// Softmax outputs `(p_a, p_b)` for the ordered query `(a, b)`.
    pub fn forward_pair(&self, a: &ArchEncoding, b: &ArchEncoding, t: &[f64]) -> Result<(f64, f64)> {
        self.check_arch(a)?;
        self.check_arch(b)?;
        self.check_task(t)?;
        let ea = self.encode_cached(a).emb;
        let eb = self.encode_cached(b).emb;
        let out = self.head(&ea, &eb, &self.project_task(t));
        Ok((out.p_first, 1.0 - out.p_first))
    }

    /// Penultimate-layer representation of the ordered pair `(a, b)`.
    pub fn pair_features(&self, a: &ArchEncoding, b: &ArchEncoding, t: &[f64]) -> Result<Vec<f64>> {
        self.check_arch(a)?;
        self.check_arch(b)?;
        self.check_task(t)?;
        let ea = self.encode_cached(a).emb;
        let eb = self.encode_cached(b).emb;
        Ok(self.head(&ea, &eb, &self.project_task(t)).hidden)
    }

    /// Mean pair loss over `pairs` (indices into `archs`) and, when `grads`
    /// is given, its gradient accumulated into it.
    pub(crate) fn batch_loss(
        &self,
        archs: &[ArchEncoding],
        pairs: &[(usize, usize, RelationClass)],
        t: &[f64],
        mut grads: Option<&mut Params>,
    ) -> f64 {
        if pairs.is_empty() {
            return 0.0;
        }
        let (e, k) = (self.config.emb_dim, self.config.head_dim);
        let p = &self.params;
        let mut caches: Vec<Option<EncCache>> = (0..archs.len()).map(|_| None).collect();
        for &(a, b, _) in pairs {
            for idx in [a, b] {
                if caches[idx].is_none() {
                    caches[idx] = Some(self.encode_cached(&archs[idx]));
                }
            }
        }
        let tp = self.project_task(t);
        let mut d_emb: Vec<Vec<f64>> = vec![Vec::new(); archs.len()];
        let mut d_tp = vec![0.0; tp.len()];
        let scale = 1.0 / pairs.len() as f64;
        let mut loss = 0.0;

        for &(a, b, target) in pairs {
            let ea = &caches[a].as_ref().unwrap().emb;
            let eb = &caches[b].as_ref().unwrap().emb;
            let out = self.head(ea, eb, &tp);
            let mut diff = p.head_b2[0] - p.head_b2[1];
            for c in 0..k {
                diff += out.hidden[c] * (p.head_w2.at(c, 0) - p.head_w2.at(c, 1));
            }
            loss += nll(diff, target);
            let Some(g) = grads.as_deref_mut() else { continue };

            // d loss / d logits = p - y
            let p0 = 1.0 / (1.0 + (-diff).exp());
            let y0 = if target == RelationClass::FirstBetter { 1.0 } else { 0.0 };
            let dl = [(p0 - y0) * scale, (y0 - p0) * scale];
            g.head_b2[0] += dl[0];
            g.head_b2[1] += dl[1];
            let mut dpre = vec![0.0; k];
            for c in 0..k {
                g.head_w2.data[c * 2] += out.hidden[c] * dl[0];
                g.head_w2.data[c * 2 + 1] += out.hidden[c] * dl[1];
                if out.pre[c] > 0.0 {
                    dpre[c] = p.head_w2.at(c, 0) * dl[0] + p.head_w2.at(c, 1) * dl[1];
                }
            }
            for (b1, d) in g.head_b1.iter_mut().zip(&dpre) {
                *b1 += d;
            }
            let mut din = vec![0.0; out.input.len()];
            for (r, &x) in out.input.iter().enumerate() {
                let w = p.head_w1.row(r);
                let gw = g.head_w1.row_mut(r);
                let mut acc = 0.0;
                for c in 0..k {
                    gw[c] += x * dpre[c];
                    acc += w[c] * dpre[c];
                }
                din[r] = acc;
            }
            for (slot, idx) in [(0, a), (1, b)] {
                let de = &mut d_emb[idx];
                if de.is_empty() {
                    de.resize(e, 0.0);
                }
                for (acc, d) in de.iter_mut().zip(&din[slot * e..(slot + 1) * e]) {
                    *acc += d;
                }
            }
            for (acc, d) in d_tp.iter_mut().zip(&din[2 * e..]) {
                *acc += d;
            }
        }

        if let Some(g) = grads {
            for (idx, de) in d_emb.iter().enumerate() {
                if !de.is_empty() {
                    self.encode_backward(&archs[idx], caches[idx].as_ref().unwrap(), de, g);
                }
            }
            for (b, d) in g.task_b.iter_mut().zip(&d_tp) {
                *b += d;
            }
            for (r, &x) in t.iter().enumerate() {
                for (gw, d) in g.task_w.row_mut(r).iter_mut().zip(&d_tp) {
                    *gw += x * d;
                }
            }
        }
        loss * scale
    }

    /// Mean binary cross-entropy over labelled ordered pairs.
    pub fn pair_loss(&self, archs: &[ArchEncoding], pairs: &[(usize, usize, RelationClass)], t: &[f64]) -> f64 {
        self.batch_loss(archs, pairs, t, None)
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn pair_loss_grad(
        &self,
        archs: &[ArchEncoding],
        pairs: &[(usize, usize, RelationClass)],
        t: &[f64],
    ) -> (f64, Params) {
        let mut g = Params::zeros(&self.config);
        let loss = self.batch_loss(archs, pairs, t, Some(&mut g));
        (loss, g)
    }
}

/// SGD with momentum and L2 weight decay.
pub(crate) struct Momentum {
    velocity: Params,
}

impl Momentum {
    pub fn new(cfg: &PredictorConfig) -> Self {
        Self { velocity: Params::zeros(cfg) }
    }

    pub fn step(&mut self, params: &mut Params, grads: &Params, lr: f64, momentum: f64, weight_decay: f64) {
        self.velocity.scale(momentum);
        let vel = self.velocity.groups_mut();
        let grads = grads.groups();
        for ((v, (_, g)), w) in vel.into_iter().zip(grads.iter()).zip(params.groups_mut()) {
            for ((vi, gi), wi) in v.iter_mut().zip(g.iter()).zip(w.iter_mut()) {
                *vi += gi + weight_decay * *wi;
                *wi -= lr * *vi;
            }
        }
    }
}
