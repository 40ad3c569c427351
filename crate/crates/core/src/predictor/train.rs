use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::Momentum;
use super::PairJudge;
use super::{ArchEncoding, PredictorConfig, PredictorError, PredictorState, Result};
use crate::bench::Direction;
use crate::rng::{derive_seed, seeded};
use crate::trust::RelationClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Source pretraining epochs.
    pub epochs: usize,
    pub finetune_epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub m: usize,
    pub b_f: usize,
    pub b_v: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 100,
            finetune_epochs: 50,
            batch_size: 256,
            weight_decay: 1e-4,
            m: 50,
            b_f: 20,
            b_v: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PredictorError::InvalidConfig(msg));
        if self.m < 2 || self.b_f < 2 || self.b_v < 2 {
            return bad(format!("m={}, b_f={}, b_v={} must each be at least 2", self.m, self.b_f, self.b_v));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.momentum));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay {}", self.weight_decay));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        Ok(())
    }
}

/// Every ordered pair `(i, j)`, `i != j`, whose metrics differ, labelled
/// with the better side under `direction`. Ties are skipped.
pub fn labeled_pairs(metrics: &[f64], direction: Direction) -> Vec<(usize, usize, RelationClass)> {
    let n = metrics.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if direction.better(metrics[i], metrics[j]) {
                out.push((i, j, RelationClass::FirstBetter));
            } else if direction.better(metrics[j], metrics[i]) {
                out.push((i, j, RelationClass::SecondBetter));
            }
        }
    }
    out
}

/// Fraction of labelled ordered pairs whose argmax matches the label.
/// `p_a = p_b` counts as a "first is better" vote.
pub fn pair_accuracy(
    s: &PredictorState,
    archs: &[ArchEncoding],
    pairs: &[(usize, usize, RelationClass)],
    t: &[f64],
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(PredictorError::DegenerateLabels);
    }
    let scorer = super::PairScorer::new(s, archs, t)?;
    let hits = pairs.iter().filter(|&&(i, j, y)| argmax(scorer.p_first(i, j)) == y).count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// Fraction of unordered pairs on which the two query orders name the same
/// slot as the winner, i.e. contradict each other.
pub fn contradiction_rate(s: &PredictorState, archs: &[ArchEncoding], t: &[f64]) -> Result<f64> {
    let n = archs.len();
    if n < 2 {
        return Ok(0.0);
    }
    let scorer = super::PairScorer::new(s, archs, t)?;
    let mut bad = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if argmax(scorer.p_first(i, j)) == argmax(scorer.p_first(j, i)) {
                bad += 1;
            }
        }
    }
    Ok(bad as f64 / (n * (n - 1) / 2) as f64)
}

#[inline]
fn argmax(p_first: f64) -> RelationClass {
    if p_first >= 0.5 {
        RelationClass::FirstBetter
    } else {
        RelationClass::SecondBetter
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub pairs: usize,
    /// Mean training loss before any update, then after each epoch.
    pub epoch_losses: Vec<f64>,
}

fn split_archs(archs: &[(ArchEncoding, f64)]) -> (Vec<ArchEncoding>, Vec<f64>) {
    archs.iter().map(|(a, m)| (a.clone(), *m)).unzip()
}

/// One epoch of shuffled mini-batch SGD. Returns nothing; the caller
/// measures losses on the full pair set when it needs them.
fn run_epoch(
    s: &mut PredictorState,
    opt: &mut Momentum,
    archs: &[ArchEncoding],
    pairs: &mut [(usize, usize, RelationClass)],
    t: &[f64],
    cfg: &TrainConfig,
    rng: &mut crate::rng::StreamRng,
) {
    pairs.shuffle(rng);
    for batch in pairs.chunks(cfg.batch_size) {
        let (_, grads) = s.pair_loss_grad(archs, batch, t);
        opt.step(&mut s.params, &grads, cfg.learning_rate, cfg.momentum, cfg.weight_decay);
    }
}

/// Trains a fresh predictor on all labelled ordered pairs of `archs`.
pub fn train_source(
    archs: &[(ArchEncoding, f64)],
    direction: Direction,
    t: &[f64],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<PredictorState> {
    train_source_report(archs, direction, t, cfg, seed).map(|(s, _)| s)
}

pub fn train_source_report(
    archs: &[(ArchEncoding, f64)],
    direction: Direction,
    t: &[f64],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(PredictorState, TrainReport)> {
    cfg.validate()?;
    let first = archs.first().ok_or(PredictorError::DegenerateLabels)?;
    let pcfg = PredictorConfig::new(first.0.op_vocab_size, t.len());
    let mut s = PredictorState::new(pcfg, derive_seed(seed, "predictor-init"));
    let report = fit(&mut s, archs, direction, t, cfg.epochs, cfg, seed)?;
    Ok((s, report))
}

fn fit(
    s: &mut PredictorState,
    archs: &[(ArchEncoding, f64)],
    direction: Direction,
    t: &[f64],
    epochs: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainReport> {
    let (encs, metrics) = split_archs(archs);
    for a in &encs {
        s.check_arch(a)?;
    }
    s.check_task(t)?;
    let mut pairs = labeled_pairs(&metrics, direction);
    if pairs.is_empty() {
        return Err(PredictorError::DegenerateLabels);
    }
    let mut rng = seeded(derive_seed(seed, "train-shuffle"));
    let mut opt = Momentum::new(&s.config);
    let mut losses = vec![s.pair_loss(&encs, &pairs, t)];
    for _ in 0..epochs {
        run_epoch(s, &mut opt, &encs, &mut pairs, t, cfg, &mut rng);
        losses.push(s.pair_loss(&encs, &pairs, t));
    }
    Ok(TrainReport { pairs: pairs.len(), epoch_losses: losses })
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    pub state: PredictorState,
    pub val_acc: f64,
    /// Epoch of the returned snapshot; 0 is the input state.
    pub best_epoch: usize,
    /// Positions into the input list, after the seeded shuffle.
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub train_pairs: usize,
    pub val_pairs: usize,
}

/// Finetunes on the first `b_f` architectures of a seeded shuffle and keeps
/// the epoch snapshot with the best accuracy on the last `b_v` ones. Ties go
/// to the later epoch.
pub fn finetune_target(
    s: &PredictorState,
    target_archs: &[(ArchEncoding, f64)],
    direction: Direction,
    t_target: &[f64],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<FinetuneOutcome> {
    cfg.validate()?;
    if target_archs.len() != cfg.b_f + cfg.b_v {
        return Err(PredictorError::InvalidConfig(format!(
            "finetuning needs b_f + b_v = {} architectures, got {}",
            cfg.b_f + cfg.b_v,
            target_archs.len()
        )));
    }
    let mut order: Vec<usize> = (0..target_archs.len()).collect();
    order.shuffle(&mut seeded(derive_seed(seed, "finetune-split")));
    let train_idx = order[..cfg.b_f].to_vec();
    let val_idx = order[cfg.b_f..].to_vec();

    let pick = |idx: &[usize]| -> (Vec<ArchEncoding>, Vec<f64>) {
        idx.iter().map(|&i| (target_archs[i].0.clone(), target_archs[i].1)).unzip()
    };
    let (tr_encs, tr_metrics) = pick(&train_idx);
    let (va_encs, va_metrics) = pick(&val_idx);
    for a in tr_encs.iter().chain(&va_encs) {
        s.check_arch(a)?;
    }
    s.check_task(t_target)?;
    let mut tr_pairs = labeled_pairs(&tr_metrics, direction);
    let va_pairs = labeled_pairs(&va_metrics, direction);
    if tr_pairs.is_empty() || va_pairs.is_empty() {
        return Err(PredictorError::DegenerateLabels);
    }

    let mut cur = s.clone();
    let mut best = (pair_accuracy(&cur, &va_encs, &va_pairs, t_target)?, 0, cur.clone());
    let mut opt = Momentum::new(&cur.config);
    let mut rng = seeded(derive_seed(seed, "finetune-shuffle"));
    for epoch in 1..=cfg.finetune_epochs {
        run_epoch(&mut cur, &mut opt, &tr_encs, &mut tr_pairs, t_target, cfg, &mut rng);
        let acc = pair_accuracy(&cur, &va_encs, &va_pairs, t_target)?;
        if acc >= best.0 {
            best = (acc, epoch, cur.clone());
        }
    }
    Ok(FinetuneOutcome {
        state: best.2,
        val_acc: best.0,
        best_epoch: best.1,
        train_idx,
        val_idx,
        train_pairs: tr_pairs.len(),
        val_pairs: va_pairs.len(),
    })
}
