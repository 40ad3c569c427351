//! Backpropagation against central finite differences on every parameter group.

use std::sync::Arc;

use archgraph::predictor::{ArchEncoding, Params, PredictorConfig, PredictorState, Topology, PARAM_GROUPS};
use archgraph::rng::seeded;
use archgraph::trust::RelationClass;
use rand::Rng;

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
/// Rounding error of one loss evaluation, in units of `EPSILON * |loss|`.
const ROUNDING_ULPS: f64 = 16.0;

fn fixture(seed: u64) -> (PredictorState, Vec<ArchEncoding>, Vec<(usize, usize, RelationClass)>, Vec<f64>) {
    let mut rng = seeded(seed);
    let topo = Arc::new(Topology::ladder(5).unwrap());
    let archs: Vec<ArchEncoding> = (0..6)
        .map(|_| ArchEncoding::new((0..5).map(|_| rng.random_range(0..4)).collect(), topo.clone(), 4).unwrap())
        .collect();
    let mut pairs = Vec::new();
    for i in 0..6 {
        for j in 0..6 {
            if i != j {
                let y = if rng.random_bool(0.5) { RelationClass::FirstBetter } else { RelationClass::SecondBetter };
                pairs.push((i, j, y));
            }
        }
    }
    let t: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let state = PredictorState::new(PredictorConfig::new(4, 3), seed);
    (state, archs, pairs, t)
}

fn group_mut(p: &mut Params, g: usize) -> &mut Vec<f64> {
    p.groups_mut().into_iter().nth(g).unwrap()
}

fn central_difference(state: &PredictorState, g: usize, k: usize, loss: impl Fn(&PredictorState) -> f64) -> f64 {
    let at = |offset: f64| {
        let mut s = state.clone();
        group_mut(&mut s.params, g)[k] += offset;
        loss(&s)
    };
    (at(STEP) - at(-STEP)) / (2.0 * STEP)
}

/// Largest relative error between analytic and numeric gradients, per group.
///
/// The central difference carries an absolute error of about
/// `ulps * EPSILON * |loss| / STEP` (rounding) plus `STEP^2` (truncation at
/// unit third derivative). Entries too small to resolve that noise at
/// `REL_TOL` are measured against the floor `noise / REL_TOL`, so for them
/// the check reads `|analytic - numeric| <= noise`.
pub fn check(seed: u64) -> Vec<(&'static str, f64)> {
    let (state, archs, pairs, t) = fixture(seed);
    let (loss, grads) = state.pair_loss_grad(&archs, &pairs, &t);
    let noise = ROUNDING_ULPS * f64::EPSILON * loss.abs() / STEP + STEP * STEP;
    let floor = noise / REL_TOL;
    let mut out = Vec::new();
    for (g, name) in PARAM_GROUPS.iter().enumerate() {
        let analytic = grads.groups()[g].1.to_vec();
        let mut worst: f64 = 0.0;
        for k in 0..analytic.len() {
            let numeric = central_difference(&state, g, k, |s| s.pair_loss(&archs, &pairs, &t));
            let a = analytic[k];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(err);
        }
        out.push((*name, worst));
    }
    out
}
