use super::{MwasError, Result};
use crate::graph::{scc, DirectedGraph};

/// Spectral radius of a square non-negative matrix.
///
/// The support is first tested for nilpotency by pushing a positive vector
/// through `A` `n` times: with non-negative entries no cancellation can
/// occur, so the iterate vanishes exactly when `A^n = 0`, and the radius is
/// then 0. Otherwise the radius is the largest one over the irreducible
/// diagonal blocks (strongly connected components of the support). On each
/// block power iteration runs on `B + I`, which is primitive, so its
/// Collatz-Wielandt bracket closes geometrically; the dominant eigenvalue
/// is `ρ(B) + 1`.
pub fn spectral_radius(a: &[Vec<f64>], tol: f64, max_iter: usize) -> Result<f64> {
    let n = a.len();
    if !(tol > 0.0) || max_iter == 0 {
        return Err(MwasError::InvalidParams(format!(
            "tol must be positive and max_iter non-zero (tol={tol}, max_iter={max_iter})"
        )));
    }
    let mut entries = Vec::new();
    for (i, row) in a.iter().enumerate() {
        if row.len() != n {
            return Err(MwasError::InvalidMatrix(format!("row {i} has {} columns, expected {n}", row.len())));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(MwasError::InvalidMatrix(format!("entry ({i},{j}) = {v}")));
            }
            if v > 0.0 {
                entries.push((i, j, v));
            }
        }
    }
    if entries.is_empty() || nilpotent(n, &entries) {
        return Ok(0.0);
    }

    let support =
        DirectedGraph::from_edges(n, &entries.iter().filter(|e| e.0 != e.1).map(|e| (e.0, e.1)).collect::<Vec<_>>())
            .map_err(|e| MwasError::InvalidMatrix(e.to_string()))?;
    let mut block_of = vec![usize::MAX; n];
    let comps = scc(&support);
    for (c, comp) in comps.iter().enumerate() {
        for &v in comp {
            block_of[v] = c;
        }
    }
    let mut radius: f64 = 0.0;
    for (c, comp) in comps.iter().enumerate() {
        // Local indices; only entries inside the block matter.
        let mut local = vec![usize::MAX; n];
        for (k, &v) in comp.iter().enumerate() {
            local[v] = k;
        }
        let block: Vec<(usize, usize, f64)> = entries
            .iter()
            .filter(|e| block_of[e.0] == c && block_of[e.1] == c)
            .map(|&(i, j, v)| (local[i], local[j], v))
            .collect();
        if !block.is_empty() {
            radius = radius.max(irreducible_radius(comp.len(), &block, tol, max_iter)?);
        }
    }
    Ok(radius)
}

/// `A^n x = 0` for a positive `x`.
fn nilpotent(n: usize, entries: &[(usize, usize, f64)]) -> bool {
    let mut x = vec![1.0; n];
    let mut y = vec![0.0; n];
    for _ in 0..n {
        mul(entries, &x, &mut y);
        let top = y.iter().cloned().fold(0.0, f64::max);
        if top == 0.0 {
            return true;
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / top;
        }
    }
    false
}

fn mul(entries: &[(usize, usize, f64)], x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    for &(i, j, v) in entries {
        y[i] += v * x[j];
    }
}

/// Power iteration on `B + I` for an irreducible `B`. The iterate stays
/// positive, so `[lo, hi]` always brackets the dominant eigenvalue.
fn irreducible_radius(n: usize, entries: &[(usize, usize, f64)], tol: f64, max_iter: usize) -> Result<f64> {
    let mut x = vec![1.0; n];
    let mut y = vec![0.0; n];
    let mut estimate = f64::NAN;
    for _ in 0..max_iter {
        mul(entries, &x, &mut y);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi += xi;
            let ratio = *yi / xi;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        estimate = 0.5 * (hi + lo);
        if hi - lo <= tol {
            return Ok((estimate - 1.0).max(0.0));
        }
        let norm = y.iter().cloned().fold(0.0, f64::max);
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
    }
    Err(MwasError::NonConvergence { iterations: max_iter, estimate: (estimate - 1.0).max(0.0) })
}
