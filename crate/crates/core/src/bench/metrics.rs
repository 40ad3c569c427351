use super::{BenchError, Result};

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(BenchError::DegenerateInput(format!("lengths {} and {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(BenchError::DegenerateInput("need at least two observations".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(BenchError::DegenerateInput("non-finite value".into()));
    }
    Ok(())
}

/// Σ t(t-1)/2 over runs of equal values in an already sorted sequence.
fn tied_pairs<T: PartialEq>(sorted: impl Iterator<Item = T>) -> u64 {
    let mut total = 0;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for v in sorted {
        if prev.as_ref() == Some(&v) {
            run += 1;
        } else {
            total += run * (run + 1) / 2;
            run = 0;
        }
        prev = Some(v);
    }
    total + run * (run + 1) / 2
}

/// Stable merge sort of `v` counting the swaps an insertion sort would do,
/// i.e. the number of strictly inverted pairs.
fn count_inversions(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = count_inversions(&mut v[..mid], buf) + count_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall τ-b with tie correction, O(n log n).
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    // -0.0 + 0.0 == +0.0, so bit patterns identify equal values below.
    let a: Vec<f64> = a.iter().map(|x| x + 0.0).collect();
    let b: Vec<f64> = b.iter().map(|x| x + 0.0).collect();
    let n = a.len() as u64;
    let mut idx: Vec<usize> = (0..a.len()).collect();
    idx.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));
    let n0 = n * (n - 1) / 2;
    let n1 = tied_pairs(idx.iter().map(|&i| a[i].to_bits()));
    let n3 = tied_pairs(idx.iter().map(|&i| (a[i].to_bits(), b[i].to_bits())));
    let mut ys: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let mut buf = Vec::with_capacity(ys.len());
    let swaps = count_inversions(&mut ys, &mut buf);
    let n2 = tied_pairs(ys.iter().map(|v| v.to_bits()));
    let (da, db) = (n0 - n1, n0 - n2);
    if da == 0 || db == 0 {
        return Err(BenchError::DegenerateInput("constant ranking".into()));
    }
    let s = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    Ok(s / ((da as f64) * (db as f64)).sqrt())
}

/// Pearson linear correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(BenchError::DegenerateInput("zero variance".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Average ranks (1-based), ties sharing the mean of their positions.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    pearson(&average_ranks(a), &average_ranks(b))
}
