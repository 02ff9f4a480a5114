//! Goodness-of-fit statistics.

use crate::error::{Error, Result};

/// Kolmogorov–Smirnov distance between the empirical CDF of `sorted` and a
/// continuous `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptySample);
    }
    let r = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / r - f).max(f - i as f64 / r);
    }
    Ok(d)
}

/// KS distance between integer-valued samples and the lattice law
/// `P(X <= k) = cdf((k + 1/2) / scale)`, the continuity-corrected
/// discretization of `cdf` at spacing `1/scale`.
pub fn ks_lattice<F: Fn(f64) -> f64>(sorted: &[i64], scale: f64, cdf: F) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptySample);
    }
    let g = |k: i64| cdf((k as f64 + 0.5) / scale);
    let r = sorted.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == v {
            j += 1;
        }
        let below = i as f64 / r;
        let at = j as f64 / r;
        d = d.max((at - g(v)).abs()).max((below - g(v - 1)).abs());
        i = j;
    }
    Ok(d)
}

/// Two-sample KS distance; ties across samples are handled exactly.
pub fn ks_two_sample<T: PartialOrd + Copy>(a: &[T], b: &[T]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let v = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// `1.95 sqrt((m + n) / (m n))`, the two-sample KS quantile at level
/// about `1e-3`.
pub fn two_sample_critical(m: usize, n: usize) -> f64 {
    1.95 * ((m + n) as f64 / (m as f64 * n as f64)).sqrt()
}

/// Half the L1 distance between two mass vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Mean and unbiased variance, summed in index order.
pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 {
        x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Sample Pearson correlation; 0 when either side is constant.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (mx, vx) = mean_var(x);
    let (my, vy) = mean_var(y);
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    let n = x.len() as f64;
    let cov = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / (n - 1.0);
    cov / (vx * vy).sqrt()
}

/// Median of a non-empty slice.
pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
