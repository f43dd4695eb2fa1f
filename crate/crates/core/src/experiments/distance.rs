use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::Stream;

fn sorted(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if sample.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("sample contains NaN".into()));
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Wasserstein-2 distance between two empirical measures on the line.
///
/// Computed exactly as the L² distance between the two (piecewise-constant)
/// quantile functions; for equal sizes this is the sorted coupling.
pub fn wasserstein2_1d(sample_a: &[f64], sample_b: &[f64]) -> Result<f64> {
    let a = sorted(sample_a)?;
    let b = sorted(sample_b)?;
    let (na, nb) = (a.len(), b.len());
    if na == nb {
        let s: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        return Ok((s / na as f64).sqrt());
    }
    // walk the merged breakpoints i/na and j/nb in exact integer arithmetic
    let (na64, nb64) = (na as u128, nb as u128);
    let total = na64 * nb64;
    let (mut i, mut j) = (0usize, 0usize);
    let mut pos: u128 = 0;
    let mut acc = 0.0;
    while i < na && j < nb {
        let next_a = (i as u128 + 1) * nb64;
        let next_b = (j as u128 + 1) * na64;
        let next = next_a.min(next_b);
        let d = a[i] - b[j];
        acc += d * d * (next - pos) as f64;
        pos = next;
        if next_a == next {
            i += 1;
        }
        if next_b == next {
            j += 1;
        }
    }
    Ok((acc / total as f64).sqrt())
}

/// Kolmogorov–Smirnov distance `sup_x |F_a(x) − F_b(x)|`.
pub fn ks_distance(sample_a: &[f64], sample_b: &[f64]) -> Result<f64> {
    let a = sorted(sample_a)?;
    let b = sorted(sample_b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best = 0.0f64;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(best)
}

/// Linear-interpolation quantile of sorted data at level `p ∈ [0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Levels `k/(K+1)`, `k = 1..=K`, and the matching quantiles of `sample`.
pub fn quantiles(sample: &[f64], k: usize) -> Result<Vec<(f64, f64)>> {
    let s = sorted(sample)?;
    Ok((1..=k)
        .map(|i| {
            let p = i as f64 / (k + 1) as f64;
            (p, quantile_sorted(&s, p))
        })
        .collect())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance (0 for a single value).
pub fn variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

fn resample_mean(values: &[f64], rng: &mut Stream) -> f64 {
    let n = values.len();
    (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64
}

/// Bootstrap standard error of the mean.
pub fn bootstrap_se(values: &[f64], resamples: usize, rng: &mut Stream) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let means: Vec<f64> = (0..resamples).map(|_| resample_mean(values, rng)).collect();
    Ok(variance(&means).sqrt())
}

/// Percentile bootstrap interval for `mean(num) / mean(den)`, resampling
/// the two groups independently.
pub fn bootstrap_ratio_ci(num: &[f64], den: &[f64], resamples: usize, level: f64, rng: &mut Stream) -> Result<(f64, f64)> {
    if num.is_empty() || den.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut ratios: Vec<f64> = (0..resamples).map(|_| resample_mean(num, rng) / resample_mean(den, rng)).collect();
    ratios.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&ratios, tail), quantile_sorted(&ratios, 1.0 - tail)))
}
