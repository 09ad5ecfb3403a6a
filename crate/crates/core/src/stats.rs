//! Small statistics toolkit for sweeps and spectrum comparisons.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::InvalidArgument("need 0 <= successes <= trials, trials > 0".into()));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // Pin the ends exactly; rounding would otherwise leave p outside.
    let lo = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let hi = if successes == trials { 1.0 } else { (center + half).clamp(p, 1.0) };
    Ok((lo, hi))
}

/// Sup distance between the empirical CDF of `sample` and `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let c = cdf(x);
        d = d.max((c - i as f64 / n).abs()).max(((i + 1) as f64 / n - c).abs());
    }
    Ok(d)
}

/// Asymptotic p-value of the one-sample Kolmogorov-Smirnov statistic.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = 2.0 * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Pool-adjacent-violators fit of a non-decreasing sequence.
pub fn isotonic_increasing(values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if values.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: values.len(),
            found: weights.len(),
        });
    }
    // blocks of (mean, weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (m2, w2, c2) = blocks[blocks.len() - 1];
            let (m1, w1, c1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let wt = w1 + w2;
            let mean = if wt > 0.0 { (m1 * w1 + m2 * w2) / wt } else { 0.5 * (m1 + m2) };
            *blocks.last_mut().unwrap() = (mean, wt, c1 + c2);
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (m, _, c) in blocks {
        out.extend(core::iter::repeat_n(m, c));
    }
    Ok(out)
}

/// First crossing of `level` by linear interpolation of a curve sampled at
/// increasing `x`.
pub fn crossing(x: &[f64], y: &[f64], level: f64) -> Option<f64> {
    for i in 0..x.len().min(y.len()).saturating_sub(1) {
        let (y0, y1) = (y[i], y[i + 1]);
        if y0 == level {
            return Some(x[i]);
        }
        if (y0 < level && y1 >= level) || (y0 > level && y1 <= level) {
            return Some(x[i] + (level - y0) / (y1 - y0) * (x[i + 1] - x[i]));
        }
    }
    None
}

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub intercept_stderr: f64,
    pub slope_stderr: f64,
    pub rms_residual: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    if n < 2 {
        return Err(Error::InvalidArgument("a line fit needs at least two points".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if !(sxx > 1e-300 * (1.0 + mx * mx)) {
        return Err(Error::Structural("degenerate design: all abscissae equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let dof = nf - 2.0;
    let sigma2 = if dof > 0.0 { sse / dof } else { 0.0 };
    Ok(LineFit {
        intercept,
        slope,
        r_squared,
        slope_stderr: (sigma2 / sxx).sqrt(),
        intercept_stderr: (sigma2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        rms_residual: (sse / nf).sqrt(),
    })
}

/// Sample mean and standard deviation (n - 1 denominator).
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, 0.0);
    }
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

/// Pearson correlation.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (mx, sx) = mean_std(x);
    let (my, sy) = mean_std(y);
    let n = x.len() as f64;
    let c: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0);
    c / (sx * sy)
}

/// Cumulative trapezoid integral of `y(x)`, starting at zero.
pub fn cumulative_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for i in 1..x.len() {
        out[i] = out[i - 1] + 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    }
    out
}

/// Piecewise-linear interpolation on increasing `x`, clamped at the ends.
pub fn interpolate(x: &[f64], y: &[f64], at: f64) -> f64 {
    if at <= x[0] {
        return y[0];
    }
    let last = x.len() - 1;
    if at >= x[last] {
        return y[last];
    }
    let k = x.partition_point(|&v| v <= at) - 1;
    let t = (at - x[k]) / (x[k + 1] - x[k]);
    y[k] + t * (y[k + 1] - y[k])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_values() {
        let (lo, hi) = wilson_interval(0, 20, Z95).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 0.16113).abs() < 1e-4);
        let (lo, hi) = wilson_interval(10, 20, Z95).unwrap();
        assert!((lo - 0.29930).abs() < 1e-4 && (hi - 0.70070).abs() < 1e-4);
    }

    #[test]
    fn isotonic_pools_violators() {
        let fit = isotonic_increasing(&[0.0, 0.5, 0.3, 1.0], &[1.0; 4]).unwrap();
        assert_eq!(fit, vec![0.0, 0.4, 0.4, 1.0]);
    }

    #[test]
    fn line_fit_exact() {
        let x = [1.0, 2.0, 3.0];
        let y = [3.0, 5.0, 7.0];
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn ks_uniform() {
        let s: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_distance(&s, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.005).abs() < 1e-12);
        assert!(ks_pvalue(d, 100) > 0.99);
        assert!(ks_pvalue(0.3, 100) < 1e-6);
    }

    #[test]
    fn crossing_interpolates() {
        let x = [1.0, 2.0, 3.0];
        let y = [0.0, 0.2, 0.8];
        assert!((crossing(&x, &y, 0.5).unwrap() - 2.5).abs() < 1e-14);
        assert!(crossing(&x, &y, 0.9).is_none());
    }
}
