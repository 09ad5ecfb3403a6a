//! One-dimensional quadrature rules against the standard Gaussian measure.
//!
//! Label expectations in this crate have integrands with features on the
//! scale `sqrt(a)` around the origin (the loss denominator `a + y^2`), which
//! plain Gauss-Hermite resolves poorly for small `a`. The default rule
//! therefore maps Gauss-Legendre nodes through `y = s * sinh(u)`, which
//! clusters nodes near zero at resolution `s` while still reaching the tails.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::tridiagonal_eigen;

/// Nodes and weights of a quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss-Legendre rule on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> Result<Rule> {
    if n == 0 {
        return Err(Error::InvalidArgument("Gauss-Legendre order must be positive".into()));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, refined by Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        let mut converged = false;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-15 * (1.0 + x.abs()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence {
                solver: "gauss_legendre",
                iterations: 100,
                residual: legendre_with_derivative(n, x).0.abs(),
            });
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d.is_finite() { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Ok(Rule { nodes, weights })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Hermite rule for the standard normal density (probabilists'
/// convention), built by Golub-Welsch. Weights sum to one.
pub fn gauss_hermite(n: usize) -> Result<Rule> {
    if n == 0 {
        return Err(Error::InvalidArgument("Gauss-Hermite order must be positive".into()));
    }
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
    let (values, first) = tridiagonal_eigen(&diag, &off, true)?;
    let first = first.expect("vectors requested");
    let mut pairs: Vec<(f64, f64)> = values
        .into_iter()
        .zip(first)
        .map(|(x, v)| (x, v * v))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Symmetrize to remove the O(eps) asymmetry of the eigensolver.
    let m = pairs.len();
    for i in 0..m / 2 {
        let x = 0.5 * (pairs[m - 1 - i].0 - pairs[i].0);
        let w = 0.5 * (pairs[m - 1 - i].1 + pairs[i].1);
        pairs[i] = (-x, w);
        pairs[m - 1 - i] = (x, w);
    }
    if m % 2 == 1 {
        pairs[m / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    Ok(Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1 / total).collect(),
    })
}

/// How a half-line Gaussian rule places its nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GaussianRuleKind {
    /// `y = s * sinh(u)` with Gauss-Legendre nodes in `u`; resolves features of
    /// width `s` around the origin.
    SinhMapped { scale: f64 },
    /// Plain Gauss-Hermite, folded onto the half line.
    Hermite,
}

/// A rule for `E[g(|Y|)]`, `Y ~ N(0, 1)`: nodes on `[0, cutoff]`, weights sum
/// to one (up to the truncated tail mass).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfGaussianSpec {
    pub nodes: usize,
    pub cutoff: f64,
    pub kind: GaussianRuleKind,
}

impl HalfGaussianSpec {
    /// Sinh-mapped rule with resolution `sqrt(a)` clamped to `[1e-3, 1]`.
    pub fn for_loss(a: f64, nodes: usize) -> Self {
        let scale = a.sqrt().clamp(1e-3, 1.0);
        HalfGaussianSpec {
            nodes,
            cutoff: 9.0,
            kind: GaussianRuleKind::SinhMapped { scale },
        }
    }

    pub fn build(&self) -> Result<Rule> {
        match self.kind {
            GaussianRuleKind::SinhMapped { scale } => {
                half_gaussian_sinh(self.nodes, scale, self.cutoff)
            }
            GaussianRuleKind::Hermite => {
                let full = gauss_hermite(2 * self.nodes)?;
                let mut nodes = Vec::with_capacity(self.nodes);
                let mut weights = Vec::with_capacity(self.nodes);
                for (x, w) in full.nodes.iter().zip(&full.weights) {
                    if *x > 0.0 {
                        nodes.push(*x);
                        weights.push(2.0 * w);
                    }
                }
                Ok(Rule { nodes, weights })
            }
        }
    }
}

fn half_gaussian_sinh(n: usize, scale: f64, cutoff: f64) -> Result<Rule> {
    if !(scale > 0.0 && cutoff > 0.0) {
        return Err(Error::InvalidArgument(
            "sinh-mapped rule needs positive scale and cutoff".into(),
        ));
    }
    let gl = gauss_legendre(n)?;
    let umax = (cutoff / scale).asinh();
    let norm = 1.0 / (2.0 * PI).sqrt();
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (x, w) in gl.nodes.iter().zip(&gl.weights) {
        let u = 0.5 * (x + 1.0) * umax;
        let y = scale * u.sinh();
        let jac = scale * u.cosh() * 0.5 * umax;
        nodes.push(y);
        weights.push(2.0 * w * jac * norm * (-0.5 * y * y).exp());
    }
    Ok(Rule { nodes, weights })
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(7).unwrap();
        // degree 12 is within 2n - 1 = 13
        let got = rule.integrate(|x| x.powi(12));
        assert!((got - 2.0 / 13.0).abs() < 1e-14);
        assert!((rule.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_moments() {
        let rule = gauss_hermite(20).unwrap();
        assert!((rule.integrate(|x| x * x) - 1.0).abs() < 1e-12);
        assert!((rule.integrate(|x| x.powi(4)) - 3.0).abs() < 1e-11);
        assert!(rule.integrate(|x| x.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn sinh_rule_gaussian_moments() {
        for scale in [1e-3, 0.1, 1.0] {
            let rule = HalfGaussianSpec {
                nodes: 120,
                cutoff: 9.0,
                kind: GaussianRuleKind::SinhMapped { scale },
            }
            .build()
            .unwrap();
            assert!((rule.integrate(|_| 1.0) - 1.0).abs() < 1e-12, "scale {scale}");
            assert!((rule.integrate(|y| y * y) - 1.0).abs() < 1e-12);
            assert!((rule.integrate(|y| y.powi(4)) - 3.0).abs() < 1e-11);
        }
    }

    #[test]
    fn sinh_rule_resolves_narrow_feature() {
        // E[1 / (a + Y^2)] has a peak of width sqrt(a); compare against a
        // fine composite midpoint sum.
        let a = 1e-4;
        let rule = HalfGaussianSpec::for_loss(a, 200).build().unwrap();
        let got = rule.integrate(|y| 1.0 / (a + y * y));
        let steps = 2_000_000;
        let h = 9.0 / steps as f64;
        let reference: f64 = (0..steps)
            .map(|k| {
                let y = (k as f64 + 0.5) * h;
                2.0 * normal_pdf(y) / (a + y * y) * h
            })
            .sum();
        assert!((got - reference).abs() / reference < 1e-6);
    }

    #[test]
    fn cdf_symmetry() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.3) + normal_cdf(-1.3) - 1.0).abs() < 1e-15);
    }
}
