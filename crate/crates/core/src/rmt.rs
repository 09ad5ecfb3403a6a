//! Large-N spectral predictions for the weighted ensemble
//! `W = sum_i f_i x_i x_i^T` with `f_i = f(y_i, yhat_i)`.
//!
//! With `S(z) = E[1 / (z - lambda)]` (so `Im S < 0` above the real axis and
//! `rho = -Im S / pi`), the bulk satisfies
//!
//! ```text
//! 1/S = z - alpha E[f / (1 - f S)],
//! ```
//!
//! i.e. `z(S) = 1/S + alpha E[f / (1 - f S)]`. Below the support `S` is real
//! and negative, `z(S)` is decreasing, and the left edge is the stationary
//! point of `z` closest to zero. The signal direction produces an outlier at
//! `z = Sigma(z)` with `Sigma = alpha E[f y^2 / (1 - f S)]`, and its
//! eigenvector has squared cosine `1 / (1 - dSigma/dz)` with the signal.
//!
//! All quantities here are in ensemble units; the Hessian of the loss is
//! `W / 2 - mu I`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::LossSpec;
use crate::quadrature::HalfGaussianSpec;

/// One weighted point of a joint label distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelAtom {
    pub y: f64,
    pub yhat: f64,
    pub weight: f64,
}

/// Minimum number of sample pairs for an empirical threshold estimate.
pub const MIN_EMPIRICAL_PAIRS: usize = 10_000;

/// Joint distribution `p(y, yhat)` of true and predicted labels.
#[derive(Debug, Clone, PartialEq)]
pub enum JointLabelDensity {
    /// Independent standard Gaussians (a random state), by tensorized
    /// half-line quadrature on `|y|`, `|yhat|`.
    AnalyticInit { rule: HalfGaussianSpec },
    /// Plain average over observed pairs.
    Empirical { pairs: Vec<(f64, f64)> },
    /// Weighted atoms computed from a one-step replica-symmetry-breaking
    /// solution with parameters `(chi, z, q0)`.
    Replica1Rsb {
        atoms: Vec<LabelAtom>,
        chi: f64,
        z: f64,
        q0: f64,
    },
}

impl JointLabelDensity {
    /// Random-state density with node placement tuned for loss parameter `a`.
    pub fn analytic_init(a: f64) -> Self {
        JointLabelDensity::AnalyticInit {
            rule: HalfGaussianSpec::for_loss(a, 200),
        }
    }

    pub fn atoms(&self) -> Result<Vec<LabelAtom>> {
        match self {
            JointLabelDensity::AnalyticInit { rule } => {
                let r = rule.build()?;
                let mut out = Vec::with_capacity(r.len() * r.len());
                for (&y, &wy) in r.nodes.iter().zip(&r.weights) {
                    for (&yh, &wh) in r.nodes.iter().zip(&r.weights) {
                        out.push(LabelAtom {
                            y,
                            yhat: yh,
                            weight: wy * wh,
                        });
                    }
                }
                Ok(out)
            }
            JointLabelDensity::Empirical { pairs } => {
                if pairs.is_empty() {
                    return Err(Error::InvalidArgument("empirical density without samples".into()));
                }
                let w = 1.0 / pairs.len() as f64;
                Ok(pairs
                    .iter()
                    .map(|&(y, yhat)| LabelAtom { y, yhat, weight: w })
                    .collect())
            }
            JointLabelDensity::Replica1Rsb { atoms, .. } => Ok(atoms.clone()),
        }
    }

    /// `E[g(y, yhat)]`.
    pub fn expectation<G: FnMut(f64, f64) -> f64>(&self, mut g: G) -> Result<f64> {
        Ok(self.atoms()?.iter().map(|a| a.weight * g(a.y, a.yhat)).sum())
    }

    pub fn sample_count(&self) -> Option<usize> {
        match self {
            JointLabelDensity::Empirical { pairs } => Some(pairs.len()),
            _ => None,
        }
    }
}

/// The weight function `f(y, yhat)` of the ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// Second derivative of the loss in `yhat`.
    Curvature(LossSpec),
    /// `f = c` for every sample (a plain Wishart matrix when `c = 1`).
    Constant(f64),
}

/// Distribution of `(f, y^2)` that all spectral equations consume.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    f: Vec<f64>,
    y2: Vec<f64>,
    w: Vec<f64>,
    f_min: f64,
    f_max: f64,
}

impl SpectralMeasure {
    pub fn new(density: &JointLabelDensity, kernel: Kernel) -> Result<Self> {
        let atoms = density.atoms()?;
        match kernel {
            Kernel::Constant(c) => {
                // Every formula is linear in y^2 at fixed f: one atom is exact.
                let total: f64 = atoms.iter().map(|a| a.weight).sum();
                let y2: f64 = atoms.iter().map(|a| a.weight * a.y * a.y).sum::<f64>() / total;
                Self::from_parts(vec![c], vec![y2], vec![1.0])
            }
            Kernel::Curvature(spec) => {
                let mut f = Vec::with_capacity(atoms.len());
                let mut y2 = Vec::with_capacity(atoms.len());
                let mut w = Vec::with_capacity(atoms.len());
                for a in atoms {
                    if a.weight <= 0.0 {
                        continue;
                    }
                    f.push(spec.curvature(a.y, a.yhat)?);
                    y2.push(a.y * a.y);
                    w.push(a.weight);
                }
                Self::from_parts(f, y2, w)
            }
        }
    }

    /// Builds from explicit `(f, y^2, weight)` triples; weights are normalized.
    pub fn from_parts(f: Vec<f64>, y2: Vec<f64>, mut w: Vec<f64>) -> Result<Self> {
        if f.is_empty() || f.len() != y2.len() || f.len() != w.len() {
            return Err(Error::InvalidArgument("measure needs equally many f, y^2, weights".into()));
        }
        let total: f64 = w.iter().sum();
        if !(total > 0.0) || w.iter().any(|v| *v < 0.0 || !v.is_finite()) || f.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("measure weights must be nonnegative with positive sum".into()));
        }
        w.iter_mut().for_each(|v| *v /= total);
        let f_min = f.iter().copied().fold(f64::INFINITY, f64::min);
        let f_max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(SpectralMeasure { f, y2, w, f_min, f_max })
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn f_range(&self) -> (f64, f64) {
        (self.f_min, self.f_max)
    }

    /// `E[g(f, y^2)]`.
    pub fn mean<G: Fn(f64, f64) -> f64>(&self, g: G) -> f64 {
        let mut s = 0.0;
        for i in 0..self.f.len() {
            s += self.w[i] * g(self.f[i], self.y2[i]);
        }
        s
    }

    /// Real branch: returns `(z(S), dz/dS, Sigma(S), dSigma/dS)`.
    pub fn real_terms(&self, alpha: f64, s: f64) -> RealTerms {
        let (mut e1, mut e2, mut e3, mut e4) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..self.f.len() {
            let f = self.f[i];
            let r = 1.0 / (1.0 - f * s);
            let wf = self.w[i] * f * r;
            e1 += wf;
            e2 += wf * f * r;
            e3 += wf * self.y2[i];
            e4 += wf * f * r * self.y2[i];
        }
        RealTerms {
            z: 1.0 / s + alpha * e1,
            dz: -1.0 / (s * s) + alpha * e2,
            sigma: alpha * e3,
            dsigma: alpha * e4,
        }
    }

    /// `(E[f / (1 - fS)], E[f^2 / (1 - fS)^2])` for complex `S`.
    fn complex_terms(&self, s: Complex64) -> (Complex64, Complex64) {
        let mut e1 = Complex64::new(0.0, 0.0);
        let mut e2 = Complex64::new(0.0, 0.0);
        for i in 0..self.f.len() {
            let f = self.f[i];
            let r = (Complex64::new(1.0, 0.0) - s * f).inv();
            let t = r * (self.w[i] * f);
            e1 += t;
            e2 += t * r * f;
        }
        (e1, e2)
    }

    /// Lower end of the admissible real `S` interval: `1/f_min` when some
    /// weight is negative, else unbounded.
    fn s_pole_left(&self) -> Option<f64> {
        if self.f_min < 0.0 {
            Some(1.0 / self.f_min)
        } else {
            None
        }
    }

    fn s_pole_right(&self) -> Option<f64> {
        if self.f_max > 0.0 {
            Some(1.0 / self.f_max)
        } else {
            None
        }
    }

    /// Typical magnitude of the spectrum, for tolerances and homotopy starts.
    pub fn scale(&self, alpha: f64) -> f64 {
        let m2 = self.mean(|f, _| f * f);
        (alpha * m2).sqrt().max(alpha * self.mean(|f, _| f).abs()).max(1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealTerms {
    pub z: f64,
    pub dz: f64,
    pub sigma: f64,
    pub dsigma: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

/// Options for the complex Stieltjes solve.
#[derive(Debug, Clone, Copy)]
pub struct StieltjesOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for StieltjesOptions {
    fn default() -> Self {
        StieltjesOptions {
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

/// Newton on `F(S) = 1/S - z + alpha E[f/(1-fS)]` with step limiting and a
/// damped fixed-point fallback.
fn newton_complex(
    measure: &SpectralMeasure,
    alpha: f64,
    z: Complex64,
    mut s: Complex64,
    opts: StieltjesOptions,
) -> core::result::Result<Complex64, f64> {
    let one = Complex64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let (e1, e2) = measure.complex_terms(s);
        let res = (one - s * (z - e1 * alpha)).norm();
        last = res;
        if res <= opts.tol && (z.im <= 0.0 || s.im <= 0.0) {
            return Ok(s);
        }
        let fval = s.inv() - z + e1 * alpha;
        let fder = -(s * s).inv() + e2 * alpha;
        let mut step = fval / fder;
        let cap = 0.5 * s.norm();
        if !step.re.is_finite() || !step.im.is_finite() {
            // fixed-point fallback
            let next = (z - e1 * alpha).inv();
            step = s - next;
        } else if step.norm() > cap {
            step = step * (cap / step.norm());
        }
        let mut next = s - step;
        if z.im > 0.0 && next.im > 0.0 {
            // stay on the physical sheet
            next = Complex64::new(next.re, -0.5 * next.im.abs().min(s.im.abs()));
        }
        s = next;
    }
    Err(last)
}

/// Stieltjes transform at `z` for a prepared measure, optionally seeded.
pub fn stieltjes_measure(
    measure: &SpectralMeasure,
    alpha: f64,
    z: Complex64,
    seed: Option<Complex64>,
    opts: StieltjesOptions,
) -> Result<Complex64> {
    check_alpha(alpha)?;
    if z.im < 0.0 {
        return Err(Error::InvalidArgument("Im z must be nonnegative".into()));
    }
    if z.im == 0.0 {
        return real_stieltjes(measure, alpha, z.re).map(|s| Complex64::new(s, 0.0));
    }
    if let Some(s0) = seed {
        if let Ok(s) = newton_complex(measure, alpha, z, s0, opts) {
            return Ok(s);
        }
    }
    // Homotopy in Im z from far above the axis.
    let top = measure.scale(alpha).max(z.norm()).max(z.im);
    let mut y = top;
    let mut s = Complex64::new(z.re, y).inv();
    let mut last_res = f64::INFINITY;
    loop {
        let zz = Complex64::new(z.re, y);
        match newton_complex(measure, alpha, zz, s, opts) {
            Ok(v) => s = v,
            Err(r) => {
                last_res = last_res.min(r);
                // try again from the free resolvent at this height
                match newton_complex(measure, alpha, zz, zz.inv(), opts) {
                    Ok(v) => s = v,
                    Err(r2) => {
                        return Err(Error::Convergence {
                            solver: "stieltjes",
                            iterations: opts.max_iter,
                            residual: r2.min(last_res),
                        })
                    }
                }
            }
        }
        if y <= z.im {
            return Ok(s);
        }
        y = (y * 0.25).max(z.im);
    }
}

/// Stieltjes transform at `z` for a label density and kernel.
pub fn stieltjes_at(density: &JointLabelDensity, kernel: Kernel, alpha: f64, z: Complex64) -> Result<Complex64> {
    let m = SpectralMeasure::new(density, kernel)?;
    stieltjes_measure(&m, alpha, z, None, StieltjesOptions::default())
}

/// Left end of the bulk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeftEdge {
    pub s_minus: f64,
    pub lambda_minus: f64,
    /// No interior stationary point: the edge is the limit at the boundary of
    /// the admissible `S` range.
    pub hard: bool,
}

/// Points `limit * u` with `u` running from `1e-12` to just short of one:
/// geometric up to one half, then halving the remaining distance.
fn scan_points(limit: f64) -> impl Iterator<Item = f64> {
    let geometric = (0..).map(|k| 1e-12 * 1.25f64.powi(k)).take_while(|u| *u < 0.5);
    let pole = (1..=50).map(|k| 1.0 - 0.5f64.powi(k));
    geometric.chain(pole).map(move |u| limit * u)
}

/// Finds the stationary point of `z(S)` closest to zero on the negative axis.
pub fn left_edge_measure(measure: &SpectralMeasure, alpha: f64) -> Result<LeftEdge> {
    check_alpha(alpha)?;
    let g = |s: f64| measure.real_terms(alpha, s).dz;
    let pole = measure.s_pole_left();
    let limit = pole.unwrap_or(-1e12 / measure.scale(alpha));
    // dz/dS -> -inf as S -> 0-; find where it first turns nonnegative.
    let mut neg = None;
    let mut found = None;
    for s in scan_points(limit) {
        if g(s) >= 0.0 {
            found = Some(s);
            break;
        }
        neg = Some(s);
    }
    match (found, neg) {
        (Some(pos), Some(neg)) => {
            let s = bisect_root(g, pos, neg, 1e-15)?;
            Ok(LeftEdge {
                s_minus: s,
                lambda_minus: measure.real_terms(alpha, s).z,
                hard: false,
            })
        }
        (Some(_), None) => Err(Error::Structural("left edge closer to zero than 1e-12 |1/f_min|".into())),
        (None, _) => {
            // z(S) keeps increasing up to the boundary of the real branch.
            let (s_edge, lam) = match pole {
                Some(p) => {
                    let s = p * (1.0 - 1e-15);
                    (s, measure.real_terms(alpha, s).z)
                }
                None => (limit, 0.0),
            };
            Ok(LeftEdge {
                s_minus: s_edge,
                lambda_minus: lam,
                hard: true,
            })
        }
    }
}

/// Right end of the bulk: stationary point of `z(S)` on `(0, 1/f_max)`.
pub fn right_edge_measure(measure: &SpectralMeasure, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let g = |s: f64| measure.real_terms(alpha, s).dz;
    let Some(limit) = measure.s_pole_right() else {
        return Ok(0.0);
    };
    let mut neg = None;
    for s in scan_points(limit) {
        if g(s) >= 0.0 {
            let Some(n) = neg else {
                return Err(Error::Structural("right edge too close to zero".into()));
            };
            let s = bisect_root(g, s, n, 1e-15)?;
            return Ok(measure.real_terms(alpha, s).z);
        }
        neg = Some(s);
    }
    Err(Error::Structural("no right edge found".into()))
}

/// Bisection for a root of `g` with `g(a) >= 0 > g(b)` (either order).
fn bisect_root<G: Fn(f64) -> f64>(g: G, pos: f64, neg: f64, rtol: f64) -> Result<f64> {
    let (mut p, mut n) = (pos, neg);
    if !(g(p) >= 0.0 && g(n) < 0.0) {
        return Err(Error::Bracketing("sign change lost"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (p + n);
        if mid == p || mid == n || (p - n).abs() <= rtol * mid.abs() {
            return Ok(mid);
        }
        if g(mid) >= 0.0 {
            p = mid;
        } else {
            n = mid;
        }
    }
    Ok(0.5 * (p + n))
}

/// Real `S` with `z(S) = lambda` for `lambda` below the left edge.
pub fn real_stieltjes(measure: &SpectralMeasure, alpha: f64, lambda: f64) -> Result<f64> {
    let edge = left_edge_measure(measure, alpha)?;
    real_stieltjes_with_edge(measure, alpha, lambda, &edge)
}

fn real_stieltjes_with_edge(measure: &SpectralMeasure, alpha: f64, lambda: f64, edge: &LeftEdge) -> Result<f64> {
    if lambda >= edge.lambda_minus {
        return Err(Error::InvalidArgument(alloc::format!(
            "real evaluation at {lambda} is not below the left edge {}",
            edge.lambda_minus
        )));
    }
    // z(S) decreases from lambda_minus at S_minus to -inf at 0-.
    let h = |s: f64| measure.real_terms(alpha, s).z - lambda;
    let lo = edge.s_minus;
    let mut hi = lo * 0.5;
    while h(hi) > 0.0 {
        hi *= 0.5;
        if hi.abs() < 1e-300 {
            return Err(Error::Bracketing("real Stieltjes branch"));
        }
    }
    // h(lo) > 0 >= h(hi)
    let mut a = lo;
    let mut b = hi;
    let mut s = 0.5 * (a + b);
    for _ in 0..200 {
        let t = measure.real_terms(alpha, s);
        let val = t.z - lambda;
        if val > 0.0 {
            a = s;
        } else {
            b = s;
        }
        let newton = s - val / t.dz;
        let next = if newton > a.min(b) && newton < a.max(b) { newton } else { 0.5 * (a + b) };
        if (next - s).abs() <= 1e-15 * s.abs() {
            return Ok(next);
        }
        s = next;
    }
    Ok(s)
}

/// Density of the bulk on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BulkSolution {
    pub alpha: f64,
    pub grid: Vec<f64>,
    pub stieltjes: Vec<Complex64>,
    /// `(lambda, rho(lambda))`.
    pub density: Vec<(f64, f64)>,
    pub left_edge_lambda: f64,
    pub left_edge_stieltjes: f64,
}

impl BulkSolution {
    /// Trapezoid integral of the density over the grid.
    pub fn mass(&self) -> f64 {
        self.density
            .windows(2)
            .map(|p| 0.5 * (p[0].1 + p[1].1) * (p[1].0 - p[0].0))
            .sum()
    }

    /// Cumulative distribution on the grid, normalized to end at one.
    pub fn cdf(&self) -> (Vec<f64>, Vec<f64>) {
        let x: Vec<f64> = self.density.iter().map(|p| p.0).collect();
        let y: Vec<f64> = self.density.iter().map(|p| p.1).collect();
        let mut c = crate::stats::cumulative_trapezoid(&x, &y);
        let total = *c.last().unwrap_or(&1.0);
        if total > 0.0 {
            c.iter_mut().for_each(|v| *v /= total);
        }
        (x, c)
    }
}

/// Grid spanning the whole support, clustered towards both edges.
pub fn support_grid(measure: &SpectralMeasure, alpha: f64, points: usize) -> Result<Vec<f64>> {
    let left = left_edge_measure(measure, alpha)?.lambda_minus;
    // A heavy atom of tiny weight can put the right stationary point
    // closer to its pole than doubles resolve; the operator-norm bound
    // f_max (1 + sqrt(alpha))^2 still encloses the support.
    let right = match right_edge_measure(measure, alpha) {
        Err(Error::Structural(_)) => measure.f_range().1 * (1.0 + alpha.sqrt()).powi(2),
        r => r?,
    };
    if points < 2 || !(right > left) {
        return Err(Error::InvalidArgument("support grid needs >= 2 points and a nonempty support".into()));
    }
    let pi = core::f64::consts::PI;
    Ok((0..points)
        .map(|k| {
            let t = 0.5 * (1.0 - (pi * k as f64 / (points - 1) as f64).cos());
            left + (right - left) * t
        })
        .collect())
}

/// `rho(lambda) = -Im S(lambda + i eps) / pi` on `grid` (which must be
/// increasing), continuing each solve from the previous grid point.
pub fn bulk_density_measure(measure: &SpectralMeasure, alpha: f64, grid: &[f64], epsilon: f64) -> Result<BulkSolution> {
    check_alpha(alpha)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let edge = left_edge_measure(measure, alpha)?;
    let opts = StieltjesOptions::default();
    let mut seed: Option<Complex64> = None;
    let mut stieltjes = Vec::with_capacity(grid.len());
    let mut density = Vec::with_capacity(grid.len());
    for &lam in grid {
        let z = Complex64::new(lam, epsilon);
        let s = stieltjes_measure(measure, alpha, z, seed, opts).map_err(|e| match e {
            Error::Convergence { iterations, residual, .. } => Error::Convergence {
                solver: "bulk density",
                iterations,
                residual,
            },
            other => other,
        });
        let s = match s {
            Ok(v) => v,
            Err(_) => stieltjes_measure(measure, alpha, z, None, opts).map_err(|_| {
                Error::Precision(alloc::format!("Stieltjes solve failed at lambda = {lam}"))
            })?,
        };
        seed = Some(s);
        stieltjes.push(s);
        density.push((lam, (-s.im / core::f64::consts::PI).max(0.0)));
    }
    Ok(BulkSolution {
        alpha,
        grid: grid.to_vec(),
        stieltjes,
        density,
        left_edge_lambda: edge.lambda_minus,
        left_edge_stieltjes: edge.s_minus,
    })
}

pub fn bulk_density(
    density: &JointLabelDensity,
    kernel: Kernel,
    alpha: f64,
    grid: &[f64],
    epsilon: f64,
) -> Result<BulkSolution> {
    let m = SpectralMeasure::new(density, kernel)?;
    bulk_density_measure(&m, alpha, grid, epsilon)
}

pub fn left_edge(density: &JointLabelDensity, kernel: Kernel, alpha: f64) -> Result<LeftEdge> {
    left_edge_measure(&SpectralMeasure::new(density, kernel)?, alpha)
}

/// Isolated eigenvalue below the bulk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierReport {
    pub exists: bool,
    pub lambda_star: f64,
    /// Squared cosine between the outlier eigenvector and the signal.
    pub overlap_sq: f64,
    /// Same quantity from the closed-form derivative, for cross-checking.
    pub overlap_sq_analytic: f64,
    pub sigma_at_star: f64,
    pub s_star: f64,
    pub left_edge: LeftEdge,
}

/// `z(S) - Sigma(S)` at the left edge; positive iff an outlier exists.
pub fn edge_gap(measure: &SpectralMeasure, alpha: f64) -> Result<(f64, LeftEdge)> {
    let edge = left_edge_measure(measure, alpha)?;
    let t = measure.real_terms(alpha, edge.s_minus);
    Ok((edge.lambda_minus - t.sigma, edge))
}

pub fn outlier_measure(measure: &SpectralMeasure, alpha: f64) -> Result<OutlierReport> {
    let edge = left_edge_measure(measure, alpha)?;
    let none = OutlierReport {
        exists: false,
        lambda_star: f64::NAN,
        overlap_sq: 0.0,
        overlap_sq_analytic: 0.0,
        sigma_at_star: f64::NAN,
        s_star: f64::NAN,
        left_edge: edge,
    };
    let h = |s: f64| {
        let t = measure.real_terms(alpha, s);
        t.z - t.sigma
    };
    // h -> -inf at 0-. Scan from zero towards S_minus for the first sign
    // change; it gives the smallest outlier.
    let sm = edge.s_minus;
    let steps = 400;
    let mut prev_s = sm * 1e-12;
    let mut prev_h = h(prev_s);
    let mut bracket = None;
    for k in 1..=steps {
        // geometric in |S| near zero, then linear up to the edge
        let t = k as f64 / steps as f64;
        let s = sm * (1e-12f64).powf(1.0 - t).max(t * t);
        let s = if k == steps { sm } else { s };
        let hv = h(s);
        if prev_h < 0.0 && hv >= 0.0 {
            bracket = Some((s, prev_s));
            break;
        }
        prev_s = s;
        prev_h = hv;
    }
    let Some((pos, neg)) = bracket else {
        return Ok(none);
    };
    let s_star = bisect_root(h, pos, neg, 1e-15)?;
    if s_star <= sm {
        return Ok(none);
    }
    let t = measure.real_terms(alpha, s_star);
    let dsigma_dz = t.dsigma / t.dz;
    let analytic = 1.0 / (1.0 - dsigma_dz);
    let numeric = overlap_numeric(measure, alpha, &edge, t.z)?.unwrap_or(analytic);
    Ok(OutlierReport {
        exists: true,
        lambda_star: t.z,
        overlap_sq: numeric.clamp(0.0, 1.0),
        overlap_sq_analytic: analytic.clamp(0.0, 1.0),
        sigma_at_star: t.sigma,
        s_star,
        left_edge: edge,
    })
}

/// `1 / (1 - dSigma/dz)` with the derivative from central differences and
/// one Richardson step. `None` when the outlier sits too close to the edge
/// for a difference quotient to resolve.
fn overlap_numeric(measure: &SpectralMeasure, alpha: f64, edge: &LeftEdge, lambda_star: f64) -> Result<Option<f64>> {
    let gap = edge.lambda_minus - lambda_star;
    if gap <= 1e-6 * measure.scale(alpha) {
        return Ok(None);
    }
    let sigma = |z: f64| -> Result<f64> {
        let s = real_stieltjes_with_edge(measure, alpha, z, edge)?;
        Ok(measure.real_terms(alpha, s).sigma)
    };
    let h = 1e-4 * gap;
    let d = |h: f64| -> Result<f64> { Ok((sigma(lambda_star + h)? - sigma(lambda_star - h)?) / (2.0 * h)) };
    let d1 = d(h)?;
    let d2 = d(0.5 * h)?;
    let deriv = (4.0 * d2 - d1) / 3.0;
    Ok(Some(1.0 / (1.0 - deriv)))
}

pub fn outlier(density: &JointLabelDensity, kernel: Kernel, alpha: f64) -> Result<OutlierReport> {
    outlier_measure(&SpectralMeasure::new(density, kernel)?, alpha)
}

/// Result of a threshold solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BbpSolve {
    pub alpha: f64,
    /// Outlier and edge just above the threshold.
    pub lambda_star: f64,
    pub lambda_minus: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub measure_atoms: usize,
}

/// Smallest `alpha` at which an outlier exists, for a density that does not
/// depend on `alpha`.
pub fn bbp_alpha_measure(measure: &SpectralMeasure) -> Result<BbpSolve> {
    let gap = |alpha: f64| -> Result<f64> { Ok(edge_gap(measure, alpha)?.0) };
    let (mut lo, mut hi) = (0.1, 100.0);
    let mut expansions = 0;
    loop {
        let glo = gap(lo)?;
        let ghi = gap(hi)?;
        if glo <= 0.0 && ghi > 0.0 {
            break;
        }
        if expansions == 3 {
            return Err(Error::Structural(alloc::format!(
                "no threshold in alpha in [{lo}, {hi}] (gap {glo:.3e} .. {ghi:.3e})"
            )));
        }
        expansions += 1;
        if glo > 0.0 {
            lo /= 2.0;
        }
        if ghi <= 0.0 {
            hi *= 2.0;
        }
    }
    let bracket = (lo, hi);
    let mut iterations = 0;
    // The gap can change sign more than once on a wide bracket; scan for the
    // first crossing before refining.
    let scan = 48;
    let mut prev = lo;
    for k in 1..=scan {
        let a = lo * (hi / lo).powf(k as f64 / scan as f64);
        iterations += 1;
        if gap(a)? > 0.0 {
            hi = a;
            lo = prev;
            break;
        }
        prev = a;
    }
    let root = crate::roots::brent(
        |a| {
            iterations += 1;
            gap(a)
        },
        lo,
        hi,
        1e-10,
        200,
    )?;
    // Evaluate just above the root so the outlier is present.
    let hi = if gap(root)? > 0.0 { root } else { root * (1.0 + 1e-9) };
    let lo = root;
    let rep = outlier_measure(measure, hi)?;
    Ok(BbpSolve {
        alpha: 0.5 * (lo + hi),
        lambda_star: if rep.exists { rep.lambda_star } else { rep.left_edge.lambda_minus },
        lambda_minus: rep.left_edge.lambda_minus,
        bracket,
        iterations,
        measure_atoms: measure.len(),
    })
}

pub fn bbp_alpha(density: &JointLabelDensity, kernel: Kernel) -> Result<BbpSolve> {
    if let Some(n) = density.sample_count() {
        if n < MIN_EMPIRICAL_PAIRS {
            return Err(Error::Precision(alloc::format!(
                "{n} label pairs; at least {MIN_EMPIRICAL_PAIRS} needed for a threshold estimate"
            )));
        }
    }
    bbp_alpha_measure(&SpectralMeasure::new(density, kernel)?)
}

/// Outlier overlap over a sorted grid of sample ratios (zero without outlier).
pub fn overlap_curve(density: &JointLabelDensity, kernel: Kernel, alphas: &[f64]) -> Result<Vec<(f64, f64)>> {
    if alphas.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::InvalidArgument("alpha grid must be sorted".into()));
    }
    let m = SpectralMeasure::new(density, kernel)?;
    alphas
        .iter()
        .map(|&a| outlier_measure(&m, a).map(|r| (a, if r.exists { r.overlap_sq } else { 0.0 })))
        .collect()
}

/// Threshold ratio at each time for densities sampled along descent.
/// `sampler(t)` returns the label pairs observed at time `t`.
pub fn dynamical_bbp<F>(kernel: Kernel, times: &[f64], mut sampler: F) -> Result<Vec<(f64, f64)>>
where
    F: FnMut(f64) -> Result<Vec<(f64, f64)>>,
{
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let pairs = sampler(t)?;
        let d = JointLabelDensity::Empirical { pairs };
        out.push((t, bbp_alpha(&d, kernel)?.alpha));
    }
    Ok(out)
}

/// Time at which a threshold curve `alpha_bbp(t)` crosses `alpha`, by
/// linear interpolation; `None` if it never does on the sampled range.
pub fn crossing_time(curve: &[(f64, f64)], alpha: f64) -> Option<f64> {
    let t: Vec<f64> = curve.iter().map(|p| p.0).collect();
    let a: Vec<f64> = curve.iter().map(|p| p.1).collect();
    crate::stats::crossing(&t, &a, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wishart() -> SpectralMeasure {
        SpectralMeasure::new(&JointLabelDensity::analytic_init(1.0), Kernel::Constant(1.0)).unwrap()
    }

    #[test]
    fn mp_edges() {
        let m = wishart();
        let e = left_edge_measure(&m, 4.0).unwrap();
        assert!((e.lambda_minus - 1.0).abs() < 1e-6);
        assert!((right_edge_measure(&m, 4.0).unwrap() - 9.0).abs() < 1e-6 * 9.0);
        let e1 = left_edge_measure(&m, 1.0).unwrap();
        assert!(e1.lambda_minus.abs() < 1e-6);
    }

    #[test]
    fn mp_stieltjes_closed_form() {
        let m = wishart();
        let z = Complex64::new(5.0, 1e-3);
        let s = stieltjes_measure(&m, 4.0, z, None, StieltjesOptions::default()).unwrap();
        // z S^2 - (z + 1 - alpha) S + 1 = 0, branch with Im S < 0
        let b = z + 1.0 - 4.0;
        let disc = (b * b - z * 4.0).sqrt();
        let r1 = (b + disc) / (z * 2.0);
        let r2 = (b - disc) / (z * 2.0);
        let expect = if r1.im < 0.0 { r1 } else { r2 };
        assert!((s - expect).norm() / expect.norm() < 1e-6, "{s} vs {expect}");
    }

    #[test]
    fn constant_kernel_has_no_outlier() {
        let m = wishart();
        for alpha in [0.5, 2.0, 10.0] {
            assert!(!outlier_measure(&m, alpha).unwrap().exists);
        }
    }
}
