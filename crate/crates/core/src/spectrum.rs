//! Hessian of the spherical loss and its spectrum.
//!
//! For `L(w) = 1/2 sum_i l(y_i, x_i . w)` on the sphere `|w|^2 = N`, the
//! Riemannian Hessian is `H = 1/2 sum_i f_i x_i x_i^T - mu I`, with
//! `f_i = d^2 l / d yhat^2` and `mu = w . grad L / N`. The random-matrix
//! predictions are stated for the unscaled ensemble `sum_i f_i x_i x_i^T`;
//! [`SpectrumReport::ensemble_eigenvalues`] converts.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{check_len, Error, Result};
use crate::linalg::{
    axpy, dot, lanczos_extreme, symmetric_eigen_min, weighted_gram, EigenPair, Extreme,
    LanczosOptions, SymMatrix,
};
use crate::model::{curvature_weights, gradient, Instance, LossSpec};

/// Largest dimension for which a dense Hessian may be formed.
pub const DENSE_LIMIT: usize = 8192;
/// Largest dimension for a full dense diagonalization.
pub const DIAGONALIZATION_LIMIT: usize = 4096;

/// Radial multiplier `mu = w . grad L / N`.
pub fn mu_shift(spec: &LossSpec, inst: &Instance, w: &[f64]) -> Result<f64> {
    let g = gradient(spec, inst, w)?;
    Ok(dot(w, &g) / inst.n() as f64)
}

/// Dense Hessian, exactly symmetric.
pub fn hessian_dense(spec: &LossSpec, inst: &Instance, w: &[f64], include_mu_shift: bool) -> Result<SymMatrix> {
    let n = inst.n();
    if n > DENSE_LIMIT {
        return Err(Error::ResourceLimit { n, limit: DENSE_LIMIT });
    }
    let f = curvature_weights(spec, inst, w)?;
    let half: Vec<f64> = f.iter().map(|v| 0.5 * v).collect();
    let mut h = weighted_gram(inst.sensing(), inst.m(), n, &half)?;
    if include_mu_shift {
        h.add_diagonal(-mu_shift(spec, inst, w)?);
    }
    Ok(h)
}

/// Matrix-free Hessian at a fixed state.
#[derive(Debug, Clone)]
pub struct HessianOperator<'a> {
    inst: &'a Instance,
    half_weights: Vec<f64>,
    mu: f64,
}

impl<'a> HessianOperator<'a> {
    pub fn new(spec: &LossSpec, inst: &'a Instance, w: &[f64], include_mu_shift: bool) -> Result<Self> {
        let f = curvature_weights(spec, inst, w)?;
        let mu = if include_mu_shift { mu_shift(spec, inst, w)? } else { 0.0 };
        Ok(HessianOperator {
            inst,
            half_weights: f.into_iter().map(|v| 0.5 * v).collect(),
            mu,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn dim(&self) -> usize {
        self.inst.n()
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let n = self.inst.n();
        for (o, ui) in out.iter_mut().zip(u) {
            *o = -self.mu * ui;
        }
        for (x, &c) in self.inst.sensing().chunks_exact(n).zip(&self.half_weights) {
            axpy(c * dot(x, u), x, out);
        }
    }
}

pub fn hessian_times_vector(spec: &LossSpec, inst: &Instance, w: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    check_len(inst.n(), u)?;
    let op = HessianOperator::new(spec, inst, w, true)?;
    let mut out = vec![0.0; inst.n()];
    op.apply(u, &mut out);
    Ok(out)
}

/// Extreme eigenpair of the shifted Hessian by Lanczos on the matrix-free
/// operator; the residual satisfies `|Hv - lv| <= tol max(1, |l|)`.
pub fn extreme_eigenpair(
    spec: &LossSpec,
    inst: &Instance,
    w: &[f64],
    which: Extreme,
    tol: f64,
) -> Result<EigenPair> {
    let op = HessianOperator::new(spec, inst, w, true)?;
    let n = inst.n();
    let start: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64 * 0.618_033_988_749_895).fract() - 0.5))
        .collect();
    let opts = LanczosOptions {
        tol,
        max_basis: 160.min(n),
        max_matvecs: 40_000,
    };
    lanczos_extreme(n, |u, o| op.apply(u, o), which, &start, opts)
}

/// Number of smallest bulk eigenvalues whose spacing calibrates detachment.
pub const EDGE_WINDOW: usize = 32;
/// Gap multiple above which the smallest eigenvalue counts as detached.
pub const DETACH_FACTOR: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Eigenvalues of the shifted Hessian, ascending.
    pub eigenvalues: Vec<f64>,
    pub lambda_min: f64,
    pub v_min: Vec<f64>,
    /// `(v_min . w*)^2 / N`.
    pub signal_overlap_sq: f64,
    pub mu_shift: f64,
    pub outlier_detached: bool,
    /// Smallest eigenvalue that is not a detached outlier.
    pub bulk_left_estimate: f64,
}

impl SpectrumReport {
    /// Eigenvalues of `sum_i f_i x_i x_i^T`, the scale of the random-matrix
    /// predictions.
    pub fn ensemble_eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| 2.0 * (l + self.mu_shift)).collect()
    }
}

/// Whether the smallest value is separated from the next by more than
/// [`DETACH_FACTOR`] times the median spacing of the following
/// [`EDGE_WINDOW`] values.
pub fn is_detached(sorted: &[f64]) -> bool {
    if sorted.len() < 4 {
        return false;
    }
    let end = (1 + EDGE_WINDOW).min(sorted.len());
    let mut gaps: Vec<f64> = sorted[1..end].windows(2).map(|p| p[1] - p[0]).collect();
    gaps.sort_by(|a, b| a.total_cmp(b));
    let median = gaps[gaps.len() / 2];
    sorted[1] - sorted[0] > DETACH_FACTOR * median
}

pub fn full_spectrum(spec: &LossSpec, inst: &Instance, w: &[f64]) -> Result<SpectrumReport> {
    let n = inst.n();
    if n > DIAGONALIZATION_LIMIT {
        return Err(Error::ResourceLimit {
            n,
            limit: DIAGONALIZATION_LIMIT,
        });
    }
    let mu = mu_shift(spec, inst, w)?;
    let mut h = hessian_dense(spec, inst, w, false)?;
    h.add_diagonal(-mu);
    let eig = symmetric_eigen_min(h)?;
    let overlap = dot(&eig.min_vector, inst.signal());
    let detached = is_detached(&eig.values);
    Ok(SpectrumReport {
        lambda_min: eig.values[0],
        bulk_left_estimate: if detached { eig.values[1] } else { eig.values[0] },
        signal_overlap_sq: overlap * overlap / n as f64,
        mu_shift: mu,
        outlier_detached: detached,
        v_min: eig.min_vector,
        eigenvalues: eig.values,
    })
}

/// Normalized histogram over `[min, max]` of the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    pub fn integral(&self) -> f64 {
        self.edges
            .windows(2)
            .zip(&self.density)
            .map(|(e, d)| (e[1] - e[0]) * d)
            .sum()
    }
}

pub fn empirical_density(values: &[f64], bins: usize) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty eigenvalue list".into()));
    }
    if bins < 10 {
        return Err(Error::InvalidArgument("at least 10 bins required".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let edges = (0..=bins).map(|k| lo + k as f64 * width).collect();
    let total = values.len() as f64;
    Ok(Histogram {
        edges,
        density: counts.iter().map(|&c| c as f64 / (total * width)).collect(),
    })
}
