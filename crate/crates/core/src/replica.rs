//! Zero-temperature one-step replica-symmetry-breaking description of the
//! threshold states.
//!
//! The order parameters are `chi` (the rescaled intra-state overlap gap),
//! `z` (the rescaled block size) and `q0` (the inter-state overlap). With
//! `B = chi + z (1 - q0)` the free energy reads
//!
//! ```text
//! phi = -(1/2z) log(B / chi) - q0 / (2B)
//!       - (alpha/z) E_{r0, eta} log Int dh N(h - eta; 1 - q0) exp(-z Psi0(r0, h, chi))
//! ```
//!
//! with `r0 ~ N(0, 1)`, `eta ~ N(0, q0)` independent and
//! `Psi0(r0, h, chi) = min_r l(r0, r) + (h - r)^2 / (2 chi)`.
//!
//! The `h` integral runs on a fixed trapezoid grid so that the free energy is
//! a smooth function of the parameters; the Gaussian weight moves instead of
//! the nodes. `z` is fixed by marginal stability: the left edge of the
//! Hessian bulk built from the induced label density sits at zero.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::LossSpec;
use crate::quadrature::{gauss_hermite, HalfGaussianSpec, Rule};
use crate::rmt::{edge_gap, left_edge_measure, JointLabelDensity, LabelAtom, SpectralMeasure};

/// Order parameters of the threshold-state solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleParams {
    pub chi: f64,
    pub z: f64,
    pub q0: f64,
    /// Overlap with the signal; zero on the equator.
    pub m_overlap: f64,
}

impl SaddleParams {
    pub fn new(chi: f64, z: f64, q0: f64) -> Result<Self> {
        let p = SaddleParams {
            chi,
            z,
            q0,
            m_overlap: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.chi > 0.0 && self.z > 0.0 && (0.0..1.0).contains(&self.q0)) {
            return Err(Error::InvalidArgument(alloc::format!(
                "need chi > 0, z > 0, 0 <= q0 < 1; got chi={}, z={}, q0={}",
                self.chi,
                self.z,
                self.q0
            )));
        }
        Ok(())
    }
}

/// Node counts and extents for the replica integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicaQuadrature {
    /// Half-line nodes for `|r0|`.
    pub r0_nodes: usize,
    /// Gauss-Hermite nodes for `eta` (one node when `q0 = 0`).
    pub eta_nodes: usize,
    /// Trapezoid points for the local field `h` on `[-field_cutoff, field_cutoff]`.
    pub field_points: usize,
    pub field_cutoff: f64,
    /// Relative tolerance on the free energy against the half-resolution grid.
    pub rel_tol: f64,
}

impl Default for ReplicaQuadrature {
    fn default() -> Self {
        ReplicaQuadrature {
            r0_nodes: 60,
            eta_nodes: 80,
            field_points: 2401,
            field_cutoff: 9.0,
            rel_tol: 1e-5,
        }
    }
}

impl ReplicaQuadrature {
    /// Every node count doubled, for convergence checks.
    pub fn doubled(&self) -> Self {
        ReplicaQuadrature {
            r0_nodes: 2 * self.r0_nodes,
            eta_nodes: 2 * self.eta_nodes,
            field_points: 2 * self.field_points - 1,
            ..*self
        }
    }
}

/// Global minimum over `r` of `l(r0, r) + (h - r)^2 / (2 chi)`; returns the
/// value and the minimizer.
///
/// Stationary points solve the cubic `c r^3 + d r - h = 0` with
/// `c = 4 chi / (a + r0^2)` and `d = 1 - 4 chi r0^2 / (a + r0^2)`; all real
/// roots are compared.
pub fn proximal(spec: &LossSpec, r0: f64, h: f64, chi: f64) -> Result<(f64, f64)> {
    if !(chi > 0.0) {
        return Err(Error::InvalidArgument("chi must be positive".into()));
    }
    let den = spec.a + r0 * r0;
    if !(den > 0.0) {
        return Err(Error::DivisionByZero { y: r0 });
    }
    Ok(proximal_unchecked(spec.a, r0 * r0, h, chi))
}

fn proximal_unchecked(a: f64, r02: f64, h: f64, chi: f64) -> (f64, f64) {
    let den = a + r02;
    let c = 4.0 * chi / den;
    let d = 1.0 - 4.0 * chi * r02 / den;
    let objective = |r: f64| {
        let u = r02 - r * r;
        u * u / den + (h - r) * (h - r) / (2.0 * chi)
    };
    let polish = |mut r: f64| {
        for _ in 0..8 {
            let g = c * r * r * r + d * r - h;
            let gp = 3.0 * c * r * r + d;
            if gp.abs() <= 1e-300 {
                break;
            }
            let step = g / gp;
            r -= step;
            if step.abs() <= 1e-15 * (1.0 + r.abs()) {
                break;
            }
        }
        r
    };
    // Depressed cubic r^3 + p r + q = 0.
    let p = d / c;
    let q = -h / c;
    let disc = 0.25 * q * q + p * p * p / 27.0;
    let mut cands = [f64::NAN; 6];
    if disc >= 0.0 {
        let sq = disc.sqrt();
        // Stable pairing: take the larger-magnitude cube root first.
        let u = (-0.5 * q + sq.copysign(-q)).cbrt();
        cands[0] = if u != 0.0 { u - p / (3.0 * u) } else { 0.0 };
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (1.5 * q / p * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let th = arg.acos() / 3.0;
        for k in 0..3 {
            cands[k] = m * (th - 2.0 * PI * k as f64 / 3.0).cos();
        }
    }
    let r0 = r02.sqrt();
    cands[3] = h;
    cands[4] = r0.copysign(h);
    cands[5] = -r0.copysign(h);
    let mut best = (f64::INFINITY, h);
    for &r in cands.iter().filter(|r| r.is_finite()) {
        let r = polish(r);
        let v = objective(r);
        if v < best.0 {
            best = (v, r);
        }
    }
    best
}

/// `Psi0(r0, etaP + eta, chi)`.
pub fn psi0(spec: &LossSpec, r0: f64, eta_p: f64, eta: f64, chi: f64) -> Result<f64> {
    Ok(proximal(spec, r0, eta_p + eta, chi)?.0)
}

/// Everything one pass over the quadrature grid yields.
#[derive(Debug, Clone)]
pub struct ReplicaEvaluation {
    pub params: SaddleParams,
    pub alpha: f64,
    pub free_energy: f64,
    /// Free energy on the half-resolution field grid.
    pub free_energy_coarse: f64,
    /// `2 dphi/dchi`.
    pub residual_chi: f64,
    /// `(2/z) dphi/dq0`.
    pub residual_q0: f64,
    /// Induced `(|y|, yhat)` label distribution.
    pub atoms: Vec<LabelAtom>,
}

impl ReplicaEvaluation {
    /// Field-grid error of `free_energy`, assuming the second-order
    /// convergence the kinks of `Psi0` impose on the trapezoid rule.
    pub fn error_estimate(&self) -> f64 {
        (self.free_energy - self.free_energy_coarse).abs() / 3.0
    }

    pub fn density(&self) -> JointLabelDensity {
        JointLabelDensity::Replica1Rsb {
            atoms: self.atoms.clone(),
            chi: self.params.chi,
            z: self.params.z,
            q0: self.params.q0,
        }
    }
}

/// Reusable grids for one loss and quadrature setting.
#[derive(Debug, Clone)]
pub struct ReplicaGrid {
    spec: LossSpec,
    quad: ReplicaQuadrature,
    r0: Rule,
    eta_std: Rule,
    field: Vec<f64>,
    field_w: Vec<f64>,
}

impl ReplicaGrid {
    pub fn new(spec: LossSpec, quad: ReplicaQuadrature) -> Result<Self> {
        if quad.field_points < 5 || quad.field_points % 2 == 0 {
            return Err(Error::InvalidArgument("field grid needs an odd number >= 5 of points".into()));
        }
        if spec.a <= 0.0 {
            return Err(Error::InvalidArgument("replica integrals need a > 0".into()));
        }
        let r0 = HalfGaussianSpec::for_loss(spec.a, quad.r0_nodes).build()?;
        let eta_std = gauss_hermite(quad.eta_nodes)?;
        let n = quad.field_points;
        let l = quad.field_cutoff;
        let dh = 2.0 * l / (n - 1) as f64;
        let field: Vec<f64> = (0..n).map(|k| -l + k as f64 * dh).collect();
        let mut field_w = vec![dh; n];
        field_w[0] *= 0.5;
        field_w[n - 1] *= 0.5;
        Ok(ReplicaGrid {
            spec,
            quad,
            r0,
            eta_std,
            field,
            field_w,
        })
    }

    pub fn spec(&self) -> LossSpec {
        self.spec
    }

    pub fn quadrature(&self) -> ReplicaQuadrature {
        self.quad
    }

    /// Pointwise joint density of the true label `y` and the total local
    /// field `h = eta_P + eta` on threshold states:
    /// `N(y) E_eta[ N(h - eta; 1 - q0) e^{-z Psi0(y, h)} / Z(y, eta) ]`.
    /// Labels on the states are the minimizers of `Psi0`; this is the
    /// density before that change of variables.
    pub fn field_density(&self, params: SaddleParams, y: f64, h: f64) -> Result<f64> {
        params.validate()?;
        let SaddleParams { chi, z, q0, .. } = params;
        let a = self.spec.a;
        let y2 = y * y;
        let v = 1.0 - q0;
        let psi: Vec<f64> = self.field.iter().map(|&x| proximal_unchecked(a, y2, x, chi).0).collect();
        let m = psi.iter().fold(f64::INFINITY, |acc, &p| acc.min(z * p));
        let at = (-(z * proximal_unchecked(a, y2, h, chi).0 - m)).exp();
        let (eta, eta_w): (Vec<f64>, Vec<f64>) = if q0 == 0.0 {
            (vec![0.0], vec![1.0])
        } else {
            let s = q0.sqrt();
            (self.eta_std.nodes.iter().map(|x| s * x).collect(), self.eta_std.weights.clone())
        };
        let mut total = 0.0;
        for (&e, &we) in eta.iter().zip(&eta_w) {
            let z_norm: f64 = self
                .field
                .iter()
                .zip(&self.field_w)
                .zip(&psi)
                .map(|((&x, &wx), &p)| wx * (-(x - e) * (x - e) / (2.0 * v) - (z * p - m)).exp())
                .sum();
            total += we * (-(h - e) * (h - e) / (2.0 * v)).exp() * at / z_norm;
        }
        Ok(crate::quadrature::normal_pdf(y) * total)
    }

    pub fn evaluate(&self, alpha: f64, params: SaddleParams) -> Result<ReplicaEvaluation> {
        params.validate()?;
        if !(alpha > 0.0) {
            return Err(Error::InvalidArgument("alpha must be positive".into()));
        }
        let SaddleParams { chi, z, q0, .. } = params;
        let nh = self.field.len();
        let n1 = self.r0.len();
        let (eta, eta_w): (Vec<f64>, Vec<f64>) = if q0 == 0.0 {
            (vec![0.0], vec![1.0])
        } else {
            let s = q0.sqrt();
            (
                self.eta_std.nodes.iter().map(|x| s * x).collect(),
                self.eta_std.weights.clone(),
            )
        };
        let v = 1.0 - q0;
        let norm = 1.0 / (2.0 * PI * v).sqrt();
        // Gaussian kernel in h for each eta node.
        let gk: Vec<Vec<f64>> = eta
            .iter()
            .map(|&e| {
                self.field
                    .iter()
                    .map(|&h| norm * (-(h - e) * (h - e) / (2.0 * v)).exp())
                    .collect()
            })
            .collect();

        let b = chi + z * v;
        let mut energetic = 0.0;
        let mut energetic_coarse = 0.0;
        let mut chi_term = 0.0;
        let mut q_term = 0.0;
        let mut atoms = Vec::with_capacity(n1 * nh);
        let mut psi = vec![0.0; nh];
        let mut rt = vec![0.0; nh];
        let mut ew = vec![0.0; nh];
        let mut dpsi2 = vec![0.0; nh];
        let mut atom_w = vec![0.0; nh];
        let a = self.spec.a;
        let half = nh / 2;
        for (&r0, &w0) in self.r0.nodes.iter().zip(&self.r0.weights) {
            let r02 = r0 * r0;
            // Psi0 is even in h; fill the positive half and mirror.
            for k in half..nh {
                let (val, arg) = proximal_unchecked(a, r02, self.field[k], chi);
                psi[k] = val;
                rt[k] = arg;
                psi[nh - 1 - k] = val;
                rt[nh - 1 - k] = -arg;
            }
            let m = psi.iter().fold(f64::INFINITY, |acc, &p| acc.min(z * p));
            for k in 0..nh {
                ew[k] = self.field_w[k] * (-(z * psi[k] - m)).exp();
                let t = (self.field[k] - rt[k]) / chi;
                dpsi2[k] = t * t;
            }
            atom_w.iter_mut().for_each(|x| *x = 0.0);
            for (j, g) in gk.iter().enumerate() {
                let (mut i0, mut i1, mut i2, mut ic) = (0.0, 0.0, 0.0, 0.0);
                for k in 0..nh {
                    let t = g[k] * ew[k];
                    i0 += t;
                    i1 += t * dpsi2[k];
                    i2 += t * (self.field[k] - eta[j]);
                    if k % 2 == 0 {
                        ic += t;
                    }
                }
                // Coarse trapezoid: doubled spacing, halved end weights.
                ic = 2.0 * ic - 0.5 * (g[0] * ew[0] + g[nh - 1] * ew[nh - 1]);
                if !(i0 > 0.0) {
                    return Err(Error::Precision(alloc::format!(
                        "field integral underflow at r0 = {r0}, eta = {}",
                        eta[j]
                    )));
                }
                let wj = w0 * eta_w[j];
                energetic += wj * (i0.ln() - m);
                energetic_coarse += wj * (ic.max(f64::MIN_POSITIVE).ln() - m);
                chi_term += wj * i1 / i0;
                let mean = i2 / i0;
                q_term += wj * mean * mean;
                let scale = wj / i0;
                for k in 0..nh {
                    atom_w[k] += scale * g[k] * ew[k];
                }
            }
            for k in 0..nh {
                if atom_w[k] > 0.0 {
                    atoms.push(LabelAtom {
                        y: r0,
                        yhat: rt[k],
                        weight: atom_w[k],
                    });
                }
            }
        }
        let entropic = -(b / chi).ln() / (2.0 * z) - q0 / (2.0 * b);
        let free_energy = entropic - alpha / z * energetic;
        let free_energy_coarse = entropic - alpha / z * energetic_coarse;
        let residual_chi = (1.0 / chi - 1.0 / b) / z + q0 / (b * b) - alpha * chi_term;
        let residual_q0 = -q0 / (b * b) + alpha / (z * z * v * v) * q_term;
        Ok(ReplicaEvaluation {
            params,
            alpha,
            free_energy,
            free_energy_coarse,
            residual_chi,
            residual_q0,
            atoms,
        })
    }
}

/// The 1RSB free energy, with a precision error when the field grid is too
/// coarse for `quad.rel_tol`.
pub fn free_energy_1rsb(spec: &LossSpec, alpha: f64, params: SaddleParams, quad: ReplicaQuadrature) -> Result<f64> {
    let ev = ReplicaGrid::new(*spec, quad)?.evaluate(alpha, params)?;
    if ev.error_estimate() > quad.rel_tol * ev.free_energy.abs().max(1.0) {
        return Err(Error::Precision(alloc::format!(
            "free energy not converged on the field grid: error estimate {:.3e}",
            ev.error_estimate()
        )));
    }
    Ok(ev.free_energy)
}

/// `(chi residual, q0 residual)`, both zero at a saddle point.
pub fn saddle_residuals(spec: &LossSpec, alpha: f64, params: SaddleParams, quad: ReplicaQuadrature) -> Result<(f64, f64)> {
    let ev = ReplicaGrid::new(*spec, quad)?.evaluate(alpha, params)?;
    Ok((ev.residual_chi, ev.residual_q0))
}

/// Label density induced by a parameter set.
pub fn joint_density_1rsb(
    spec: &LossSpec,
    alpha: f64,
    params: SaddleParams,
    quad: ReplicaQuadrature,
) -> Result<JointLabelDensity> {
    Ok(ReplicaGrid::new(*spec, quad)?.evaluate(alpha, params)?.density())
}

/// Left edge of the shifted Hessian bulk, `lambda_-/2 - mu`, for a label
/// density, with `mu = (alpha/2) E[yhat dl/dyhat]`.
pub fn shifted_left_edge(spec: &LossSpec, alpha: f64, atoms: &[LabelAtom]) -> Result<f64> {
    let measure = atom_measure(spec, atoms)?;
    let edge = left_edge_measure(&measure, alpha)?;
    Ok(0.5 * edge.lambda_minus - radial_shift(spec, alpha, atoms)?)
}

fn atom_measure(spec: &LossSpec, atoms: &[LabelAtom]) -> Result<SpectralMeasure> {
    let mut f = Vec::with_capacity(atoms.len());
    let mut y2 = Vec::with_capacity(atoms.len());
    let mut w = Vec::with_capacity(atoms.len());
    for at in atoms {
        f.push(spec.curvature(at.y, at.yhat)?);
        y2.push(at.y * at.y);
        w.push(at.weight);
    }
    SpectralMeasure::from_parts(f, y2, w)
}

fn radial_shift(spec: &LossSpec, alpha: f64, atoms: &[LabelAtom]) -> Result<f64> {
    let total: f64 = atoms.iter().map(|a| a.weight).sum();
    let mut s = 0.0;
    for at in atoms {
        s += at.weight * at.yhat * spec.dloss(at.y, at.yhat)?;
    }
    Ok(0.5 * alpha * s / total)
}

/// Solver settings for the threshold state.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub initial: SaddleParams,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-9,
            max_iter: 60,
            initial: SaddleParams {
                chi: 1.0,
                z: 1.0,
                q0: 0.0,
                m_overlap: 0.0,
            },
        }
    }
}

/// Threshold-state solution with diagnostics.
#[derive(Debug, Clone)]
pub struct ThresholdState {
    pub alpha: f64,
    pub params: SaddleParams,
    /// `(chi residual, q0 residual, shifted left edge)`.
    pub residuals: [f64; 3],
    pub converged: bool,
    pub iterations: usize,
    pub evaluation: ReplicaEvaluation,
}

impl ThresholdState {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()))
    }
}

fn system(grid: &ReplicaGrid, alpha: f64, x: [f64; 3]) -> Result<([f64; 3], ReplicaEvaluation)> {
    let params = SaddleParams::new(x[0].exp(), x[1].exp(), x[2])?;
    let ev = grid.evaluate(alpha, params)?;
    let edge = shifted_left_edge(&grid.spec, alpha, &ev.atoms)?;
    Ok(([ev.residual_chi, ev.residual_q0, edge], ev))
}

fn solve_linear<const K: usize>(mut a: [[f64; K]; K], mut b: [f64; K]) -> Option<[f64; K]> {
    for col in 0..K {
        let piv = (col..K).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..K {
            let f = a[row][col] / a[col][col];
            for c in col..K {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; K];
    for row in (0..K).rev() {
        let s: f64 = (row + 1..K).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn sq_norm(r: &[f64; 3]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Damped Newton with a forward-difference Jacobian on
/// `(log chi, log z, q0)`, keeping `q0` in `[0, 0.99]`. When `q0` sits at
/// zero and the step points outward, the `q0` equation (identically zero
/// there by symmetry) is dropped and the remaining 2x2 system is solved.
pub fn solve_threshold_state_on(grid: &ReplicaGrid, alpha: f64, opts: SolveOptions) -> Result<ThresholdState> {
    let mut x = [opts.initial.chi.ln(), opts.initial.z.ln(), opts.initial.q0];
    let (mut r, mut ev) = system(grid, alpha, x)?;
    let mut iterations = 0;
    while iterations < opts.max_iter && sq_norm(&r).sqrt() > opts.tol {
        iterations += 1;
        let h = 1e-6;
        let mut jac = [[0.0; 3]; 3];
        for c in 0..3 {
            let mut xp = x;
            xp[c] += h;
            let (rp, _) = system(grid, alpha, xp)?;
            for row in 0..3 {
                jac[row][c] = (rp[row] - r[row]) / h;
            }
        }
        let neg = [-r[0], -r[1], -r[2]];
        let mut step = solve_linear(jac, neg).unwrap_or([0.0; 3]);
        if x[2] <= 0.0 && step[2] <= 0.0 || !step[2].is_finite() {
            let reduced = solve_linear([[jac[0][0], jac[0][1]], [jac[2][0], jac[2][1]]], [-r[0], -r[2]]);
            let Some(s2) = reduced else {
                break;
            };
            step = [s2[0], s2[1], 0.0];
        }
        // Keep log-steps moderate, then backtrack on the residual norm.
        let big = step[0].abs().max(step[1].abs());
        if big > 1.0 {
            step = [step[0] / big, step[1] / big, step[2] / big];
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let mut xn = [x[0] + t * step[0], x[1] + t * step[1], x[2] + t * step[2]];
            xn[2] = xn[2].clamp(0.0, 0.99);
            if let Ok((rn, evn)) = system(grid, alpha, xn) {
                if sq_norm(&rn) < sq_norm(&r) {
                    x = xn;
                    r = rn;
                    ev = evn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let converged = sq_norm(&r).sqrt() <= opts.tol.max(1e-6);
    Ok(ThresholdState {
        alpha,
        params: ev.params,
        residuals: r,
        converged,
        iterations,
        evaluation: ev,
    })
}

/// Threshold state at `alpha`, reached by continuation from `alpha = 10`
/// when the direct solve from `(1, 1, 0)` fails. A failed solve returns the
/// best iterate with `converged = false`.
pub fn solve_threshold_state(spec: &LossSpec, alpha: f64, quad: ReplicaQuadrature) -> Result<ThresholdState> {
    let grid = ReplicaGrid::new(*spec, quad)?;
    let opts = SolveOptions::default();
    if let Ok(st) = solve_threshold_state_on(&grid, alpha, opts) {
        if st.converged {
            return Ok(st);
        }
    }
    let start = 10.0f64.max(alpha);
    let steps = 12;
    let mut guess = opts.initial;
    let mut last = None;
    for k in 0..=steps {
        let a = start + (alpha - start) * k as f64 / steps as f64;
        let st = solve_threshold_state_on(&grid, a, SolveOptions { initial: guess, ..opts })?;
        guess = st.params;
        last = Some(st);
    }
    Ok(last.expect("at least one continuation step"))
}

/// Self-consistent threshold: the `alpha` at which the outlier of the
/// Hessian built from the threshold-state density at that same `alpha`
/// reaches the bulk edge.
#[derive(Debug, Clone)]
pub struct ThresholdBbp {
    pub alpha: f64,
    pub state: ThresholdState,
    pub evaluations: usize,
}

pub fn threshold_bbp(spec: &LossSpec, quad: ReplicaQuadrature, bracket: (f64, f64)) -> Result<ThresholdBbp> {
    let grid = ReplicaGrid::new(*spec, quad)?;
    let (lo, hi) = bracket;
    let mut guess = solve_threshold_state(spec, hi, quad)?.params;
    let mut evaluations = 0;
    let mut gap_at = |a: f64, guess: &mut SaddleParams| -> Result<(f64, ThresholdState)> {
        evaluations += 1;
        let warm = solve_threshold_state_on(
            &grid,
            a,
            SolveOptions {
                initial: *guess,
                ..SolveOptions::default()
            },
        );
        // A warm start from a distant ratio can stall; fall back to the
        // cold start with continuation.
        let st = match warm {
            Ok(st) if st.converged => st,
            _ => solve_threshold_state(spec, a, quad)?,
        };
        if !st.converged {
            return Err(Error::Convergence {
                solver: "threshold state",
                iterations: st.iterations,
                residual: st.max_residual(),
            });
        }
        *guess = st.params;
        let m = atom_measure(spec, &st.evaluation.atoms)?;
        Ok((edge_gap(&m, a)?.0, st))
    };
    let (g_hi, _) = gap_at(hi, &mut guess)?;
    let (g_lo, _) = gap_at(lo, &mut guess)?;
    if !(g_lo <= 0.0 && g_hi > 0.0) {
        return Err(Error::Structural(alloc::format!(
            "threshold not bracketed in [{lo}, {hi}]: gaps {g_lo:.3e}, {g_hi:.3e}"
        )));
    }
    let root = crate::roots::brent(|a| Ok(gap_at(a, &mut guess)?.0), lo, hi, 1e-6, 60)?;
    let (_, state) = gap_at(root, &mut guess)?;
    Ok(ThresholdBbp {
        alpha: root,
        state,
        evaluations,
    })
}
