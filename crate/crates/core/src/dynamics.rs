//! Spherical gradient descent and its initializations.
//!
//! One step is `w <- w - eta g + eta mu w` with `mu = w . g / N`, which removes
//! the radial part of the gradient; by default the result is also rescaled
//! onto the sphere `|w|^2 = N`. Time is measured in steps; `eta * step` is
//! the continuous descent time.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, Extreme};
use crate::model::{gaussian_vector, loss_and_gradient_into, rescale_to_sphere, rng_for, Instance, LossSpec, Stream};
use crate::spectrum::{extreme_eigenpair, full_spectrum, DIAGONALIZATION_LIMIT};

pub const DEFAULT_ETA: f64 = 2e-4;
pub const STEPS_PER_LOG2_N: f64 = 12_000.0;
pub const DEFAULT_CONSTRAINED_STEPS: usize = 60_000;
pub const RECOVERY_THRESHOLD: f64 = 0.99;
pub const DEFAULT_RECORD_EVERY: usize = 100;
pub const DEFAULT_DENSE_PREFIX: usize = 1000;
/// Loss per variable below which an early-exit run stops.
pub const EARLY_EXIT_LOSS: f64 = 1e-12;

/// `round(12000 log2 N)`.
pub fn default_steps(n: usize) -> usize {
    (STEPS_PER_LOG2_N * (n as f64).log2()).round() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    Random,
    Spectral,
    Constrained { t_c: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub eta: f64,
    pub steps: usize,
    pub record_every: usize,
    /// Every step before this one is recorded.
    pub dense_prefix: usize,
    pub snapshot_times: Vec<usize>,
    pub init: InitScheme,
    pub renormalize: bool,
    pub early_exit: bool,
    pub init_seed: u64,
}

impl TrajectoryConfig {
    pub fn defaults_for(n: usize, init: InitScheme, init_seed: u64) -> Self {
        TrajectoryConfig {
            eta: DEFAULT_ETA,
            steps: default_steps(n),
            record_every: DEFAULT_RECORD_EVERY,
            dense_prefix: DEFAULT_DENSE_PREFIX,
            snapshot_times: Vec::new(),
            init,
            renormalize: true,
            early_exit: false,
            init_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument("eta must be positive".into()));
        }
        if self.steps == 0 || self.record_every == 0 {
            return Err(Error::InvalidArgument("steps and record_every must be positive".into()));
        }
        if let InitScheme::Constrained { t_c } = self.init {
            if t_c == 0 {
                return Err(Error::InvalidArgument("t_c must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    EarlyExit { step: usize },
    /// Non-finite state; the record is partial and invalid.
    Overflow { step: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<usize>,
    pub magnetization: Vec<f64>,
    /// `L(t) / N`.
    pub loss: Vec<f64>,
    pub snapshots: Vec<(usize, Vec<f64>)>,
    pub final_state: Vec<f64>,
    pub recovered: bool,
    pub status: RunStatus,
}

impl TrajectoryRecord {
    pub fn final_magnetization(&self) -> f64 {
        *self.magnetization.last().unwrap_or(&0.0)
    }
}

pub fn magnetization(inst: &Instance, w: &[f64]) -> Result<f64> {
    check_len(inst.n(), w)?;
    Ok(dot(w, inst.signal()) / inst.n() as f64)
}

/// Reusable buffers for repeated steps.
struct Stepper<'a> {
    spec: LossSpec,
    inst: &'a Instance,
    g: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(spec: &LossSpec, inst: &'a Instance) -> Result<Self> {
        spec.validate_labels(inst.labels())?;
        Ok(Stepper {
            spec: *spec,
            inst,
            g: vec![0.0; inst.n()],
        })
    }

    /// Evaluates loss and gradient at `w`.
    fn eval(&mut self, w: &[f64], step: usize) -> Result<f64> {
        let loss = loss_and_gradient_into(&self.spec, self.inst, w, &mut self.g)?;
        if !loss.is_finite() || self.g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalOverflow { step, context: "gradient" });
        }
        Ok(loss)
    }

    /// Applies the update with the gradient from the last `eval`.
    fn apply(&self, w: &mut [f64], eta: f64, renormalize: bool, step: usize) -> Result<()> {
        let mu = dot(w, &self.g) / w.len() as f64;
        let keep = 1.0 + eta * mu;
        for (wi, gi) in w.iter_mut().zip(&self.g) {
            *wi = keep * *wi - eta * gi;
        }
        if renormalize {
            rescale_to_sphere(w).map_err(|_| Error::NumericalOverflow { step, context: "renormalization" })?;
        }
        Ok(())
    }

    fn step(&mut self, w: &mut [f64], eta: f64, renormalize: bool, step: usize) -> Result<f64> {
        let loss = self.eval(w, step)?;
        self.apply(w, eta, renormalize, step)?;
        Ok(loss)
    }
}

fn check_sphere(w: &[f64]) -> Result<()> {
    let n = w.len() as f64;
    if ((dot(w, w) - n) / n).abs() > 1e-6 {
        return Err(Error::InvalidArgument("state must have norm sqrt(N) to relative 1e-6".into()));
    }
    Ok(())
}

/// One descent step.
pub fn gd_step(spec: &LossSpec, inst: &Instance, w: &[f64], eta: f64, renormalize: bool) -> Result<Vec<f64>> {
    check_len(inst.n(), w)?;
    check_sphere(w)?;
    let mut out = w.to_vec();
    Stepper::new(spec, inst)?.step(&mut out, eta, renormalize, 0)?;
    Ok(out)
}

/// Gaussian vector rescaled to norm `sqrt(N)`.
pub fn init_random(n: usize, seed: u64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidArgument("N must be at least 2".into()));
    }
    let mut w = gaussian_vector(&mut rng_for(seed, Stream::Init), n);
    rescale_to_sphere(&mut w)?;
    Ok(w)
}

/// Eigenvector of the smallest Hessian eigenvalue at a fresh random state,
/// signed to overlap nonnegatively with that state.
pub fn init_spectral(spec: &LossSpec, inst: &Instance, seed: u64) -> Result<Vec<f64>> {
    let n = inst.n();
    let mut reference = gaussian_vector(&mut rng_for(seed, Stream::SpectralReference), n);
    rescale_to_sphere(&mut reference)?;
    let mut v = match extreme_eigenpair(spec, inst, &reference, Extreme::Smallest, 1e-7) {
        Ok(pair) => pair.vector,
        Err(Error::Convergence { .. }) if n <= DIAGONALIZATION_LIMIT => full_spectrum(spec, inst, &reference)?.v_min,
        Err(e) => return Err(e),
    };
    if dot(&v, &reference) < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    rescale_to_sphere(&mut v)?;
    Ok(v)
}

fn project_out_signal(inst: &Instance, w: &mut [f64]) {
    let s = inst.signal();
    let c = dot(w, s) / dot(s, s);
    for (wi, si) in w.iter_mut().zip(s) {
        *wi -= c * si;
    }
}

/// Descent with the signal direction projected out after every update
/// (then rescaled onto the sphere). `observe(step, w, loss)` sees the state
/// after `step` constrained updates, starting from step 0.
pub fn constrained_descent<F>(
    spec: &LossSpec,
    inst: &Instance,
    w0: &[f64],
    t_c: usize,
    eta: f64,
    mut observe: F,
) -> Result<Vec<f64>>
where
    F: FnMut(usize, &[f64], f64),
{
    check_len(inst.n(), w0)?;
    let mut w = w0.to_vec();
    project_out_signal(inst, &mut w);
    rescale_to_sphere(&mut w)?;
    let mut stepper = Stepper::new(spec, inst)?;
    for step in 0..=t_c {
        let loss = stepper.eval(&w, step)?;
        observe(step, &w, loss);
        if step == t_c {
            break;
        }
        stepper.apply(&mut w, eta, false, step)?;
        project_out_signal(inst, &mut w);
        rescale_to_sphere(&mut w).map_err(|_| Error::NumericalOverflow { step, context: "projection" })?;
    }
    Ok(w)
}

/// Constrained initialization from a random start drawn from `seed`.
pub fn init_constrained(spec: &LossSpec, inst: &Instance, t_c: usize, eta: f64, seed: u64) -> Result<Vec<f64>> {
    if t_c == 0 {
        return Err(Error::InvalidArgument("t_c must be positive".into()));
    }
    let w0 = init_random(inst.n(), seed)?;
    constrained_descent(spec, inst, &w0, t_c, eta, |_, _, _| {})
}

pub fn initial_state(spec: &LossSpec, inst: &Instance, config: &TrajectoryConfig) -> Result<Vec<f64>> {
    match config.init {
        InitScheme::Random => init_random(inst.n(), config.init_seed),
        InitScheme::Spectral => init_spectral(spec, inst, config.init_seed),
        InitScheme::Constrained { t_c } => init_constrained(spec, inst, t_c, config.eta, config.init_seed),
    }
}

pub fn run_trajectory(spec: &LossSpec, inst: &Instance, config: &TrajectoryConfig) -> Result<TrajectoryRecord> {
    config.validate()?;
    let w0 = initial_state(spec, inst, config)?;
    run_trajectory_from(spec, inst, &w0, config)
}

/// Runs the configured number of steps from an explicit start state.
pub fn run_trajectory_from(
    spec: &LossSpec,
    inst: &Instance,
    w0: &[f64],
    config: &TrajectoryConfig,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    check_len(inst.n(), w0)?;
    let n = inst.n() as f64;
    let mut w = w0.to_vec();
    let mut stepper = Stepper::new(spec, inst)?;
    let mut rec = TrajectoryRecord {
        times: Vec::new(),
        magnetization: Vec::new(),
        loss: Vec::new(),
        snapshots: Vec::new(),
        final_state: Vec::new(),
        recovered: false,
        status: RunStatus::Completed,
    };
    let wants = |t: usize| t < config.dense_prefix || t % config.record_every == 0;
    let mut snaps: Vec<usize> = config.snapshot_times.clone();
    snaps.sort_unstable();
    snaps.dedup();
    let mut next_snap = 0;
    for t in 0..=config.steps {
        while next_snap < snaps.len() && snaps[next_snap] == t {
            rec.snapshots.push((t, w.clone()));
            next_snap += 1;
        }
        let loss = match stepper.eval(&w, t) {
            Ok(l) => l,
            Err(Error::NumericalOverflow { step, .. }) => {
                rec.status = RunStatus::Overflow { step };
                rec.final_state = w;
                return Ok(rec);
            }
            Err(e) => return Err(e),
        };
        let per_var = loss / n;
        let stop = config.early_exit && per_var < EARLY_EXIT_LOSS && t < config.steps;
        if wants(t) || t == config.steps || stop {
            rec.times.push(t);
            rec.magnetization.push(dot(&w, inst.signal()) / n);
            rec.loss.push(per_var);
        }
        if stop {
            rec.status = RunStatus::EarlyExit { step: t };
            break;
        }
        if t < config.steps {
            if let Err(Error::NumericalOverflow { step, .. }) = stepper.apply(&mut w, config.eta, config.renormalize, t) {
                rec.status = RunStatus::Overflow { step };
                rec.final_state = w;
                return Ok(rec);
            }
        }
    }
    rec.recovered = rec.final_magnetization().abs() >= RECOVERY_THRESHOLD;
    rec.final_state = w;
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;

    #[test]
    fn parallel_gradient_is_cancelled() {
        // With mu = w.g/N, g = c w gives w - eta c w + eta c w = w.
        let w = vec![1.0, -1.0, 1.0, 1.0];
        let g: Vec<f64> = w.iter().map(|x| 0.7 * x).collect();
        let mu = dot(&w, &g) / 4.0;
        let out: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - 0.1 * gi + 0.1 * mu * wi).collect();
        for (a, b) in out.iter().zip(&w) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn signal_is_fixed_point() {
        let inst = Instance::generate(16, 3.0, 2).unwrap();
        let spec = LossSpec::new(0.01).unwrap();
        let w = gd_step(&spec, &inst, inst.signal(), 0.1, true).unwrap();
        for (a, b) in w.iter().zip(inst.signal()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constrained_stays_on_equator() {
        let inst = Instance::generate(32, 3.0, 4).unwrap();
        let spec = LossSpec::new(0.01).unwrap();
        let w = init_constrained(&spec, &inst, 200, 0.01, 1).unwrap();
        assert!(magnetization(&inst, &w).unwrap().abs() < 1e-12);
        assert!((norm(&w) - 32f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn default_steps_rule() {
        assert_eq!(default_steps(1024), 120_000);
        assert_eq!(default_steps(2048), 132_000);
    }
}
