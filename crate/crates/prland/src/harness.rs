//! Experiment orchestration: recovery sweeps, threshold-state pools,
//! finite-size extrapolation, spectral-evolution reports and log-N scaling.

use std::collections::{BTreeMap, HashSet};
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use prland_core::dynamics::{
    constrained_descent, init_random, run_trajectory, InitScheme, RunStatus, TrajectoryConfig,
};
use prland_core::model::{Instance, LossSpec};
use prland_core::rmt::{
    bbp_alpha, bulk_density_measure, outlier_measure, support_grid, JointLabelDensity, Kernel, SpectralMeasure,
    MIN_EMPIRICAL_PAIRS,
};
use prland_core::spectrum::full_spectrum;
use prland_core::stats::{self, LineFit};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Config, InitKind, StepsRule};
use crate::error::{CliError, CliResult};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "PRLAND_WORKERS";

/// Worker pool sized by [`WORKERS_ENV`], else by the available cores.
pub fn worker_pool() -> CliResult<rayon::ThreadPool> {
    let n = match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?,
        Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))
}

/// Experimental grid for a recovery sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub loss_a: f64,
    pub n_list: Vec<usize>,
    pub alpha_grid: Vec<f64>,
    pub seeds_per_cell: usize,
    pub init: InitKind,
    pub eta: f64,
    pub steps_rule: String,
    pub t_c: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
}

impl SweepSpec {
    pub fn from_config(cfg: &Config) -> Self {
        SweepSpec {
            loss_a: cfg.loss.a,
            n_list: cfg.grid.n.clone(),
            alpha_grid: cfg.grid.alpha.clone(),
            seeds_per_cell: cfg.grid.seeds_per_cell,
            init: cfg.dynamics.init,
            eta: cfg.dynamics.eta,
            steps_rule: cfg.dynamics.steps.clone(),
            t_c: cfg.dynamics.t_c,
            base_seed: cfg.grid.base_seed,
            output_dir: cfg.output.dir.clone(),
        }
    }

    pub fn validate(&self) -> CliResult<StepsRule> {
        let bad = |m: &str| CliError::Numerical(prland_core::Error::InvalidArgument(m.into()));
        LossSpec::new(self.loss_a)?;
        if self.seeds_per_cell == 0 {
            return Err(bad("seeds_per_cell must be at least 1"));
        }
        if self.n_list.is_empty() || self.alpha_grid.is_empty() {
            return Err(bad("grids must be non-empty"));
        }
        if self.n_list.windows(2).any(|p| p[1] <= p[0]) || self.alpha_grid.windows(2).any(|p| p[1] <= p[0]) {
            return Err(bad("grids must be sorted and distinct"));
        }
        if !(self.eta > 0.0) || self.t_c == 0 {
            return Err(bad("eta and t_c must be positive"));
        }
        StepsRule::parse(&self.steps_rule).map_err(|m| bad(&m))
    }

    fn init_scheme(&self) -> InitScheme {
        match self.init {
            InitKind::Random => InitScheme::Random,
            InitKind::Spectral => InitScheme::Spectral,
            InitKind::Constrained => InitScheme::Constrained { t_c: self.t_c },
        }
    }
}

/// Seed of one sweep cell. Depends only on the cell's own coordinates, so
/// editing the grid never reshuffles other cells.
pub fn cell_seed(base_seed: u64, n: usize, alpha: f64, index: usize) -> u64 {
    let key = format!("{base_seed}:{n}:{:016x}:{index}", alpha.to_bits());
    let digest = crate::manifest::sha256_hex(key.as_bytes());
    u64::from_str_radix(&digest[..16], 16).expect("hex digest")
}

/// One finished trajectory of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: f64,
    pub seed_index: usize,
    pub seed: u64,
    pub final_m: f64,
    pub final_loss: f64,
    pub recovered: bool,
    pub status: String,
    pub steps_run: usize,
    pub seconds: f64,
}

/// A cell whose trajectory errored; recorded, not fatal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: f64,
    pub seed_index: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: f64,
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Recovery rates with Wilson 95% intervals, sorted by `(N, alpha)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecoveryTable {
    pub rows: Vec<RecoveryRow>,
}

impl RecoveryTable {
    pub fn from_cells(cells: &[CellRecord]) -> CliResult<Self> {
        let mut groups: BTreeMap<(usize, u64), (f64, usize, usize)> = BTreeMap::new();
        for c in cells {
            // Bit patterns of positive floats sort like the floats.
            let e = groups.entry((c.n, c.alpha.to_bits())).or_insert((c.alpha, 0, 0));
            e.1 += c.recovered as usize;
            e.2 += 1;
        }
        let mut rows = Vec::with_capacity(groups.len());
        for ((n, _), (alpha, successes, trials)) in groups {
            let (ci_low, ci_high) = stats::wilson_interval(successes, trials, stats::Z95)?;
            rows.push(RecoveryRow {
                n,
                alpha,
                successes,
                trials,
                rate: successes as f64 / trials as f64,
                ci_low,
                ci_high,
            });
        }
        Ok(RecoveryTable { rows })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        v.dedup();
        v
    }

    pub fn curve(&self, n: usize) -> Vec<&RecoveryRow> {
        self.rows.iter().filter(|r| r.n == n).collect()
    }

    /// Alpha at which the isotonic (weighted by trials) rate curve of size
    /// `n` crosses `level`.
    pub fn crossing(&self, n: usize, level: f64) -> Option<f64> {
        let rows = self.curve(n);
        if rows.len() < 2 {
            return None;
        }
        let x: Vec<f64> = rows.iter().map(|r| r.alpha).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.rate).collect();
        let w: Vec<f64> = rows.iter().map(|r| r.trials as f64).collect();
        let iso = stats::isotonic_increasing(&y, &w).ok()?;
        stats::crossing(&x, &iso, level)
    }

    /// Whether each curve is non-decreasing up to overlapping intervals:
    /// a later point may fall below an earlier one only if their
    /// confidence intervals intersect.
    pub fn monotone_within_ci(&self) -> bool {
        self.sizes().into_iter().all(|n| {
            let rows = self.curve(n);
            rows.iter()
                .enumerate()
                .all(|(i, a)| rows[i + 1..].iter().all(|b| b.rate >= a.rate || b.ci_high >= a.ci_low))
        })
    }
}

/// Outcome of a sweep, including cells finished by earlier invocations.
#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub table: RecoveryTable,
    pub cells: Vec<CellRecord>,
    pub failures: Vec<CellFailure>,
    /// `(N, alpha)` cells with fewer finished trials than requested.
    pub incomplete: Vec<(usize, f64)>,
    /// Cells run by this invocation.
    pub ran: usize,
}

impl SweepOutcome {
    /// Mean of `m(T)^2` per `(N, alpha)`, in table order.
    pub fn mean_m2(&self) -> Vec<(usize, f64, f64)> {
        self.table
            .rows
            .iter()
            .map(|r| {
                let v: Vec<f64> = self
                    .cells
                    .iter()
                    .filter(|c| c.n == r.n && c.alpha == r.alpha)
                    .map(|c| c.final_m * c.final_m)
                    .collect();
                (r.n, r.alpha, v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect()
    }
}

pub const CELLS_FILE: &str = "cells.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const RECOVERY_FILE: &str = "recovery.csv";

fn read_finished_cells(path: &Path) -> Vec<CellRecord> {
    // A crash can leave a torn last line; unreadable rows are rerun.
    let Ok(mut r) = csv::ReaderBuilder::new().flexible(true).from_path(path) else {
        return Vec::new();
    };
    r.deserialize().filter_map(|row| row.ok()).collect()
}

fn run_cell(spec: &SweepSpec, rule: StepsRule, n: usize, alpha: f64, index: usize) -> Result<CellRecord, CellFailure> {
    let seed = cell_seed(spec.base_seed, n, alpha, index);
    let start = Instant::now();
    let fail = |e: prland_core::Error| CellFailure {
        n,
        alpha,
        seed_index: index,
        seed,
        error: e.to_string(),
    };
    let loss = LossSpec::new(spec.loss_a).map_err(fail)?;
    let inst = Instance::generate(n, alpha, seed).map_err(fail)?;
    let mut cfg = TrajectoryConfig::defaults_for(n, spec.init_scheme(), seed);
    cfg.eta = spec.eta;
    cfg.steps = rule.steps(n);
    cfg.record_every = (cfg.steps / 200).max(1);
    cfg.dense_prefix = 0;
    cfg.early_exit = true;
    let rec = run_trajectory(&loss, &inst, &cfg).map_err(fail)?;
    let (status, steps_run) = match rec.status {
        RunStatus::Completed => ("completed".to_string(), cfg.steps),
        RunStatus::EarlyExit { step } => ("early-exit".to_string(), step),
        RunStatus::Overflow { step } => {
            return Err(fail(prland_core::Error::NumericalOverflow {
                step,
                context: "trajectory",
            }))
        }
    };
    Ok(CellRecord {
        n,
        alpha,
        seed_index: index,
        seed,
        final_m: rec.final_magnetization(),
        final_loss: *rec.loss.last().unwrap_or(&f64::NAN),
        recovered: rec.recovered,
        status,
        steps_run,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn append_row<T: Serialize>(path: &Path, row: &T) -> CliResult<()> {
    let fresh = !path.exists() || std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    w.serialize(row)?;
    w.flush().map_err(|e| CliError::io(path, e))?;
    w.get_ref().sync_data().map_err(|e| CliError::io(path, e))
}

/// Runs every `(N, alpha, seed)` cell not already recorded in
/// `output_dir/cells.csv`, appending each finished cell as it completes.
/// Writes `recovery.csv` and `failures.csv` at the end.
pub fn run_sweep(spec: &SweepSpec) -> CliResult<SweepOutcome> {
    run_sweep_limited(spec, usize::MAX)
}

/// As [`run_sweep`], stopping after `budget` new cells (for staged runs).
pub fn run_sweep_limited(spec: &SweepSpec, budget: usize) -> CliResult<SweepOutcome> {
    let rule = spec.validate()?;
    let dir = &spec.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let cells_path = dir.join(CELLS_FILE);
    let wanted: HashSet<(usize, u64, usize)> = spec
        .n_list
        .iter()
        .flat_map(|&n| {
            spec.alpha_grid
                .iter()
                .flat_map(move |&a| (0..spec.seeds_per_cell).map(move |i| (n, a.to_bits(), i)))
        })
        .collect();
    let mut cells: Vec<CellRecord> = read_finished_cells(&cells_path)
        .into_iter()
        .filter(|c| {
            wanted.contains(&(c.n, c.alpha.to_bits(), c.seed_index))
                && c.seed == cell_seed(spec.base_seed, c.n, c.alpha, c.seed_index)
        })
        .collect();
    // Drop torn or foreign rows so appends start on a clean line.
    if cells_path.exists() {
        crate::io::write_csv(&cells_path, &cells)?;
    }
    let done: HashSet<(usize, u64, usize)> = cells.iter().map(|c| (c.n, c.alpha.to_bits(), c.seed_index)).collect();
    let mut todo: Vec<(usize, f64, usize)> = Vec::new();
    for &n in &spec.n_list {
        for &a in &spec.alpha_grid {
            for i in 0..spec.seeds_per_cell {
                if !done.contains(&(n, a.to_bits(), i)) {
                    todo.push((n, a, i));
                }
            }
        }
    }
    todo.truncate(budget);
    let ran = todo.len();

    let pool = worker_pool()?;
    let (tx, rx) = mpsc::channel::<Result<CellRecord, CellFailure>>();
    let mut failures = Vec::new();
    let writer_result: CliResult<()> = std::thread::scope(|s| {
        let worker = s.spawn(|| {
            pool.install(|| {
                todo.par_iter().for_each_with(tx, |tx, &(n, a, i)| {
                    let _ = tx.send(run_cell(spec, rule, n, a, i));
                })
            })
        });
        // Sole writer of the cell manifest.
        for res in rx {
            match res {
                Ok(c) => {
                    append_row(&cells_path, &c)?;
                    cells.push(c);
                }
                Err(f) => failures.push(f),
            }
        }
        worker.join().expect("sweep workers panicked");
        Ok(())
    });
    writer_result?;

    cells.sort_by(|a, b| (a.n, a.alpha, a.seed_index).partial_cmp(&(b.n, b.alpha, b.seed_index)).unwrap());
    failures.sort_by(|a, b| (a.n, a.alpha, a.seed_index).partial_cmp(&(b.n, b.alpha, b.seed_index)).unwrap());
    let table = RecoveryTable::from_cells(&cells)?;
    let mut incomplete = Vec::new();
    for &n in &spec.n_list {
        for &a in &spec.alpha_grid {
            let k = cells.iter().filter(|c| c.n == n && c.alpha == a).count();
            if k < spec.seeds_per_cell {
                incomplete.push((n, a));
            }
        }
    }
    crate::io::write_csv(&dir.join(RECOVERY_FILE), &table.rows)?;
    crate::io::write_csv(&dir.join(FAILURES_FILE), &failures)?;
    Ok(SweepOutcome {
        table,
        cells,
        failures,
        incomplete,
        ran,
    })
}

/// Sweep starting every trajectory from a constrained descent of `t_c`
/// steps.
pub fn constrained_sweep(spec: &SweepSpec) -> CliResult<SweepOutcome> {
    if spec.init != InitKind::Constrained {
        return Err(CliError::Numerical(prland_core::Error::InvalidArgument(
            "constrained_sweep needs init = constrained".into(),
        )));
    }
    run_sweep(spec)
}

/// Provenance of one constrained run feeding a pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSource {
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: f64,
    pub eta: f64,
    pub t_c: usize,
}

/// Label pairs pooled over constrained runs at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSamplePool {
    pub loss_a: f64,
    pub alpha: f64,
    #[serde(rename = "N")]
    pub n: usize,
    /// Step index of the snapshot.
    pub step: usize,
    pub pairs: Vec<(f64, f64)>,
    pub provenance: Vec<PoolSource>,
}

impl ThresholdSamplePool {
    pub fn density(&self) -> JointLabelDensity {
        JointLabelDensity::Empirical {
            pairs: self.pairs.clone(),
        }
    }

    /// Threshold ratio of the pooled density; needs at least
    /// `MIN_EMPIRICAL_PAIRS` pairs.
    pub fn bbp_alpha(&self) -> CliResult<f64> {
        Ok(bbp_alpha(&self.density(), Kernel::Curvature(LossSpec::new(self.loss_a)?))?.alpha)
    }
}

/// Runs one constrained descent per seed (instance and start both drawn from
/// the seed) and pools `(y, yhat)` at each requested step.
pub fn sample_threshold_pool(
    loss_a: f64,
    alpha: f64,
    n: usize,
    steps: &[usize],
    seeds: &[u64],
    eta: f64,
) -> CliResult<Vec<ThresholdSamplePool>> {
    let spec = LossSpec::new(loss_a)?;
    if steps.is_empty() || seeds.is_empty() {
        return Err(CliError::Numerical(prland_core::Error::InvalidArgument(
            "need at least one time and one seed".into(),
        )));
    }
    let mut times: Vec<usize> = steps.to_vec();
    times.sort_unstable();
    times.dedup();
    let t_c = *times.last().unwrap();
    let pool = worker_pool()?;
    let per_seed: Vec<CliResult<Vec<Vec<(f64, f64)>>>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let inst = Instance::generate(n, alpha, seed)?;
                let w0 = init_random(n, seed)?;
                let mut snaps = vec![Vec::new(); times.len()];
                let mut err = None;
                constrained_descent(&spec, &inst, &w0, t_c.max(1), eta, |step, w, _| {
                    if let Ok(k) = times.binary_search(&step) {
                        match inst.label_pairs(w) {
                            Ok(p) => snaps[k] = p,
                            Err(e) => err = Some(e),
                        }
                    }
                })?;
                if let Some(e) = err {
                    return Err(e.into());
                }
                Ok(snaps)
            })
            .collect()
    });
    let mut pools: Vec<ThresholdSamplePool> = times
        .iter()
        .map(|&step| ThresholdSamplePool {
            loss_a,
            alpha,
            n,
            step,
            pairs: Vec::new(),
            provenance: Vec::new(),
        })
        .collect();
    for (res, &seed) in per_seed.into_iter().zip(seeds) {
        for (pool, pairs) in pools.iter_mut().zip(res?) {
            pool.pairs.extend(pairs);
            pool.provenance.push(PoolSource {
                seed,
                n,
                alpha,
                eta,
                t_c,
            });
        }
    }
    Ok(pools)
}

/// Least-squares fit `alpha(N) = alpha_inf + c / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub alpha_inf: f64,
    pub c: f64,
    pub alpha_inf_stderr: f64,
    pub r_squared: f64,
    pub rms_residual: f64,
}

pub fn finite_size_extrapolate(values: &[(usize, f64)]) -> CliResult<Extrapolation> {
    let mut ns: Vec<usize> = values.iter().map(|v| v.0).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 3 {
        return Err(CliError::Numerical(prland_core::Error::InvalidArgument(
            "finite-size extrapolation needs at least 3 distinct N".into(),
        )));
    }
    let x: Vec<f64> = values.iter().map(|v| 1.0 / v.0 as f64).collect();
    let y: Vec<f64> = values.iter().map(|v| v.1).collect();
    let fit: LineFit = stats::fit_line(&x, &y)?;
    Ok(Extrapolation {
        alpha_inf: fit.intercept,
        c: fit.slope,
        alpha_inf_stderr: fit.intercept_stderr,
        r_squared: fit.r_squared,
        rms_residual: fit.rms_residual,
    })
}

/// Threshold ratio of pooled constrained runs at each time, in `eta t`
/// units, and the time at which it crosses the sampling ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub loss_a: f64,
    pub alpha: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub points: Vec<PhasePoint>,
    pub t_bbp: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub t: f64,
    pub alpha_bbp: f64,
}

pub fn phase_diagram(
    loss_a: f64,
    alpha: f64,
    n: usize,
    steps: &[usize],
    seeds: &[u64],
    eta: f64,
) -> CliResult<PhaseDiagram> {
    let pools = sample_threshold_pool(loss_a, alpha, n, steps, seeds, eta)?;
    let mut points = Vec::with_capacity(pools.len());
    for p in &pools {
        points.push(PhasePoint {
            t: eta * p.step as f64,
            alpha_bbp: p.bbp_alpha()?,
        });
    }
    let curve: Vec<(f64, f64)> = points.iter().map(|p| (p.t, p.alpha_bbp)).collect();
    Ok(PhaseDiagram {
        loss_a,
        alpha,
        n,
        t_bbp: prland_core::rmt::crossing_time(&curve, alpha),
        points,
    })
}

/// Spectrum of one snapshot next to its random-matrix prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSpectrum {
    pub step: usize,
    pub t: f64,
    pub magnetization: f64,
    /// Shifted Hessian eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub lambda_min: f64,
    pub detached: bool,
    pub overlap_sq: f64,
    /// Predicted bulk density `(lambda, rho)` in shifted Hessian units.
    pub predicted_density: Vec<(f64, f64)>,
    pub predicted_left_edge: f64,
    /// Predicted outlier in shifted Hessian units, if any.
    pub predicted_outlier: Option<f64>,
    /// K-S distance between the bulk eigenvalues and the predicted CDF.
    pub ks: f64,
    /// Overall scale of the spectrum (upper minus lower end).
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionReport {
    pub loss_a: f64,
    pub alpha: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub eta: f64,
    pub times: Vec<usize>,
    pub loss: Vec<f64>,
    pub magnetization: Vec<f64>,
    pub recovered: bool,
    pub final_m: f64,
    pub snapshots: Vec<SnapshotSpectrum>,
}

/// Deterministic prediction for the spectrum at state `w`: the
/// self-consistent bulk of the realized weights `f(y_i, x_i . w)`.
pub fn predict_snapshot(spec: &LossSpec, inst: &Instance, w: &[f64], grid_points: usize) -> CliResult<SnapshotSpectrum> {
    let pairs = inst.label_pairs(w)?;
    let mut f = Vec::with_capacity(pairs.len());
    let mut y2 = Vec::with_capacity(pairs.len());
    for &(y, yh) in &pairs {
        f.push(spec.curvature(y, yh)?);
        y2.push(y * y);
    }
    let ones = vec![1.0; f.len()];
    let measure = SpectralMeasure::from_parts(f, y2, ones)?;
    let alpha = inst.alpha();
    let report = full_spectrum(spec, inst, w)?;
    let mu = report.mu_shift;
    let grid = support_grid(&measure, alpha, grid_points)?;
    let eps = 1e-6 * measure.scale(alpha);
    let bulk = bulk_density_measure(&measure, alpha, &grid, eps)?;
    let (cx, cy) = bulk.cdf();
    let edge_w = bulk.left_edge_lambda;
    let out = outlier_measure(&measure, alpha)?;
    // Ensemble eigenvalue lambda_W = 2 (lambda + mu).
    let ens = report.ensemble_eigenvalues();
    let bulk_vals: &[f64] = if report.outlier_detached { &ens[1..] } else { &ens[..] };
    let ks = stats::ks_distance(bulk_vals, |x| stats::interpolate(&cx, &cy, x))?;
    let to_h = |lw: f64| 0.5 * lw - mu;
    let scale = report.eigenvalues.last().unwrap() - report.eigenvalues[0];
    Ok(SnapshotSpectrum {
        step: 0,
        t: 0.0,
        magnetization: prland_core::dynamics::magnetization(inst, w)?,
        lambda_min: report.lambda_min,
        detached: report.outlier_detached,
        overlap_sq: report.signal_overlap_sq,
        predicted_density: bulk.density.iter().map(|&(l, r)| (to_h(l), 2.0 * r)).collect(),
        predicted_left_edge: to_h(edge_w),
        predicted_outlier: out.exists.then(|| to_h(out.lambda_star)),
        ks,
        scale,
        eigenvalues: report.eigenvalues,
    })
}

/// Runs one random-init trajectory and diagonalizes the Hessian at each
/// snapshot step.
pub fn spectral_evolution_report(
    loss_a: f64,
    alpha: f64,
    n: usize,
    seed: u64,
    snapshot_steps: &[usize],
    eta: f64,
    steps: usize,
) -> CliResult<EvolutionReport> {
    let spec = LossSpec::new(loss_a)?;
    let inst = Instance::generate(n, alpha, seed)?;
    let mut cfg = TrajectoryConfig::defaults_for(n, InitScheme::Random, seed);
    cfg.eta = eta;
    cfg.steps = steps;
    cfg.record_every = (steps / 1000).max(1);
    cfg.dense_prefix = 0;
    cfg.snapshot_times = snapshot_steps.iter().copied().filter(|&t| t <= steps).collect();
    let rec = run_trajectory(&spec, &inst, &cfg)?;
    let pool = worker_pool()?;
    let snapshots: Vec<CliResult<SnapshotSpectrum>> = pool.install(|| {
        rec.snapshots
            .par_iter()
            .map(|(step, w)| {
                let mut s = predict_snapshot(&spec, &inst, w, 800)?;
                s.step = *step;
                s.t = eta * *step as f64;
                Ok(s)
            })
            .collect()
    });
    Ok(EvolutionReport {
        loss_a,
        alpha,
        n,
        seed,
        eta,
        times: rec.times.clone(),
        loss: rec.loss.clone(),
        magnetization: rec.magnetization.clone(),
        recovered: rec.recovered,
        final_m: rec.final_magnetization(),
        snapshots: snapshots.into_iter().collect::<CliResult<_>>()?,
    })
}

/// Loss first drops to a plateau, then falls again: the loss at the
/// midpoint of the record sits well above the final loss, and the early
/// drop is substantial.
pub fn two_phase_profile(loss: &[f64]) -> bool {
    if loss.len() < 10 {
        return false;
    }
    let first = loss[0];
    let last = *loss.last().unwrap();
    let plateau = loss[loss.len() / 10..loss.len() / 2]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    plateau < 0.5 * first && last < 1e-3 * plateau
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelFit {
    pub level: f64,
    /// `(N, alpha at level)` for every curve crossing the level.
    pub points: Vec<(usize, f64)>,
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub r_squared: Option<f64>,
    pub note: Option<String>,
}

/// Inverse-interpolates each size's recovery curve at `levels` and fits
/// `alpha = a + b log N` per level.
pub fn log_scaling_study(table: &RecoveryTable, levels: &[f64]) -> Vec<LevelFit> {
    levels
        .iter()
        .map(|&level| {
            let mut points = Vec::new();
            let mut missing = Vec::new();
            for n in table.sizes() {
                match table.crossing(n, level) {
                    Some(a) => points.push((n, a)),
                    None => missing.push(n),
                }
            }
            let mut note = (!missing.is_empty()).then(|| format!("level outside curve range for N = {missing:?}"));
            let (mut slope, mut se, mut r2) = (None, None, None);
            if points.len() >= 2 {
                let x: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
                let y: Vec<f64> = points.iter().map(|p| p.1).collect();
                match stats::fit_line(&x, &y) {
                    Ok(f) => {
                        slope = Some(f.slope);
                        se = Some(f.slope_stderr);
                        r2 = Some(f.r_squared);
                    }
                    Err(e) => note = Some(e.to_string()),
                }
            } else if note.is_none() {
                note = Some("fewer than two sizes".into());
            }
            LevelFit {
                level,
                points,
                slope,
                slope_stderr: se,
                r_squared: r2,
                note,
            }
        })
        .collect()
}

/// Minimum pool size for threshold estimates.
pub fn pool_is_usable(pool: &ThresholdSamplePool) -> bool {
    pool.pairs.len() >= MIN_EMPIRICAL_PAIRS
}
