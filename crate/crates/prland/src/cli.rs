//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use prland_core::dynamics::{init_random, run_trajectory, InitScheme, TrajectoryConfig};
use prland_core::model::{Instance, LossSpec};
use prland_core::replica::{self, ThresholdState};
use prland_core::rmt::{
    bbp_alpha, bulk_density, left_edge, outlier, right_edge_measure, support_grid, JointLabelDensity, Kernel,
    LabelAtom, SpectralMeasure,
};
use prland_core::spectrum::{empirical_density, full_spectrum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{Config, InitKind};
use crate::error::{CliError, CliResult};
use crate::harness::{self, SweepSpec};
use crate::io::{read_csv, read_json, save_instance, write_atomic, write_csv, write_json};
use crate::manifest::ManifestBuilder;
use crate::plot::{Chart, Series};

const EXIT_CODES: &str = "\
Exit status:
  0   success
  2   usage error (unknown flag, bad value)
  3   config file not found
  4   malformed config
  5   missing input file
  6   I/O failure
  7   malformed input file
  8   numerical precondition or precision failure
  9   solver did not converge or could not bracket
  10  problem size exceeds a resource limit
Failures also print one JSON object on stderr: {\"error\", \"exit_code\", \"message\"}.
Set PRLAND_WORKERS to cap the worker threads.";

#[derive(Debug, Parser)]
#[command(name = "prland", version, about = "Gradient descent, Hessian spectra and threshold predictions for phase retrieval", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Loss parameter a (overrides loss.a).
    #[arg(long, global = true)]
    pub a: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DensityKind {
    AnalyticInit,
    Replica,
    Pool,
    Constant,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one gradient-descent trajectory.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum)]
        init: Option<InitArg>,
        /// Number of steps (default from the config's steps rule).
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        eta: Option<f64>,
        /// Comma-separated steps at which to store the state.
        #[arg(long, value_delimiter = ',')]
        snapshots: Vec<usize>,
    },
    /// Diagonalize the Hessian at a state.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Instance file written by `simulate`.
        #[arg(long)]
        instance: Option<PathBuf>,
        /// State CSV with a `w` column; a random state otherwise.
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 80)]
        bins: usize,
    },
    /// Predicted bulk density and edges.
    RmtDensity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "analytic-init")]
        density: DensityKind,
        /// Density file for `replica` or `pool`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Weight for `constant`.
        #[arg(long, default_value_t = 1.0)]
        weight: f64,
        #[arg(long, default_value_t = 600)]
        points: usize,
    },
    /// Sample ratio at which the Hessian outlier appears.
    Bbp {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "analytic-init")]
        density: DensityKind,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Solve the threshold-state saddle point; self-consistent threshold
    /// unless --alpha is given.
    ReplicaSolve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Recovery-rate sweep over the config grid (resumable).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        init: Option<InitArg>,
        /// Stop after this many new cells.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Pool label pairs from constrained runs.
    ThresholdSample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        /// Comma-separated step indices.
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<usize>,
        #[arg(long, default_value_t = 4)]
        seeds: usize,
        #[arg(long, default_value_t = 1)]
        base_seed: u64,
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Threshold ratio along constrained descent.
    PhaseDiagram {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<usize>,
        #[arg(long, default_value_t = 4)]
        seeds: usize,
        #[arg(long, default_value_t = 1)]
        base_seed: u64,
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Tables and plots for a finished sweep directory.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        run: PathBuf,
        /// Rate levels for the log-N study.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.25, 0.5, 0.75])]
        levels: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Random,
    Spectral,
    Constrained,
}

impl From<InitArg> for InitKind {
    fn from(v: InitArg) -> Self {
        match v {
            InitArg::Random => InitKind::Random,
            InitArg::Spectral => InitKind::Spectral,
            InitArg::Constrained => InitKind::Constrained,
        }
    }
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Simulate { common, .. }
        | Command::Spectrum { common, .. }
        | Command::RmtDensity { common, .. }
        | Command::Bbp { common, .. }
        | Command::ReplicaSolve { common, .. }
        | Command::Sweep { common, .. }
        | Command::ThresholdSample { common, .. }
        | Command::PhaseDiagram { common, .. }
        | Command::Report { common, .. } => common,
    }
}

fn resolve_config(c: &Common) -> CliResult<Config> {
    let mut cfg = Config::load_or_default(c.config.as_deref())?;
    if let Some(a) = c.a {
        cfg.loss.a = a;
    }
    if let Some(o) = &c.out {
        cfg.output.dir = o.clone();
    }
    cfg.validate().map_err(CliError::Usage)?;
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_svg(path: &Path, chart: &Chart) -> CliResult<()> {
    write_atomic(path, chart.to_svg().as_bytes())
}

/// Parses `argv`, runs the command, and returns the process exit status.
/// Results go to stdout as JSON, failures to stderr.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let err = CliError::Usage(e.to_string().lines().next().unwrap_or("usage error").to_string());
            eprintln!("{}", e.render());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match run(cli.command) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

/// Runs one command; the returned JSON summarizes the result.
pub fn run(cmd: Command) -> CliResult<serde_json::Value> {
    let cfg = resolve_config(common(&cmd))?;
    match cmd {
        Command::Simulate {
            n,
            alpha,
            seed,
            init,
            steps,
            eta,
            snapshots,
            ..
        } => simulate(&cfg, n, alpha, seed, init, steps, eta, &snapshots),
        Command::Spectrum {
            instance,
            state,
            n,
            alpha,
            seed,
            bins,
            ..
        } => spectrum_cmd(&cfg, instance, state, n, alpha, seed, bins),
        Command::RmtDensity {
            alpha,
            density,
            input,
            weight,
            points,
            ..
        } => rmt_density(&cfg, alpha, density, input.as_deref(), weight, points),
        Command::Bbp { density, input, .. } => bbp_cmd(&cfg, density, input.as_deref()),
        Command::ReplicaSolve { alpha, .. } => replica_solve(&cfg, alpha),
        Command::Sweep { init, budget, .. } => sweep_cmd(cfg, init, budget),
        Command::ThresholdSample {
            n,
            alpha,
            times,
            seeds,
            base_seed,
            eta,
            ..
        } => threshold_sample(&cfg, n, alpha, &times, seeds, base_seed, eta),
        Command::PhaseDiagram {
            n,
            alpha,
            times,
            seeds,
            base_seed,
            eta,
            ..
        } => phase_diagram_cmd(&cfg, n, alpha, &times, seeds, base_seed, eta),
        Command::Report { run, levels, .. } => report(&run, &levels),
    }
}

#[derive(Serialize)]
struct TrajRow {
    step: usize,
    t: f64,
    m: f64,
    loss: f64,
}

#[derive(Serialize, Deserialize)]
struct StateRow {
    w: f64,
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    cfg: &Config,
    n: usize,
    alpha: f64,
    seed: u64,
    init: Option<InitArg>,
    steps: Option<usize>,
    eta: Option<f64>,
    snapshots: &[usize],
) -> CliResult<serde_json::Value> {
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    let spec = LossSpec::new(cfg.loss.a)?;
    let inst = Instance::generate(n, alpha, seed)?;
    let init_kind = init.map(InitKind::from).unwrap_or(cfg.dynamics.init);
    let scheme = match init_kind {
        InitKind::Random => InitScheme::Random,
        InitKind::Spectral => InitScheme::Spectral,
        InitKind::Constrained => InitScheme::Constrained { t_c: cfg.dynamics.t_c },
    };
    let mut tc = TrajectoryConfig::defaults_for(n, scheme, seed);
    tc.eta = eta.unwrap_or(cfg.dynamics.eta);
    tc.steps = steps.unwrap_or_else(|| cfg.steps_rule().steps(n));
    tc.record_every = cfg.dynamics.record_every;
    tc.snapshot_times = snapshots.to_vec();
    let rec = run_trajectory(&spec, &inst, &tc)?;
    save_instance(&dir.join("instance.bin"), &inst)?;
    let rows: Vec<TrajRow> = rec
        .times
        .iter()
        .zip(&rec.magnetization)
        .zip(&rec.loss)
        .map(|((&step, &m), &loss)| TrajRow {
            step,
            t: tc.eta * step as f64,
            m,
            loss,
        })
        .collect();
    write_csv(&dir.join("trajectory.csv"), &rows)?;
    let state: Vec<StateRow> = rec.final_state.iter().map(|&w| StateRow { w }).collect();
    write_csv(&dir.join("final_state.csv"), &state)?;
    for (step, w) in &rec.snapshots {
        let s: Vec<StateRow> = w.iter().map(|&w| StateRow { w }).collect();
        write_csv(&dir.join(format!("state_{step}.csv")), &s)?;
    }
    let mut loss_chart = Chart::new("Loss per variable", "eta t", "L / N");
    loss_chart.log_y = true;
    loss_chart.series.push(Series::new("loss", rows.iter().map(|r| (r.t, r.loss)).collect()));
    write_svg(&dir.join("loss.svg"), &loss_chart)?;
    let mut m_chart = Chart::new("Magnetization", "eta t", "m");
    m_chart.series.push(Series::new("m(t)", rows.iter().map(|r| (r.t, r.m)).collect()));
    write_svg(&dir.join("magnetization.svg"), &m_chart)?;
    let summary = json!({
        "N": n, "alpha": alpha, "seed": seed, "init": init_kind, "steps": tc.steps, "eta": tc.eta,
        "final_m": rec.final_magnetization(), "recovered": rec.recovered,
        "status": format!("{:?}", rec.status), "final_loss": rec.loss.last(),
    });
    let mut mb = ManifestBuilder::new("simulate", cfg);
    mb.seeds([seed]).details(summary.clone());
    for o in ["instance.bin", "trajectory.csv", "final_state.csv", "loss.svg", "magnetization.svg"] {
        mb.output(o);
    }
    for (step, _) in &rec.snapshots {
        mb.output(format!("state_{step}.csv"));
    }
    mb.write(dir)?;
    Ok(summary)
}

#[derive(Serialize)]
struct LambdaRow {
    lambda: f64,
}

#[derive(Serialize, Deserialize)]
struct DensityRow {
    lambda: f64,
    rho: f64,
}

fn spectrum_cmd(
    cfg: &Config,
    instance: Option<PathBuf>,
    state: Option<PathBuf>,
    n: Option<usize>,
    alpha: Option<f64>,
    seed: u64,
    bins: usize,
) -> CliResult<serde_json::Value> {
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    let spec = LossSpec::new(cfg.loss.a)?;
    let inst = match (instance, n, alpha) {
        (Some(p), _, _) => crate::io::load_instance(&p)?,
        (None, Some(n), Some(a)) => Instance::generate(n, a, seed)?,
        _ => return Err(CliError::Usage("spectrum needs --instance or both --n and --alpha".into())),
    };
    let w = match state {
        Some(p) => {
            let rows: Vec<StateRow> = read_csv(&p)?;
            rows.into_iter().map(|r| r.w).collect()
        }
        None => init_random(inst.n(), seed)?,
    };
    let report = full_spectrum(&spec, &inst, &w)?;
    let rows: Vec<LambdaRow> = report.eigenvalues.iter().map(|&lambda| LambdaRow { lambda }).collect();
    write_csv(&dir.join("spectrum.csv"), &rows)?;
    let hist = empirical_density(&report.eigenvalues, bins)?;
    let mut chart = Chart::new("Hessian spectrum", "lambda", "density");
    chart.bars = Some((hist.edges.clone(), hist.density.clone()));
    chart.markers.push((report.lambda_min, "lambda_1".into()));
    write_svg(&dir.join("spectrum.svg"), &chart)?;
    let summary = json!({
        "N": inst.n(), "M": inst.m(), "lambda_min": report.lambda_min, "overlap_sq": report.signal_overlap_sq,
        "mu_shift": report.mu_shift, "outlier_detached": report.outlier_detached,
        "bulk_left_estimate": report.bulk_left_estimate,
    });
    let mut mb = ManifestBuilder::new("spectrum", cfg);
    mb.seeds([inst.seed()])
        .output("spectrum.csv")
        .output("spectrum.svg")
        .details(summary.clone());
    mb.write(dir)?;
    Ok(summary)
}

#[derive(Serialize, Deserialize)]
struct AtomRow {
    y: f64,
    yhat: f64,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
struct PairRow {
    y: f64,
    yhat: f64,
}

pub const REPLICA_DENSITY_FILE: &str = "replica_density.csv";
pub const REPLICA_STATE_FILE: &str = "replica_state.json";

fn load_density(cfg: &Config, kind: DensityKind, input: Option<&Path>) -> CliResult<JointLabelDensity> {
    let need = |what: &str| CliError::Usage(format!("--density {what} needs --input"));
    Ok(match kind {
        DensityKind::AnalyticInit | DensityKind::Constant => JointLabelDensity::analytic_init(cfg.loss.a),
        DensityKind::Replica => {
            let p = input.ok_or_else(|| need("replica"))?;
            let path = if p.is_dir() { p.join(REPLICA_DENSITY_FILE) } else { p.to_path_buf() };
            let rows: Vec<AtomRow> = read_csv(&path)?;
            let state_path = path.with_file_name(REPLICA_STATE_FILE);
            let (chi, z, q0) = match read_json::<serde_json::Value>(&state_path) {
                Ok(v) => (
                    v["chi"].as_f64().unwrap_or(f64::NAN),
                    v["z"].as_f64().unwrap_or(f64::NAN),
                    v["q0"].as_f64().unwrap_or(f64::NAN),
                ),
                Err(_) => (f64::NAN, f64::NAN, f64::NAN),
            };
            JointLabelDensity::Replica1Rsb {
                atoms: rows
                    .into_iter()
                    .map(|r| LabelAtom {
                        y: r.y,
                        yhat: r.yhat,
                        weight: r.weight,
                    })
                    .collect(),
                chi,
                z,
                q0,
            }
        }
        DensityKind::Pool => {
            let p = input.ok_or_else(|| need("pool"))?;
            let rows: Vec<PairRow> = read_csv(p)?;
            JointLabelDensity::Empirical {
                pairs: rows.into_iter().map(|r| (r.y, r.yhat)).collect(),
            }
        }
    })
}

fn rmt_density(
    cfg: &Config,
    alpha: f64,
    kind: DensityKind,
    input: Option<&Path>,
    weight: f64,
    points: usize,
) -> CliResult<serde_json::Value> {
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    let density = load_density(cfg, kind, input)?;
    let kernel = if kind == DensityKind::Constant {
        Kernel::Constant(weight)
    } else {
        Kernel::Curvature(LossSpec::new(cfg.loss.a)?)
    };
    let m = SpectralMeasure::new(&density, kernel)?;
    let grid = support_grid(&m, alpha, points)?;
    let bulk = bulk_density(&density, kernel, alpha, &grid, 1e-6 * m.scale(alpha))?;
    let edge = left_edge(&density, kernel, alpha)?;
    let right = right_edge_measure(&m, alpha).ok();
    let out = outlier(&density, kernel, alpha)?;
    let rows: Vec<DensityRow> = bulk.density.iter().map(|&(lambda, rho)| DensityRow { lambda, rho }).collect();
    write_csv(&dir.join("density.csv"), &rows)?;
    let mut chart = Chart::new(&format!("Bulk density, alpha = {alpha}"), "lambda (ensemble units)", "rho");
    chart.series.push(Series::new("prediction", rows.iter().map(|r| (r.lambda, r.rho)).collect()));
    chart.markers.push((edge.lambda_minus, "left edge".into()));
    if out.exists {
        chart.markers.push((out.lambda_star, "outlier".into()));
    }
    write_svg(&dir.join("density.svg"), &chart)?;
    let summary = json!({
        "alpha": alpha, "left_edge": edge.lambda_minus, "right_edge": right, "mass": bulk.mass(),
        "outlier": out.exists.then_some(out.lambda_star),
        "overlap_sq": out.overlap_sq, "units": "eigenvalues of sum_i f_i x_i x_i^T",
    });
    let mut mb = ManifestBuilder::new("rmt-density", cfg);
    mb.output("density.csv").output("density.svg").details(summary.clone());
    mb.write(dir)?;
    Ok(summary)
}

fn bbp_cmd(cfg: &Config, kind: DensityKind, input: Option<&Path>) -> CliResult<serde_json::Value> {
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    if kind == DensityKind::Constant {
        return Err(CliError::Usage("a constant weight has no outlier; pick another density".into()));
    }
    let density = load_density(cfg, kind, input)?;
    let spec = LossSpec::new(cfg.loss.a)?;
    let r = bbp_alpha(&density, Kernel::Curvature(spec))?;
    let summary = json!({
        "a": cfg.loss.a, "density": format!("{kind:?}"), "alpha_bbp": r.alpha,
        "lambda_star": r.lambda_star, "lambda_minus": r.lambda_minus,
        "bracket": [r.bracket.0, r.bracket.1], "iterations": r.iterations, "atoms": r.measure_atoms,
        "input": input.map(|p| p.display().to_string()),
    });
    write_json(&dir.join("bbp.json"), &summary)?;
    let mut mb = ManifestBuilder::new("bbp", cfg);
    mb.output("bbp.json").details(summary.clone());
    mb.write(dir)?;
    Ok(summary)
}

fn state_json(st: &ThresholdState, spec: &LossSpec) -> CliResult<serde_json::Value> {
    let marginality = replica::shifted_left_edge(spec, st.alpha, &st.evaluation.atoms)?;
    Ok(json!({
        "alpha": st.alpha, "chi": st.params.chi, "z": st.params.z, "q0": st.params.q0,
        "residual_chi": st.residuals[0], "residual_q0": st.residuals[1], "marginality": marginality,
        "converged": st.converged, "iterations": st.iterations,
        "free_energy": st.evaluation.free_energy, "free_energy_error": st.evaluation.error_estimate(),
        "atoms": st.evaluation.atoms.len(),
    }))
}

fn replica_solve(cfg: &Config, alpha: Option<f64>) -> CliResult<serde_json::Value> {
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    let spec = LossSpec::new(cfg.loss.a)?;
    let quad = cfg.quadrature();
    let (state, mut summary) = match alpha {
        Some(a) => {
            let st = replica::solve_threshold_state(&spec, a, quad)?;
            let s = state_json(&st, &spec)?;
            (st, s)
        }
        None => {
            let [lo, hi] = cfg.solver.bbp_bracket;
            let t = replica::threshold_bbp(&spec, quad, (lo, hi))?;
            let mut s = state_json(&t.state, &spec)?;
            s["self_consistent_alpha_bbp"] = json!(t.alpha);
            s["threshold_evaluations"] = json!(t.evaluations);
            (t.state, s)
        }
    };
    if !state.converged {
        return Err(CliError::Numerical(prland_core::Error::Convergence {
            solver: "threshold state",
            iterations: state.iterations,
            residual: state.max_residual(),
        }));
    }
    summary["a"] = json!(cfg.loss.a);
    summary["quadrature"] = json!({
        "r0_nodes": quad.r0_nodes, "eta_nodes": quad.eta_nodes, "field_points": quad.field_points,
        "field_cutoff": quad.field_cutoff, "rel_tol": quad.rel_tol,
    });
    let rows: Vec<AtomRow> = state
        .evaluation
        .atoms
        .iter()
        .map(|a| AtomRow {
            y: a.y,
            yhat: a.yhat,
            weight: a.weight,
        })
        .collect();
    write_csv(&dir.join(REPLICA_DENSITY_FILE), &rows)?;
    write_json(&dir.join(REPLICA_STATE_FILE), &summary)?;
    let mut mb = ManifestBuilder::new("replica-solve", cfg);
    mb.output(REPLICA_DENSITY_FILE)
        .output(REPLICA_STATE_FILE)
        .details(summary.clone());
    mb.write(dir)?;
    Ok(summary)
}

fn sweep_cmd(mut cfg: Config, init: Option<InitArg>, budget: Option<usize>) -> CliResult<serde_json::Value> {
    if let Some(i) = init {
        cfg.dynamics.init = i.into();
    }
    let spec = SweepSpec::from_config(&cfg);
    let out = harness::run_sweep_limited(&spec, budget.unwrap_or(usize::MAX))?;
    let dir = &spec.output_dir;
    write_json(&dir.join("sweep_spec.json"), &spec)?;
    let summary = json!({
        "cells_finished": out.cells.len(), "cells_run_now": out.ran, "failures": out.failures.len(),
        "incomplete": out.incomplete.len(), "rows": out.table.rows,
    });
    let seeds: Vec<u64> = out.cells.iter().map(|c| c.seed).collect();
    let mut mb = ManifestBuilder::new("sweep", &cfg);
    mb.seeds(seeds)
        .output(harness::CELLS_FILE)
        .output(harness::RECOVERY_FILE)
        .output(harness::FAILURES_FILE)
        .output("sweep_spec.json")
        .details(json!({"incomplete": out.incomplete, "failures": out.failures.len()}));
    mb.write(dir)?;
    Ok(summary)
}

fn seeds_from(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}

fn threshold_sample(
    cfg: &Config,
    n: usize,
    alpha: f64,
    times: &[usize],
    seeds: usize,
    base_seed: u64,
    eta: Option<f64>,
) -> CliResult<serde_json::Value> {
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    let seed_list = seeds_from(base_seed, seeds);
    let eta = eta.unwrap_or(cfg.dynamics.eta);
    let pools = harness::sample_threshold_pool(cfg.loss.a, alpha, n, times, &seed_list, eta)?;
    let mut mb = ManifestBuilder::new("threshold-sample", cfg);
    mb.seeds(seed_list.iter().copied());
    let mut entries = Vec::new();
    for p in &pools {
        let name = format!("pool_{}.csv", p.step);
        let rows: Vec<PairRow> = p.pairs.iter().map(|&(y, yhat)| PairRow { y, yhat }).collect();
        write_csv(&dir.join(&name), &rows)?;
        mb.output(name.clone());
        let bbp = if harness::pool_is_usable(p) {
            p.bbp_alpha().ok()
        } else {
            None
        };
        entries.push(json!({"step": p.step, "t": eta * p.step as f64, "pairs": p.pairs.len(), "file": name, "alpha_bbp": bbp}));
    }
    let summary = json!({"a": cfg.loss.a, "alpha": alpha, "N": n, "eta": eta, "pools": entries});
    write_json(&dir.join("pools.json"), &summary)?;
    mb.output("pools.json").details(summary.clone());
    mb.write(dir)?;
    Ok(summary)
}

#[allow(clippy::too_many_arguments)]
fn phase_diagram_cmd(
    cfg: &Config,
    n: usize,
    alpha: f64,
    times: &[usize],
    seeds: usize,
    base_seed: u64,
    eta: Option<f64>,
) -> CliResult<serde_json::Value> {
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    let seed_list = seeds_from(base_seed, seeds);
    let eta = eta.unwrap_or(cfg.dynamics.eta);
    let pd = harness::phase_diagram(cfg.loss.a, alpha, n, times, &seed_list, eta)?;
    write_csv(&dir.join("phase_diagram.csv"), &pd.points)?;
    let mut chart = Chart::new("Threshold ratio along descent", "eta t", "alpha_BBP");
    chart
        .series
        .push(Series::new("alpha_BBP(t)", pd.points.iter().map(|p| (p.t, p.alpha_bbp)).collect()));
    let span = (pd.points.first().map(|p| p.t).unwrap_or(0.0), pd.points.last().map(|p| p.t).unwrap_or(1.0));
    chart
        .series
        .push(Series::new("sampling alpha", vec![(span.0, alpha), (span.1, alpha)]).dashed());
    if let Some(t) = pd.t_bbp {
        chart.markers.push((t, "t_BBP".into()));
    }
    write_svg(&dir.join("phase_diagram.svg"), &chart)?;
    let summary = serde_json::to_value(&pd).map_err(|e| CliError::Format(e.to_string()))?;
    let mut mb = ManifestBuilder::new("phase-diagram", cfg);
    mb.seeds(seed_list)
        .output("phase_diagram.csv")
        .output("phase_diagram.svg")
        .details(json!({"t_bbp": pd.t_bbp}));
    mb.write(dir)?;
    Ok(summary)
}

#[derive(Serialize)]
struct CrossingRow {
    #[serde(rename = "N")]
    n: usize,
    alpha_50: Option<f64>,
}

#[derive(Serialize)]
struct LevelRow {
    level: f64,
    #[serde(rename = "N")]
    n: usize,
    alpha_at_level: f64,
    slope: Option<f64>,
    r_squared: Option<f64>,
}

/// Rebuilds every table and plot of a sweep directory from `cells.csv`.
/// Running it twice produces identical files.
pub fn report(run: &Path, levels: &[f64]) -> CliResult<serde_json::Value> {
    let cells_path = run.join(harness::CELLS_FILE);
    let cells: Vec<harness::CellRecord> = read_csv(&cells_path)?;
    let mut cells = cells;
    cells.sort_by(|a, b| (a.n, a.alpha, a.seed_index).partial_cmp(&(b.n, b.alpha, b.seed_index)).unwrap());
    let table = harness::RecoveryTable::from_cells(&cells)?;
    write_csv(&run.join(harness::RECOVERY_FILE), &table.rows)?;
    let crossings: Vec<CrossingRow> = table
        .sizes()
        .into_iter()
        .map(|n| CrossingRow {
            n,
            alpha_50: table.crossing(n, 0.5),
        })
        .collect();
    write_csv(&run.join("crossings.csv"), &crossings)?;
    let fits = harness::log_scaling_study(&table, levels);
    let level_rows: Vec<LevelRow> = fits
        .iter()
        .flat_map(|f| {
            f.points.iter().map(move |&(n, a)| LevelRow {
                level: f.level,
                n,
                alpha_at_level: a,
                slope: f.slope,
                r_squared: f.r_squared,
            })
        })
        .collect();
    write_csv(&run.join("log_scaling.csv"), &level_rows)?;
    let mut chart = Chart::new("Strong recovery rate", "alpha", "rate");
    for n in table.sizes() {
        let rows = table.curve(n);
        chart
            .series
            .push(Series::new(format!("N = {n}"), rows.iter().map(|r| (r.alpha, r.rate)).collect()));
    }
    write_svg(&run.join("recovery.svg"), &chart)?;
    let summary = json!({
        "run": run.display().to_string(), "rows": table.rows.len(),
        "crossings": crossings.iter().map(|c| json!({"N": c.n, "alpha_50": c.alpha_50})).collect::<Vec<_>>(),
        "log_scaling": fits, "monotone_within_ci": table.monotone_within_ci(),
    });
    write_json(&run.join("report.json"), &summary)?;
    Ok(summary)
}
