//! TOML run configuration. Every section and field is optional; missing
//! values take the defaults below.
//!
//! ```toml
//! [loss]
//! a = 0.01
//!
//! [grid]
//! n = [256, 512]
//! alpha = [3.0, 3.5, 4.0, 4.5]
//! seeds_per_cell = 20
//! base_seed = 1
//!
//! [dynamics]
//! init = "random"            # random | spectral | constrained
//! eta = 2e-4
//! steps = "12000*log2(N)"    # or "<k>*log2(N)" or "fixed:<steps>"
//! t_c = 60000                # constrained phase length
//! record_every = 100
//!
//! [solver]
//! replica_field_points = 2401
//! replica_r0_nodes = 60
//! replica_eta_nodes = 80
//! replica_rel_tol = 1e-5
//! bbp_bracket = [3.0, 6.0]
//!
//! [output]
//! dir = "runs/default"
//! ```

use std::path::{Path, PathBuf};

use prland_core::dynamics::{InitScheme, DEFAULT_CONSTRAINED_STEPS, DEFAULT_ETA, DEFAULT_RECORD_EVERY};
use prland_core::replica::ReplicaQuadrature;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub loss: LossSection,
    pub grid: GridSection,
    pub dynamics: DynamicsSection,
    pub solver: SolverSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n: Vec<usize>,
    pub alpha: Vec<f64>,
    pub seeds_per_cell: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    Random,
    Spectral,
    Constrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsSection {
    pub init: InitKind,
    pub eta: f64,
    pub steps: String,
    pub t_c: usize,
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub replica_field_points: usize,
    pub replica_r0_nodes: usize,
    pub replica_eta_nodes: usize,
    pub replica_rel_tol: f64,
    pub bbp_bracket: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            loss: LossSection { a: 0.01 },
            grid: GridSection::default(),
            dynamics: DynamicsSection::default(),
            solver: SolverSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl Default for LossSection {
    fn default() -> Self {
        LossSection { a: 0.01 }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            n: vec![256, 512],
            alpha: vec![2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0],
            seeds_per_cell: 20,
            base_seed: 1,
        }
    }
}

impl Default for DynamicsSection {
    fn default() -> Self {
        DynamicsSection {
            init: InitKind::Random,
            eta: DEFAULT_ETA,
            steps: StepsRule::default().id(),
            t_c: DEFAULT_CONSTRAINED_STEPS,
            record_every: DEFAULT_RECORD_EVERY,
        }
    }
}

impl Default for SolverSection {
    fn default() -> Self {
        let q = ReplicaQuadrature::default();
        SolverSection {
            replica_field_points: q.field_points,
            replica_r0_nodes: q.r0_nodes,
            replica_eta_nodes: q.eta_nodes,
            replica_rel_tol: q.rel_tol,
            bbp_bracket: [3.0, 6.0],
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("runs/default"),
        }
    }
}

/// Number of descent steps as a function of `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepsRule {
    PerLog2N(f64),
    Fixed(usize),
}

impl Default for StepsRule {
    fn default() -> Self {
        StepsRule::PerLog2N(prland_core::dynamics::STEPS_PER_LOG2_N)
    }
}

impl StepsRule {
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("fixed:") {
            let n: usize = rest.trim().parse().map_err(|_| format!("bad step count in {s:?}"))?;
            if n == 0 {
                return Err("fixed step count must be positive".into());
            }
            return Ok(StepsRule::Fixed(n));
        }
        if let Some(k) = s.strip_suffix("*log2(N)") {
            let k: f64 = k.trim().parse().map_err(|_| format!("bad factor in {s:?}"))?;
            if !(k > 0.0) {
                return Err("steps factor must be positive".into());
            }
            return Ok(StepsRule::PerLog2N(k));
        }
        Err(format!("unknown steps rule {s:?}; use \"<k>*log2(N)\" or \"fixed:<steps>\""))
    }

    pub fn id(&self) -> String {
        match self {
            StepsRule::PerLog2N(k) => format!("{k}*log2(N)"),
            StepsRule::Fixed(n) => format!("fixed:{n}"),
        }
    }

    pub fn steps(&self, n: usize) -> usize {
        match *self {
            StepsRule::PerLog2N(k) => ((k * (n as f64).log2()).round() as usize).max(1),
            StepsRule::Fixed(s) => s,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Self> {
        if !path.exists() {
            return Err(CliError::ConfigNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: Config = toml::from_str(&text).map_err(|e| CliError::ConfigMalformed {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|message| CliError::ConfigMalformed {
            path: path.to_path_buf(),
            message,
        })?;
        Ok(cfg)
    }

    /// Loads `path` if given, otherwise the defaults.
    pub fn load_or_default(path: Option<&Path>) -> CliResult<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Config::default()),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.loss.a > 0.0 && self.loss.a.is_finite()) {
            return Err("loss.a must be positive".into());
        }
        let g = &self.grid;
        if g.n.is_empty() || g.alpha.is_empty() {
            return Err("grid.n and grid.alpha must be non-empty".into());
        }
        if g.n.windows(2).any(|p| p[1] <= p[0]) || g.alpha.windows(2).any(|p| p[1] <= p[0]) {
            return Err("grids must be strictly increasing".into());
        }
        if g.n[0] < 2 || !g.alpha.iter().all(|a| *a > 0.0 && a.is_finite()) {
            return Err("grid values must be positive (N >= 2)".into());
        }
        if g.seeds_per_cell == 0 {
            return Err("grid.seeds_per_cell must be at least 1".into());
        }
        let d = &self.dynamics;
        if !(d.eta > 0.0 && d.eta.is_finite()) || d.t_c == 0 || d.record_every == 0 {
            return Err("dynamics.eta, t_c and record_every must be positive".into());
        }
        StepsRule::parse(&d.steps)?;
        let [lo, hi] = self.solver.bbp_bracket;
        if !(0.0 < lo && lo < hi) {
            return Err("solver.bbp_bracket must be increasing and positive".into());
        }
        Ok(())
    }

    pub fn steps_rule(&self) -> StepsRule {
        StepsRule::parse(&self.dynamics.steps).unwrap_or_default()
    }

    pub fn init_scheme(&self) -> InitScheme {
        match self.dynamics.init {
            InitKind::Random => InitScheme::Random,
            InitKind::Spectral => InitScheme::Spectral,
            InitKind::Constrained => InitScheme::Constrained { t_c: self.dynamics.t_c },
        }
    }

    pub fn quadrature(&self) -> ReplicaQuadrature {
        ReplicaQuadrature {
            field_points: self.solver.replica_field_points,
            r0_nodes: self.solver.replica_r0_nodes,
            eta_nodes: self.solver.replica_eta_nodes,
            rel_tol: self.solver.replica_rel_tol,
            ..ReplicaQuadrature::default()
        }
    }

    /// Canonical serialization used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
