//! Run configuration read from TOML.
//!
//! ```toml
//! [model]
//! epsilon = 0.01
//! n = 2.0
//!
//! [grid]
//! x_left = 0.0
//! x_right = 1.0
//! n_cells = 512
//!
//! [solver]
//! t_end = 1e-3
//!
//! [initial]
//! kind = "parabola"
//! a = 0.4
//! b = 0.6
//! mass = 1.0
//!
//! [outputs]
//! directory = "out"
//! record_every = 1e-5
//! ```
//!
//! Omitted keys take the defaults below; unknown keys are rejected. The
//! resolved configuration, defaults included, is written next to the outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{GridSpec, RunSpec};
use crate::mobility::{ModelParams, RegularizationParams};
use crate::quasistatic::{DropletSet, QsConfig};
use crate::solver::{InitialConditionSpec, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub t_end: f64,
    #[serde(default = "defaults::dt_init")]
    pub dt_init: f64,
    #[serde(default = "defaults::dt_min")]
    pub dt_min: f64,
    #[serde(default = "defaults::dt_max")]
    pub dt_max: f64,
    #[serde(default = "defaults::newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "defaults::newton_max_iter")]
    pub newton_max_iter: u32,
    #[serde(default = "defaults::undershoot_tol")]
    pub undershoot_tol: f64,
    /// Positivity regularization; omitted means `1e-12 · max(u_in)³`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "defaults::directory")]
    pub directory: PathBuf,
    pub record_every: f64,
    #[serde(default = "defaults::emit_snapshots")]
    pub emit_snapshots: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasistaticSection {
    /// Initial intervals; defaults to the droplet of `[initial]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_mass: Option<f64>,
    pub t_end: f64,
    pub record_every: f64,
    #[serde(default = "defaults::qs_dt_init")]
    pub dt_init: f64,
    #[serde(default = "defaults::qs_dt_max")]
    pub dt_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merge_gap: Option<f64>,
    #[serde(default = "defaults::rel_step")]
    pub rel_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub epsilons: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub grid: GridSpec,
    pub solver: SolverSection,
    pub initial: InitialConditionSpec,
    pub outputs: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quasistatic: Option<QuasistaticSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

mod defaults {
    use std::path::PathBuf;

    pub fn dt_init() -> f64 {
        1e-12
    }
    pub fn dt_min() -> f64 {
        1e-14
    }
    pub fn dt_max() -> f64 {
        1e-4
    }
    pub fn newton_tol() -> f64 {
        1e-10
    }
    pub fn newton_max_iter() -> u32 {
        25
    }
    pub fn undershoot_tol() -> f64 {
        1e-10
    }
    pub fn directory() -> PathBuf {
        PathBuf::from("out")
    }
    pub fn emit_snapshots() -> bool {
        true
    }
    pub fn qs_dt_init() -> f64 {
        1e-6
    }
    pub fn qs_dt_max() -> f64 {
        f64::MAX
    }
    pub fn rel_step() -> f64 {
        1e-2
    }
}

impl RunConfig {
    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            params: self.model,
            reg: s.delta.map(|delta| RegularizationParams { delta }),
            dt_init: s.dt_init,
            dt_min: s.dt_min,
            dt_max: s.dt_max,
            newton_tol: s.newton_tol,
            newton_max_iter: s.newton_max_iter,
            t_end: s.t_end,
            record_every: self.outputs.record_every,
            undershoot_tol: s.undershoot_tol,
        }
    }

    pub fn run_spec(&self) -> RunSpec {
        RunSpec {
            grid: self.grid,
            solver: self.solver_config(),
            initial: self.initial.clone(),
        }
    }

    pub fn qs_config(&self) -> Result<QsConfig> {
        let q = self.quasistatic_section()?;
        Ok(QsConfig {
            dt_init: q.dt_init,
            dt_max: q.dt_max,
            merge_gap: q.merge_gap,
            t_end: q.t_end,
            record_every: q.record_every,
            rel_step: q.rel_step,
        })
    }

    /// Initial droplets of the quasi-static run.
    pub fn droplets(&self) -> Result<DropletSet> {
        let q = self.quasistatic_section()?;
        let grid = self.grid.build()?;
        let domain = (self.grid.x_left, self.grid.x_right);
        match (&q.intervals, &q.gammas) {
            (Some(iv), Some(g)) => {
                let mass = q
                    .total_mass
                    .unwrap_or_else(|| self.initial.droplet_mass(&grid));
                DropletSet::new(iv.clone(), g.clone(), mass, domain)
            }
            (None, None) => crate::experiments::droplets_for(&self.initial, &grid),
            _ => Err(Error::Config(
                "[quasistatic] needs both intervals and gammas, or neither".into(),
            )),
        }
    }

    fn quasistatic_section(&self) -> Result<&QuasistaticSection> {
        self.quasistatic
            .as_ref()
            .ok_or_else(|| Error::Config("missing [quasistatic] section".into()))
    }

    pub fn sweep_section(&self) -> Result<&SweepSection> {
        self.sweep
            .as_ref()
            .ok_or_else(|| Error::Config("missing [sweep] section".into()))
    }

    /// Checks every section against the invariants of the modules it feeds.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.build().map_err(config_error)?;
        self.solver_config().validate().map_err(config_error)?;
        crate::solver::initial_condition(&self.initial, &grid).map_err(config_error)?;
        if self.outputs.directory.as_os_str().is_empty() {
            return Err(Error::Config("outputs.directory must not be empty".into()));
        }
        if self.quasistatic.is_some() {
            self.qs_config()?.validate().map_err(config_error)?;
            self.droplets().map_err(config_error)?;
        }
        if let Some(s) = &self.sweep {
            if s.epsilons.is_empty() {
                return Err(Error::Config("sweep.epsilons must not be empty".into()));
            }
            for &e in &s.epsilons {
                ModelParams::new(e, self.model.n()).map_err(config_error)?;
            }
            if s.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(Error::Config("sweep.epsilons must be decreasing".into()));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Invalid(msg) => Error::Config(msg),
        other => other,
    }
}

/// Parses and validates a TOML configuration.
pub fn parse_config_str(text: &str, path: &Path) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path)
}
