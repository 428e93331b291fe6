//! Run configuration: one TOML file per run with sections `[method]`,
//! `[initial_condition]`, `[grid]` and `[run]`. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use mcflow::bench::{IcKind, InitialCondition};
use mcflow::levelset::stability_bound;
use mcflow::minimize::MultilevelSchedule;
use mcflow::schemes::SchemeId;
use mcflow::{Functional, GridSpec, StepParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Default stationarity / residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    /// The previous time level.
    #[default]
    Previous,
    /// `1 - u0` for the first step, the previous time level afterwards.
    Adversarial,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    LevelSet,
    Scheme {
        scheme: SchemeId,
    },
    Minimize {
        functional: Functional,
        #[serde(default, skip_serializing_if = "is_default")]
        delta: f64,
        #[serde(default, skip_serializing_if = "is_default")]
        initial_guess: InitialGuess,
    },
    Multilevel {
        /// `[h, eps]` pairs from coarse to fine.
        levels: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "is_default")]
        initial_guess: InitialGuess,
    },
}

impl MethodConfig {
    /// Short label such as `scheme:fis` or `minimize:penalized`.
    pub fn label(&self) -> String {
        match self {
            MethodConfig::LevelSet => "level_set".into(),
            MethodConfig::Scheme { scheme } => format!("scheme:{}", scheme.as_str()),
            MethodConfig::Minimize { functional, .. } => format!("minimize:{}", functional.as_str()),
            MethodConfig::Multilevel { .. } => "multilevel".into(),
        }
    }

    pub fn delta(&self) -> f64 {
        match self {
            MethodConfig::Minimize { delta, .. } => *delta,
            _ => 0.0,
        }
    }
}

/// Uniform grid on `[-0.5, 0.5]²`, given by cell count or spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec, CliError> {
        let unit = GridSpec::unit_box(1).expect("unit box is valid");
        match (self.n, self.h) {
            (Some(n), None) => Ok(GridSpec::unit_box(n)?),
            (None, Some(h)) => Ok(unit.with_spacing(h)?),
            _ => Err(CliError::Config("[grid] needs exactly one of `n` or `h`".into())),
        }
    }
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_true() -> bool {
    true
}

fn is_true(v: &bool) -> bool {
    *v
}

fn is_default_tol(v: &f64) -> bool {
    *v == DEFAULT_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Interaction length; unused by the level-set method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub k: f64,
    pub t_end: f64,
    #[serde(default = "default_tol", skip_serializing_if = "is_default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshot_times: Vec<f64>,
    pub output_dir: PathBuf,
    /// Time between component counts; every step when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology_interval: Option<f64>,
    /// Stop at the first count of zero interface components.
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub stop_on_vanish: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub method: MethodConfig,
    pub initial_condition: InitialCondition,
    pub grid: GridConfig,
    pub run: RunSection,
}

impl RunConfig {
    /// Parses and validates a configuration.
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    /// Name used for output subdirectories and table rows.
    pub fn display_name(&self) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => self
                .run
                .output_dir
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into()),
        }
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        self.grid.spec()
    }

    /// Step parameters of the phase-field methods.
    pub fn step_params(&self) -> Result<StepParams, CliError> {
        let eps = self.run.eps.ok_or_else(|| CliError::Config("[run] eps is required".into()))?;
        let (functional, delta) = match &self.method {
            MethodConfig::Minimize { functional, delta, .. } => (*functional, *delta),
            _ => (Functional::Plain, 0.0),
        };
        Ok(StepParams::new(eps, self.run.k, delta, functional)?)
    }

    pub fn schedule(&self) -> Result<Option<MultilevelSchedule>, CliError> {
        match &self.method {
            MethodConfig::Multilevel { levels, .. } => {
                let pairs: Vec<(f64, f64)> = levels.iter().map(|l| (l[0], l[1])).collect();
                Ok(Some(MultilevelSchedule::from_pairs(&pairs)?))
            }
            _ => Ok(None),
        }
    }

    pub fn initial_guess(&self) -> InitialGuess {
        match &self.method {
            MethodConfig::Minimize { initial_guess, .. } | MethodConfig::Multilevel { initial_guess, .. } => {
                *initial_guess
            }
            _ => InitialGuess::Previous,
        }
    }

    /// Replaces the seed of a random initial condition.
    pub fn override_seed(&mut self, seed: u64) -> Result<(), CliError> {
        match &mut self.initial_condition.kind {
            IcKind::Random { seed: s, .. } => {
                *s = seed;
                Ok(())
            }
            _ => Err(CliError::Config("--seed-override needs a random initial condition".into())),
        }
    }

    /// Checks every solver precondition that can be decided before running.
    pub fn validate(&self) -> Result<(), CliError> {
        self.validate_inner().map_err(|e| match e {
            CliError::Solver(s) => CliError::Config(s.to_string()),
            other => other,
        })
    }

    fn validate_inner(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let grid = self.grid_spec()?;
        let r = &self.run;
        if !(r.k > 0.0 && r.k.is_finite()) {
            return bad(format!("[run] k must be positive, got {}", r.k));
        }
        if !(r.t_end > 0.0 && r.t_end.is_finite()) {
            return bad(format!("[run] t_end must be positive, got {}", r.t_end));
        }
        if !(r.tol > 0.0) {
            return bad(format!("[run] tol must be positive, got {}", r.tol));
        }
        if let Some(s) = r.snapshot_times.iter().find(|&&s| !(s >= 0.0 && s <= r.t_end)) {
            return bad(format!("snapshot time {s} outside [0, {}]", r.t_end));
        }
        if let Some(dt) = r.topology_interval {
            if !(dt > 0.0) {
                return bad(format!("[run] topology_interval must be positive, got {dt}"));
            }
        }
        self.initial_condition.validate()?;
        self.initial_condition.check_geometry(&grid)?;

        match &self.method {
            MethodConfig::LevelSet => {
                if grid.n() < 2 {
                    return bad("the level-set method needs n >= 2".into());
                }
                let bound = stability_bound(&grid);
                if r.k > bound * (1.0 + 1e-12) {
                    return bad(format!("level-set step k = {} exceeds h²/4 = {bound}", r.k));
                }
            }
            MethodConfig::Scheme { .. } => {
                self.step_params()?;
            }
            MethodConfig::Minimize { functional, delta, .. } => {
                if *functional == Functional::Plain && *delta != 0.0 {
                    return bad("the plain functional takes no delta".into());
                }
                self.step_params()?;
            }
            MethodConfig::Multilevel { .. } => {
                let p = self.step_params()?;
                let schedule = self.schedule()?.expect("multilevel method has a schedule");
                let last = schedule.target();
                if grid.with_spacing(last.h)? != grid {
                    return bad(format!("last level h = {} does not match the grid (h = {})", last.h, grid.h()));
                }
                if (last.eps - p.eps).abs() > 1e-12 * p.eps {
                    return bad(format!("last level eps = {} differs from [run] eps = {}", last.eps, p.eps));
                }
                let grids = schedule.grids(&grid)?;
                if grids.windows(2).any(|w| w[1].n() <= w[0].n()) {
                    return bad("level grids must get strictly finer".into());
                }
            }
        }
        Ok(())
    }
}
