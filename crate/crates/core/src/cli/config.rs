//! Case files: one TOML document describing the model, the mesh, and the
//! settings of the transient run and of the travelling-wave solve.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::ModelParams;
use crate::pde::{initial_condition, GridSpec, InitialData, OutputSchedule, RunConfig, StepperConfig};
use crate::travelling::RelaxationConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub ic: Option<InitialData>,
    pub stepper: Option<StepperConfig>,
    pub t_end: Option<f64>,
    pub output: Option<OutputSchedule>,
    /// Directory for `pde` output; `--out` takes precedence.
    pub out_dir: Option<PathBuf>,
    pub tw: Option<TwSection>,
}

/// Travelling-wave settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwSection {
    /// Mass of `H^2 - 1`; defaults to the exact mass of `[ic]` on the grid.
    pub mass: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Explicit phase condition; both or neither.
    pub pin_index: Option<usize>,
    pub pin_value: Option<f64>,
    #[serde(default)]
    pub guess: GuessSpec,
    /// Profile CSV path; `--out` takes precedence.
    pub out: Option<PathBuf>,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    50
}

impl Default for TwSection {
    fn default() -> Self {
        Self {
            mass: None,
            tol: default_tol(),
            max_iter: default_max_iter(),
            pin_index: None,
            pin_value: None,
            guess: GuessSpec::default(),
            out: None,
        }
    }
}

/// Where the Newton iteration starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GuessSpec {
    /// Coarse transient relaxation of a sinusoidal film.
    Relaxation {
        #[serde(flatten)]
        settings: RelaxationConfig,
    },
    CosineBump {
        amplitude: f64,
    },
    /// A profile CSV in the `tw_profile.csv` format.
    File {
        path: PathBuf,
    },
}

impl Default for GuessSpec {
    fn default() -> Self {
        GuessSpec::Relaxation {
            settings: RelaxationConfig::default(),
        }
    }
}

impl CaseFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(message) => Error::Config(format!("{}: {message}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let case: CaseFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        case.params
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        case.grid().map_err(|e| Error::Config(e.to_string()))?;
        Ok(case)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.length, self.grid.nodes)
    }

    /// The transient run described by the file, with every default filled in.
    pub fn run_config(&self) -> Result<RunConfig> {
        let missing = |what: &str| Error::Config(format!("the pde command needs `{what}`"));
        let config = RunConfig {
            params: self.params,
            grid: self.grid,
            stepper: self.stepper.ok_or_else(|| missing("[stepper]"))?,
            t_end: self.t_end.ok_or_else(|| missing("t_end"))?,
            output: self.output.clone().ok_or_else(|| missing("[output]"))?,
            ic: self.ic.ok_or_else(|| missing("[ic]"))?,
        };
        config
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(config)
    }

    pub fn tw_section(&self) -> Result<TwSection> {
        let tw = self.tw.clone().unwrap_or_default();
        if tw.pin_index.is_some() != tw.pin_value.is_some() {
            return Err(Error::Config(
                "tw.pin_index and tw.pin_value must be given together".into(),
            ));
        }
        if !(tw.tol > 0.0) || tw.max_iter == 0 {
            return Err(Error::Config(
                "tw.tol must be positive and tw.max_iter at least 1".into(),
            ));
        }
        if let Some(mass) = tw.mass {
            if !(mass.is_finite() && mass > 0.0) {
                return Err(Error::Config(format!("tw.mass must be positive, got {mass}")));
            }
        }
        Ok(tw)
    }

    /// Mass for the travelling-wave solve: `tw.mass`, else the exact mass of
    /// the initial condition on the grid.
    pub fn tw_mass(&self) -> Result<f64> {
        if let Some(mass) = self.tw_section()?.mass {
            return Ok(mass);
        }
        let ic = self.ic.ok_or_else(|| {
            Error::Config("the tw command needs `tw.mass` or an `[ic]` section".into())
        })?;
        let state = initial_condition(self.grid()?, ic.h0, ic.amplitude, &self.params)
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(state.mass())
    }
}
