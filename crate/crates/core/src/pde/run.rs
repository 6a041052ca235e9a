use serde::{Deserialize, Serialize};

use super::{FieldState, Stepper, StepperConfig};
use crate::diagnostics::{DiagnosticsSample, Monitor};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{mobility_g, ModelParams};

/// Sinusoidal initial radius `h0 + amplitude sin(2 pi x / L)` with the
/// velocity in drag balance, `u = g(h)`.
pub fn initial_condition(
    grid: Grid,
    h0: f64,
    amplitude: f64,
    params: &ModelParams,
) -> Result<FieldState> {
    if !(h0 - amplitude.abs() > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "initial film touches the fibre: h0 - |amplitude| = {} <= 1",
            h0 - amplitude.abs()
        )));
    }
    let k = 2.0 * std::f64::consts::PI / grid.length();
    let h = grid.sample(|x| h0 + amplitude * (k * x).sin());
    let mut u = h.clone();
    for value in u.values_mut() {
        *value = mobility_g(*value, params)?;
    }
    FieldState::new(0.0, h, u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub h0: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_amplitude() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub length: f64,
    pub nodes: usize,
}

/// Times at which snapshots and diagnostics are recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OutputSchedule {
    Times { times: Vec<f64> },
    Every { every: f64 },
}

impl OutputSchedule {
    /// Resolved output times in `[0, t_end]`. `Every` always includes both
    /// endpoints.
    pub fn resolve(&self, t_end: f64) -> Result<Vec<f64>> {
        match self {
            OutputSchedule::Times { times } => {
                if times.iter().any(|t| !(t.is_finite() && *t >= 0.0 && *t <= t_end)) {
                    return Err(Error::Config(format!(
                        "output times must lie in [0, {t_end}]"
                    )));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config(
                        "output times must be strictly increasing".into(),
                    ));
                }
                Ok(times.clone())
            }
            OutputSchedule::Every { every } => {
                if !(every.is_finite() && *every > 0.0) {
                    return Err(Error::Config(format!(
                        "output interval must be positive, got {every}"
                    )));
                }
                let count = (t_end / every * (1.0 + 1e-12)).floor() as usize;
                let mut times: Vec<f64> = (0..=count).map(|k| k as f64 * every).collect();
                if t_end - times[count] > 1e-9 * every {
                    times.push(t_end);
                } else {
                    times[count] = t_end;
                }
                Ok(times)
            }
        }
    }
}

/// Everything needed to reproduce a transient run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub stepper: StepperConfig,
    pub t_end: f64,
    pub output: OutputSchedule,
    pub ic: InitialData,
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.length, self.grid.nodes)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.grid()?;
        self.stepper.validate()?;
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::Config(format!(
                "t_end must be non-negative, got {}",
                self.t_end
            )));
        }
        self.output.resolve(self.t_end)?;
        if !(self.ic.h0 - self.ic.amplitude.abs() > 1.0) {
            return Err(Error::Config(format!(
                "initial film touches the fibre: h0 = {}, amplitude = {}",
                self.ic.h0, self.ic.amplitude
            )));
        }
        Ok(())
    }
}

/// Why a run stopped before `t_end`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    /// Time of the last accepted state.
    pub t: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub snapshots: Vec<FieldState>,
    pub diagnostics: Vec<DiagnosticsSample>,
    pub failure: Option<RunFailure>,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

pub fn run(config: &RunConfig) -> Result<Trajectory> {
    let mut trajectory = Trajectory::default();
    let failure = run_with(config, |state, sample| {
        trajectory.snapshots.push(state.clone());
        trajectory.diagnostics.push(sample.clone());
        Ok(())
    })?;
    trajectory.failure = failure;
    Ok(trajectory)
}

/// Run the configured experiment, handing each output snapshot and its
/// diagnostics to `observer` as soon as it is available. Configuration and
/// observer errors are returned as `Err`; a solver failure ends the run early
/// and is returned as `Ok(Some(failure))`.
pub fn run_with(
    config: &RunConfig,
    mut observer: impl FnMut(&FieldState, &DiagnosticsSample) -> Result<()>,
) -> Result<Option<RunFailure>> {
    config.validate()?;
    let grid = config.grid()?;
    let times = config.output.resolve(config.t_end)?;
    if times.is_empty() {
        return Ok(None);
    }
    let params = config.params;
    let mut state = initial_condition(grid, config.ic.h0, config.ic.amplitude, &params)?;
    let mut monitor = Monitor::new(&state, &params)?;
    let mut stepper = Stepper::new(grid, config.stepper, params)?;
    let dt = config.stepper.dt;

    for &target in &times {
        while state.t < target {
            let remaining = target - state.t;
            // absorb a sliver below 1e-6 dt into the current step
            let h = if remaining <= dt * (1.0 + 1e-6) { remaining } else { dt };
            match stepper.step(&state, h) {
                Ok((next, _)) => state = next,
                Err(err) => {
                    return Ok(Some(RunFailure {
                        t: state.t,
                        message: err.to_string(),
                    }))
                }
            }
            if target - state.t <= 1e-9 * dt {
                state.t = target;
            }
        }
        let sample = match monitor.record(&state) {
            Ok(sample) => sample,
            Err(err) => {
                return Ok(Some(RunFailure {
                    t: state.t,
                    message: err.to_string(),
                }))
            }
        };
        observer(&state, &sample)?;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FlowProfile;

    fn config(t_end: f64, output: OutputSchedule) -> RunConfig {
        RunConfig {
            params: ModelParams::new(0.2, 10.0, 1.0, FlowProfile::Plug),
            grid: GridSpec {
                length: 20.0,
                nodes: 64,
            },
            stepper: StepperConfig::with_dt(0.05),
            t_end,
            output,
            ic: InitialData {
                h0: 2.29,
                amplitude: 0.1,
            },
        }
    }

    #[test]
    fn initial_condition_is_in_drag_balance() {
        let grid = Grid::new(20.0, 400).unwrap();
        let params = ModelParams::new(0.2, 10.0, 1.0, FlowProfile::Plug);
        let state = initial_condition(grid, 2.29, 0.1, &params).unwrap();
        for i in 0..400 {
            assert_eq!(state.u[i], state.h[i] * state.h[i] - 1.0);
        }
        assert!((state.mass() - 84.982).abs() < 1e-10);
        let flat = initial_condition(grid, 2.29, 0.0, &params).unwrap();
        assert!(flat.h.values().iter().all(|&h| h == 2.29));
        assert!(initial_condition(grid, 1.05, 0.1, &params).is_err());
    }

    #[test]
    fn every_schedule_lands_on_end() {
        let times = OutputSchedule::Every { every: 0.3 }.resolve(1.0).unwrap();
        assert_eq!(times.len(), 5);
        assert!((times[3] - 0.9).abs() < 1e-15);
        assert_eq!(*times.last().unwrap(), 1.0);
        let times = OutputSchedule::Every { every: 0.25 }.resolve(1.0).unwrap();
        assert_eq!(times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(
            OutputSchedule::Every { every: 1.0 }.resolve(0.0).unwrap(),
            vec![0.0]
        );
        assert!(OutputSchedule::Times {
            times: vec![0.5, 0.2]
        }
        .resolve(1.0)
        .is_err());
    }

    #[test]
    fn run_hits_output_times_and_conserves_mass() {
        let cfg = config(1.0, OutputSchedule::Times {
            times: vec![0.0, 0.33, 1.0],
        });
        let traj = run(&cfg).unwrap();
        assert!(traj.is_complete());
        let t: Vec<f64> = traj.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(t, vec![0.0, 0.33, 1.0]);
        let m0 = traj.diagnostics[0].mass;
        for sample in &traj.diagnostics {
            assert!(((sample.mass - m0) / m0).abs() < 1e-10);
        }
    }

    #[test]
    fn empty_schedule_gives_empty_trajectory() {
        let traj = run(&config(1.0, OutputSchedule::Times { times: vec![] })).unwrap();
        assert!(traj.snapshots.is_empty());
        assert!(traj.is_complete());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut cfg = config(1.0, OutputSchedule::Every { every: 0.5 });
        cfg.stepper.dt = -1.0;
        assert!(run(&cfg).is_err());
        let mut cfg = config(1.0, OutputSchedule::Every { every: 0.5 });
        cfg.ic.h0 = 1.05;
        assert!(run(&cfg).is_err());
    }
}
