use serde::{Deserialize, Serialize};

use super::InitialGuess;
use crate::diagnostics::{locate_peak, track::fit_speed_window};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{mobility_g, ModelParams};
use crate::pde::{FieldState, Stepper, StepperConfig};

/// Coarse transient relaxation used to produce a travelling-wave guess: a
/// sinusoidal film of the requested mass is integrated with a large implicit
/// step until the peak-aligned profile stops changing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxationConfig {
    pub dt: f64,
    pub amplitude: f64,
    /// Time between shape comparisons.
    pub chunk: f64,
    /// Largest change of the aligned profile between chunks accepted as
    /// settled.
    pub shape_tol: f64,
    pub t_max: f64,
    /// Newton tolerance of the relaxation steps. Looser than the transient
    /// default so fine grids stay above the roundoff floor of the residual.
    pub newton_tol: f64,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            amplitude: 0.1,
            chunk: 20.0,
            shape_tol: 1e-3,
            t_max: 4000.0,
            newton_tol: 1e-8,
        }
    }
}

fn aligned_change(a: &FieldState, b: &FieldState) -> Option<f64> {
    let pa = locate_peak(&a.h)?;
    let pb = locate_peak(&b.h)?;
    Some(b.h.translate(pa.x - pb.x).max_abs_diff(&a.h))
}

/// Relax a sinusoidal film of mass `mass` towards its travelling wave and
/// return the final state with its tracked speed.
pub fn relaxation_guess(
    grid: Grid,
    mass: f64,
    params: &ModelParams,
    cfg: &RelaxationConfig,
) -> Result<InitialGuess> {
    let mean_sq = mass / grid.length() + 1.0;
    let h0_sq = mean_sq - 0.5 * cfg.amplitude * cfg.amplitude;
    if !(h0_sq.sqrt() - cfg.amplitude > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "mass {mass} is too small for a relaxation start of amplitude {}",
            cfg.amplitude
        )));
    }
    let k = 2.0 * std::f64::consts::PI / grid.length();
    let h = grid.sample(|x| h0_sq.sqrt() + cfg.amplitude * (k * x).sin());
    let mut u = h.clone();
    for value in u.values_mut() {
        *value = mobility_g(*value, params)?;
    }
    let mut state = FieldState::new(0.0, h, u)?;
    let stepper_cfg = StepperConfig {
        newton_tol: cfg.newton_tol,
        ..StepperConfig::with_dt(cfg.dt)
    };
    let mut stepper = Stepper::new(grid, stepper_cfg, *params)?;
    let steps_per_chunk = (cfg.chunk / cfg.dt).round().max(1.0) as usize;
    let sample_every = (steps_per_chunk / 20).max(1);
    let mut previous = state.clone();
    let mut peaks = Vec::new();
    while state.t < cfg.t_max {
        peaks.clear();
        for step in 0..steps_per_chunk {
            state = stepper.step(&state, cfg.dt)?.0;
            if step % sample_every == 0 || step + 1 == steps_per_chunk {
                if let Some(p) = locate_peak(&state.h) {
                    peaks.push((state.t, p.x));
                }
            }
        }
        let settled = aligned_change(&previous, &state).is_some_and(|d| d < cfg.shape_tol);
        if settled {
            break;
        }
        previous = state.clone();
    }
    // large steps damp the instability that forms the wave
    if state.h.max() - state.h.min() < 1e-3 * state.h.max() {
        return Err(Error::InvalidParameter(format!(
            "relaxation decayed to a flat film by t = {}; reduce the relaxation step",
            state.t
        )));
    }
    let speed = fit_speed_window(&peaks, grid.length(), 1.0).ok_or_else(|| {
        Error::InvalidParameter("relaxed film has no trackable peak".into())
    })?;
    Ok(InitialGuess::FromTrajectory { state, speed })
}
