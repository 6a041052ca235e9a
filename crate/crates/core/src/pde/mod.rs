//! Fully implicit transient solver for the coupled radius/velocity system
//!
//! ```text
//! u_t + a (u^2/2)_x + b kappa_x = c (v u_x)_x / v + 1 - u / g(h)
//! v_t + a (u v)_x = 0,          v = h^2 - 1
//! ```
//!
//! on a periodic domain. The stored unknowns are `(h, u)`; the mass equation
//! is discretised in conservative form so that `dx * sum(v)` telescopes and is
//! conserved to the Newton tolerance. Each step solves a `2N` Newton system
//! with interleaved unknowns `(h_0, u_0, h_1, u_1, ...)`.

pub mod operator;
mod run;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, PeriodicBandLu, PeriodicBandMatrix, PeriodicField};
use crate::model::{mobility_g, ModelParams};
use operator::Var;

pub use run::{
    initial_condition, run, run_with, GridSpec, InitialData, OutputSchedule, RunConfig, RunFailure,
    Trajectory,
};

/// Film radius and mean axial velocity at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub h: PeriodicField,
    pub u: PeriodicField,
}

impl FieldState {
    pub fn new(t: f64, h: PeriodicField, u: PeriodicField) -> Result<Self> {
        if h.grid() != u.grid() {
            return Err(Error::InvalidParameter(
                "radius and velocity live on different grids".into(),
            ));
        }
        Ok(Self { t, h, u })
    }

    /// Uniform film `(h0, g(h0))`, a steady state of the system.
    pub fn uniform(grid: Grid, h0: f64, params: &ModelParams) -> Result<Self> {
        let u0 = mobility_g(h0, params)?;
        Ok(Self {
            t: 0.0,
            h: grid.constant(h0),
            u: grid.constant(u0),
        })
    }

    pub fn grid(&self) -> &Grid {
        self.h.grid()
    }

    /// Cross-sectional area `v = h^2 - 1`.
    pub fn v(&self) -> PeriodicField {
        self.h.map(|h| h * h - 1.0)
    }

    /// Conserved mass `integral of v`.
    pub fn mass(&self) -> f64 {
        self.v().integrate()
    }

    pub fn check(&self, v_floor: f64) -> Result<()> {
        operator::check_admissible(self.h.values(), v_floor)
    }

    /// Circular shift of both fields by `k` nodes.
    pub fn shift(&self, k: isize) -> Self {
        Self {
            t: self.t,
            h: self.h.shift(k),
            u: self.u.shift(k),
        }
    }

    /// Unknowns in solver order `(h_0, u_0, h_1, u_1, ...)`.
    pub fn interleave(&self) -> Vec<f64> {
        self.h
            .values()
            .iter()
            .zip(self.u.values())
            .flat_map(|(&h, &u)| [h, u])
            .collect()
    }

    /// Inverse of [`FieldState::interleave`]; `x` must have length `2N`.
    pub fn from_interleaved(t: f64, grid: Grid, x: &[f64]) -> Self {
        let h = x.iter().step_by(2).copied().collect();
        let u = x.iter().skip(1).step_by(2).copied().collect();
        Self {
            t,
            h: PeriodicField::new(grid, h).expect("length matches grid"),
            u: PeriodicField::new(grid, u).expect("length matches grid"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    Analytic,
    FiniteDifference,
}

/// Time discretisation. Both are implicit; the mass update stays
/// conservative for either.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    BackwardEuler,
    CrankNicolson,
}

impl TimeScheme {
    fn theta(self) -> f64 {
        match self {
            TimeScheme::BackwardEuler => 1.0,
            TimeScheme::CrankNicolson => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperConfig {
    pub dt: f64,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max_iter")]
    pub newton_max_iter: usize,
    #[serde(default = "default_jacobian_mode")]
    pub jacobian_mode: JacobianMode,
    #[serde(default = "default_scheme")]
    pub scheme: TimeScheme,
    /// Smallest admissible `v = h^2 - 1`.
    #[serde(default = "default_v_floor")]
    pub v_floor: f64,
}

fn default_newton_tol() -> f64 {
    1e-10
}

fn default_newton_max_iter() -> usize {
    25
}

fn default_jacobian_mode() -> JacobianMode {
    JacobianMode::Analytic
}

fn default_scheme() -> TimeScheme {
    TimeScheme::BackwardEuler
}

fn default_v_floor() -> f64 {
    1e-10
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            newton_tol: default_newton_tol(),
            newton_max_iter: default_newton_max_iter(),
            jacobian_mode: default_jacobian_mode(),
            scheme: default_scheme(),
            v_floor: default_v_floor(),
        }
    }
}

impl StepperConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "newton_tol must be positive, got {}",
                self.newton_tol
            )));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::InvalidParameter("newton_max_iter must be at least 1".into()));
        }
        if !(self.v_floor >= 0.0) {
            return Err(Error::InvalidParameter("v_floor must be non-negative".into()));
        }
        Ok(())
    }
}

// Backtracking halvings per Newton iteration.
const MAX_HALVINGS: usize = 8;
// Half bandwidth of the interleaved Jacobian: momentum row 2i reaches h_{i+-3}.
const BAND_HALF_WIDTH: usize = 2 * operator::STENCIL_RADIUS;

/// Old-level contribution to a theta-scheme residual.
struct OldLevel {
    h: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    momentum: Vec<f64>,
    flux: Vec<f64>,
}

impl OldLevel {
    fn new(state: &FieldState, params: &ModelParams, theta: f64) -> Result<Self> {
        let n = state.h.len();
        let dx = state.grid().dx();
        let mut momentum = vec![0.0; n];
        let mut flux = vec![0.0; n];
        if theta < 1.0 {
            operator::momentum(state.h.values(), state.u.values(), dx, params, &mut momentum)?;
            operator::flux_divergence(state.h.values(), state.u.values(), dx, params.a, &mut flux);
        }
        Ok(Self {
            h: state.h.values().to_vec(),
            u: state.u.values().to_vec(),
            v: state.v().into_values(),
            momentum,
            flux,
        })
    }
}

/// Residual of one implicit step for the interleaved unknown vector `x`.
fn residual_interleaved(
    x: &[f64],
    old: &OldLevel,
    dx: f64,
    dt: f64,
    theta: f64,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    let n = old.h.len();
    let h: Vec<f64> = x.iter().step_by(2).copied().collect();
    let u: Vec<f64> = x.iter().skip(1).step_by(2).copied().collect();
    let mut momentum = vec![0.0; n];
    let mut flux = vec![0.0; n];
    operator::momentum(&h, &u, dx, params, &mut momentum)?;
    operator::flux_divergence(&h, &u, dx, params.a, &mut flux);
    let mut r = vec![0.0; 2 * n];
    for i in 0..n {
        let v = h[i] * h[i] - 1.0;
        r[2 * i] = (u[i] - old.u[i]) / dt + theta * momentum[i] + (1.0 - theta) * old.momentum[i];
        r[2 * i + 1] = (v - old.v[i]) / dt + theta * flux[i] + (1.0 - theta) * old.flux[i];
    }
    Ok(r)
}

#[inline]
fn column(var: Var, node: usize) -> usize {
    match var {
        Var::H => 2 * node,
        Var::U => 2 * node + 1,
    }
}

fn analytic_jacobian(
    x: &[f64],
    dx: f64,
    dt: f64,
    theta: f64,
    params: &ModelParams,
    jac: &mut PeriodicBandMatrix,
) -> Result<()> {
    jac.clear();
    let n = x.len() / 2;
    let h: Vec<f64> = x.iter().step_by(2).copied().collect();
    let u: Vec<f64> = x.iter().skip(1).step_by(2).copied().collect();
    operator::momentum_jacobian(&h, &u, dx, params, |row, var, node, value| {
        jac.add(2 * row, column(var, node), theta * value)
    })?;
    operator::flux_divergence_jacobian(&h, &u, dx, params.a, |row, var, node, value| {
        jac.add(2 * row + 1, column(var, node), theta * value)
    });
    for i in 0..n {
        jac.add(2 * i, 2 * i + 1, 1.0 / dt);
        jac.add(2 * i + 1, 2 * i, 2.0 * h[i] / dt);
    }
    Ok(())
}

/// Column-coloured central-difference Jacobian of a periodic band residual.
fn finite_difference_jacobian(
    x: &[f64],
    residual: impl Fn(&[f64]) -> Result<Vec<f64>>,
    jac: &mut PeriodicBandMatrix,
) -> Result<()> {
    jac.clear();
    let n = x.len();
    let w = jac.half_width();
    // columns of one colour are at least 2w + 1 apart cyclically
    let colours = (2 * w + 1..=n).find(|c| n % c == 0).unwrap_or(n);
    let mut probe = x.to_vec();
    for colour in 0..colours {
        let cols: Vec<usize> = (colour..n).step_by(colours).collect();
        let steps: Vec<f64> = cols.iter().map(|&j| 1e-6 * (1.0 + x[j].abs())).collect();
        for (&j, &s) in cols.iter().zip(&steps) {
            probe[j] = x[j] + s;
        }
        let plus = residual(&probe)?;
        for (&j, &s) in cols.iter().zip(&steps) {
            probe[j] = x[j] - s;
        }
        let minus = residual(&probe)?;
        for &j in &cols {
            probe[j] = x[j];
        }
        for (&j, &s) in cols.iter().zip(&steps) {
            for off in -(w as isize)..=(w as isize) {
                let i = (j as isize + off).rem_euclid(n as isize) as usize;
                let d = (plus[i] - minus[i]) / (2.0 * s);
                if d != 0.0 {
                    jac.add(i, j, d);
                }
            }
        }
    }
    Ok(())
}

fn max_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Residual of one implicit step from `state_old` to `state_new`, interleaved
/// as `(momentum_0, mass_0, momentum_1, mass_1, ...)`; length `2N`.
pub fn residual(
    state_new: &FieldState,
    state_old: &FieldState,
    dt: f64,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    residual_with_scheme(state_new, state_old, dt, TimeScheme::BackwardEuler, params)
}

pub fn residual_with_scheme(
    state_new: &FieldState,
    state_old: &FieldState,
    dt: f64,
    scheme: TimeScheme,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    state_new.check(0.0)?;
    let theta = scheme.theta();
    let old = OldLevel::new(state_old, params, theta)?;
    residual_interleaved(
        &state_new.interleave(),
        &old,
        state_new.grid().dx(),
        dt,
        theta,
        params,
    )
}

/// Jacobian of [`residual`] with respect to the interleaved new-level
/// unknowns, as a dense matrix (for inspection and testing).
pub fn jacobian(
    state_new: &FieldState,
    dt: f64,
    mode: JacobianMode,
    params: &ModelParams,
) -> Result<crate::grid::DenseMatrix> {
    let n = state_new.h.len();
    let dx = state_new.grid().dx();
    let x = state_new.interleave();
    let mut jac = PeriodicBandMatrix::zeros(2 * n, BAND_HALF_WIDTH.min(n - 1));
    match mode {
        JacobianMode::Analytic => analytic_jacobian(&x, dx, dt, 1.0, params, &mut jac)?,
        JacobianMode::FiniteDifference => {
            let old = OldLevel::new(state_new, params, 1.0)?;
            finite_difference_jacobian(
                &x,
                |y| residual_interleaved(y, &old, dx, dt, 1.0, params),
                &mut jac,
            )?
        }
    }
    Ok(jac.to_dense())
}

/// Outcome of a converged step.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub iterations: usize,
    pub residual: f64,
}

/// Advance `state` by `cfg.dt`.
pub fn step(state: &FieldState, cfg: &StepperConfig, params: &ModelParams) -> Result<FieldState> {
    Stepper::new(*state.grid(), *cfg, *params)?
        .step(state, cfg.dt)
        .map(|(next, _)| next)
}

/// Reusable stepper holding the Jacobian workspace.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    cfg: StepperConfig,
    params: ModelParams,
    jac: PeriodicBandMatrix,
}

impl Stepper {
    pub fn new(grid: Grid, cfg: StepperConfig, params: ModelParams) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        let n = 2 * grid.len();
        Ok(Self {
            grid,
            cfg,
            params,
            jac: PeriodicBandMatrix::zeros(n, BAND_HALF_WIDTH.min((n - 1) / 2)),
        })
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    /// Advance by `dt` (which may differ from the configured step, e.g. to
    /// land on an output time).
    pub fn step(&mut self, state: &FieldState, dt: f64) -> Result<(FieldState, StepReport)> {
        state.check(self.cfg.v_floor)?;
        let theta = self.cfg.scheme.theta();
        let dx = self.grid.dx();
        let params = self.params;
        let old = OldLevel::new(state, &params, theta)?;
        let eval = |y: &[f64]| residual_interleaved(y, &old, dx, dt, theta, &params);

        let mut x = state.interleave();
        let mut r = eval(&x)?;
        let mut norm = max_norm(&r);
        for iteration in 0..self.cfg.newton_max_iter {
            if norm <= self.cfg.newton_tol {
                return Ok((
                    FieldState::from_interleaved(state.t + dt, self.grid, &x),
                    StepReport {
                        iterations: iteration,
                        residual: norm,
                    },
                ));
            }
            match self.cfg.jacobian_mode {
                JacobianMode::Analytic => {
                    analytic_jacobian(&x, dx, dt, theta, &params, &mut self.jac)?
                }
                JacobianMode::FiniteDifference => {
                    finite_difference_jacobian(&x, &eval, &mut self.jac)?
                }
            }
            let delta = PeriodicBandLu::factor(&self.jac)?.solve(&r);
            let (trial, trial_r, trial_norm) = self.line_search(&x, &delta, norm, &eval)?;
            x = trial;
            r = trial_r;
            norm = trial_norm;
        }
        if norm <= self.cfg.newton_tol {
            return Ok((
                FieldState::from_interleaved(state.t + dt, self.grid, &x),
                StepReport {
                    iterations: self.cfg.newton_max_iter,
                    residual: norm,
                },
            ));
        }
        Err(Error::NewtonFailed {
            residual: norm,
            iterations: self.cfg.newton_max_iter,
        })
    }

    fn line_search(
        &self,
        x: &[f64],
        delta: &[f64],
        norm: f64,
        eval: impl Fn(&[f64]) -> Result<Vec<f64>>,
    ) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let mut lambda = 1.0;
        let mut last = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(delta).map(|(a, d)| a - lambda * d).collect();
            let admissible = trial
                .iter()
                .step_by(2)
                .all(|&h| h * h - 1.0 > self.cfg.v_floor);
            if admissible {
                let r = eval(&trial)?;
                let trial_norm = max_norm(&r);
                if trial_norm < norm {
                    return Ok((trial, r, trial_norm));
                }
                last = Some((trial, r, trial_norm));
            }
            lambda *= 0.5;
        }
        match last {
            Some(accepted) => Ok(accepted),
            None => {
                let node = (0..x.len() / 2)
                    .find(|&i| {
                        let h = x[2 * i] - lambda * 2.0 * delta[2 * i];
                        h * h - 1.0 <= self.cfg.v_floor
                    })
                    .unwrap_or(0);
                Err(Error::Degenerate {
                    node,
                    h: x[2 * node] - lambda * 2.0 * delta[2 * node],
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FlowProfile;
    use std::f64::consts::PI;

    fn plug() -> ModelParams {
        ModelParams::new(0.2, 10.0, 1.0, FlowProfile::Plug)
    }

    fn wavy(grid: Grid, params: &ModelParams) -> FieldState {
        let h = grid.sample(|x| 2.29 + 0.1 * (2.0 * PI * x / grid.length()).sin());
        let u = h.map(|h| mobility_g(h, params).unwrap() + 0.05 * h);
        FieldState::new(0.0, h, u).unwrap()
    }

    #[test]
    fn uniform_state_has_zero_residual() {
        let grid = Grid::new(20.0, 32).unwrap();
        for profile in [FlowProfile::Plug, FlowProfile::Laminar] {
            let params = ModelParams::new(0.2, 10.0, 1.0, profile);
            let state = FieldState::uniform(grid, 2.29, &params).unwrap();
            for dt in [1e-3, 1.0, 1e6] {
                let r = residual(&state, &state, dt, &params).unwrap();
                assert!(max_norm(&r) < 1e-13);
            }
        }
    }

    #[test]
    fn frozen_state_gives_spatial_operator() {
        let grid = Grid::new(20.0, 32).unwrap();
        let params = plug();
        let state = wavy(grid, &params);
        let r = residual(&state, &state, 1.0, &params).unwrap();
        let mut momentum = vec![0.0; 32];
        let mut flux = vec![0.0; 32];
        operator::momentum(state.h.values(), state.u.values(), grid.dx(), &params, &mut momentum)
            .unwrap();
        operator::flux_divergence(state.h.values(), state.u.values(), grid.dx(), 0.2, &mut flux);
        for i in 0..32 {
            assert_eq!(r[2 * i], momentum[i]);
            assert_eq!(r[2 * i + 1], flux[i]);
        }
    }

    #[test]
    fn degenerate_state_is_rejected() {
        let grid = Grid::new(20.0, 16).unwrap();
        let params = plug();
        let mut state = FieldState::uniform(grid, 2.0, &params).unwrap();
        state.h[3] = 0.99;
        assert!(matches!(
            residual(&state, &state, 0.1, &params),
            Err(Error::Degenerate { node: 3, .. })
        ));
        assert!(matches!(
            step(&state, &StepperConfig::with_dt(0.1), &params),
            Err(Error::Degenerate { node: 3, .. })
        ));
    }

    #[test]
    fn step_conserves_mass_and_converges() {
        let grid = Grid::new(20.0, 64).unwrap();
        let params = plug();
        let cfg = StepperConfig::with_dt(0.05);
        let mut stepper = Stepper::new(grid, cfg, params).unwrap();
        let mut state = wavy(grid, &params);
        let m0 = state.mass();
        for _ in 0..20 {
            let (next, report) = stepper.step(&state, cfg.dt).unwrap();
            assert!(report.residual <= cfg.newton_tol);
            state = next;
        }
        // each step may leave dt * L * newton_tol behind
        assert!((state.mass() - m0).abs() < 20.0 * 0.05 * 20.0 * cfg.newton_tol);
        assert!((state.t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn finite_difference_mode_tracks_analytic_mode() {
        let grid = Grid::new(20.0, 40).unwrap();
        let params = ModelParams::new(0.1, 11.0, 4.0, FlowProfile::Laminar);
        let state = wavy(grid, &params);
        let analytic = StepperConfig::with_dt(0.05);
        let fd = StepperConfig {
            jacobian_mode: JacobianMode::FiniteDifference,
            ..analytic
        };
        let a = step(&state, &analytic, &params).unwrap();
        let b = step(&state, &fd, &params).unwrap();
        assert!(a.h.max_abs_diff(&b.h) < 1e-9);
        assert!(a.u.max_abs_diff(&b.u) < 1e-9);
    }

    #[test]
    fn crank_nicolson_is_available() {
        let grid = Grid::new(20.0, 32).unwrap();
        let params = plug();
        let cfg = StepperConfig {
            scheme: TimeScheme::CrankNicolson,
            ..StepperConfig::with_dt(0.05)
        };
        let state = wavy(grid, &params);
        let next = step(&state, &cfg, &params).unwrap();
        let r = residual_with_scheme(&next, &state, 0.05, TimeScheme::CrankNicolson, &params)
            .unwrap();
        assert!(max_norm(&r) <= cfg.newton_tol);
        assert!(((next.mass() - state.mass()) / state.mass()).abs() < 1e-12);
    }

    #[test]
    fn invalid_stepper_config_is_rejected() {
        assert!(StepperConfig::with_dt(-1.0).validate().is_err());
        assert!(StepperConfig {
            newton_tol: 0.0,
            ..StepperConfig::default()
        }
        .validate()
        .is_err());
    }
}
