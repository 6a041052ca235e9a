//! Periodic travelling waves `h(x, t) = H(x - s t)`, `u(x, t) = U(x - s t)`.
//!
//! The discrete profile equations reuse the transient solver's spatial
//! operators:
//!
//! ```text
//! momentum:   -s d1(U) + a d1(U^2/2) + b d1(kappa) - c Dvisc/V - 1 + U/g(H) = 0
//! continuity: d1(q) = 0,   q = -V (s - a U)
//! ```
//!
//! closed by the mass constraint `integral V = M` and a pin `H(xi*) = H*`
//! that removes the translation invariance; `(H, U, s)` are solved together
//! by Newton's method.
//!
//! Centred differences on an even number of nodes annihilate the checkerboard
//! `(-1)^i` as well as constants, so the continuity rows then determine `q`
//! only up to `alpha + beta (-1)^i`. Two of them are dropped and replaced by
//! `dx sum (-1)^i q_i = 0`; on an odd number of nodes one row is dropped.

mod guess;
mod validate;

use crate::error::{Error, Result};
use crate::grid::{DenseLu, DenseMatrix, Grid, PeriodicField};
use crate::model::{mobility_g, FlowProfile, ModelParams};
use crate::pde::operator::{self, Var};
use crate::pde::FieldState;

pub use guess::{relaxation_guess, RelaxationConfig};
pub use validate::{
    closed_form_speed, first_integral_check, flux_constant, touchdown_relations, ClosedFormSpeed,
    FluxConstant, TouchdownReport,
};

/// Converged periodic wave.
#[derive(Debug, Clone, PartialEq)]
pub struct TravellingWave {
    pub h: PeriodicField,
    pub u: PeriodicField,
    pub s: f64,
    /// Constrained mass `integral (H^2 - 1)`.
    pub mass: f64,
    /// Flux constant `-V (s - a U)`, averaged over the nodes.
    pub q0: f64,
}

impl TravellingWave {
    pub fn grid(&self) -> &Grid {
        self.h.grid()
    }

    pub fn v(&self) -> PeriodicField {
        self.h.map(|h| h * h - 1.0)
    }

    /// The wave as a transient state at time `t`, placed as stored.
    pub fn to_state(&self, t: f64) -> FieldState {
        FieldState {
            t,
            h: self.h.clone(),
            u: self.u.clone(),
        }
    }
}

/// Phase condition `H[index] = value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pin {
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    /// A late-time transient profile and its tracked speed.
    FromTrajectory { state: FieldState, speed: f64 },
    /// `H = Hbar + amplitude cos(2 pi x / L)` scaled to the requested mass,
    /// `U = g(H)`, and a speed from the flat-film drift.
    CosineBump { amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwSolveConfig {
    /// `None` rolls the guess so its steepest descent sits at node 0 and pins
    /// the guess value there.
    pub pin: Option<Pin>,
    pub tol: f64,
    pub max_iter: usize,
    pub initial_guess: InitialGuess,
}

impl TwSolveConfig {
    pub fn new(initial_guess: InitialGuess) -> Self {
        Self {
            pin: None,
            tol: 1e-10,
            max_iter: 50,
            initial_guess,
        }
    }
}

/// Converged wave plus solver statistics.
#[derive(Debug, Clone)]
pub struct TwSolution {
    pub wave: TravellingWave,
    pub pin: Pin,
    pub iterations: usize,
    pub residual: f64,
    /// Converged to the roundoff floor of the residual rather than to the
    /// requested tolerance.
    pub roundoff_limited: bool,
}

const MAX_HALVINGS: usize = 8;
// A full Newton update below this (relative) size only moves the iterate by
// roundoff. On fine grids the residual of b d1(kappa) cannot be evaluated
// below roughly b eps H / dx^3, which can exceed the tolerance; such solves
// are accepted if the residual is within ROUNDOFF_FACTOR of it.
const STAGNATION_STEP: f64 = 1e-12;
const ROUNDOFF_FACTOR: f64 = 100.0;

fn gather(h: &[f64], u: &[f64], s: f64) -> Vec<f64> {
    let mut z = Vec::with_capacity(2 * h.len() + 1);
    z.extend_from_slice(h);
    z.extend_from_slice(u);
    z.push(s);
    z
}

/// First continuity node kept in the system.
fn first_continuity_row(n: usize) -> usize {
    if n % 2 == 0 {
        2
    } else {
        1
    }
}

fn residual_raw(z: &[f64], dx: f64, mass: f64, pin: Pin, params: &ModelParams) -> Result<Vec<f64>> {
    let n = (z.len() - 1) / 2;
    let (h, rest) = z.split_at(n);
    let (u, s) = (&rest[..n], rest[n]);
    let mut r = vec![0.0; 2 * n + 1];
    operator::momentum(h, u, dx, params, &mut r[..n])?;
    let inv2dx = 0.5 / dx;
    for i in 0..n {
        let (ip, im) = ((i + 1) % n, (i + n - 1) % n);
        r[i] -= s * (u[ip] - u[im]) * inv2dx;
    }
    let q: Vec<f64> = (0..n)
        .map(|i| -(h[i] * h[i] - 1.0) * (s - params.a * u[i]))
        .collect();
    let first = first_continuity_row(n);
    let mut row = n;
    for i in first..n {
        r[row] = (q[(i + 1) % n] - q[i - 1]) * inv2dx;
        row += 1;
    }
    if n % 2 == 0 {
        r[row] = dx * (0..n).map(|i| if i % 2 == 0 { q[i] } else { -q[i] }).sum::<f64>();
        row += 1;
    }
    r[row] = dx * h.iter().map(|h| h * h - 1.0).sum::<f64>() - mass;
    r[row + 1] = h[pin.index] - pin.value;
    Ok(r)
}

fn jacobian_raw(z: &[f64], dx: f64, pin: Pin, params: &ModelParams) -> Result<DenseMatrix> {
    let n = (z.len() - 1) / 2;
    let (h, rest) = z.split_at(n);
    let (u, s) = (&rest[..n], rest[n]);
    let a = params.a;
    let mut jac = DenseMatrix::zeros(2 * n + 1);
    let col = |var: Var, node: usize| match var {
        Var::H => node,
        Var::U => n + node,
    };
    operator::momentum_jacobian(h, u, dx, params, |row, var, node, value| {
        jac[(row, col(var, node))] += value
    })?;
    let inv2dx = 0.5 / dx;
    for i in 0..n {
        let (ip, im) = ((i + 1) % n, (i + n - 1) % n);
        jac[(i, n + ip)] -= s * inv2dx;
        jac[(i, n + im)] += s * inv2dx;
        jac[(i, 2 * n)] = -(u[ip] - u[im]) * inv2dx;
    }
    // partial derivatives of q_j
    let dq_dh: Vec<f64> = (0..n).map(|j| -2.0 * h[j] * (s - a * u[j])).collect();
    let dq_du: Vec<f64> = (0..n).map(|j| a * (h[j] * h[j] - 1.0)).collect();
    let dq_ds: Vec<f64> = (0..n).map(|j| -(h[j] * h[j] - 1.0)).collect();
    let first = first_continuity_row(n);
    let mut row = n;
    for i in first..n {
        for (j, sign) in [((i + 1) % n, 1.0), (i - 1, -1.0)] {
            let w = sign * inv2dx;
            jac[(row, j)] += w * dq_dh[j];
            jac[(row, n + j)] += w * dq_du[j];
            jac[(row, 2 * n)] += w * dq_ds[j];
        }
        row += 1;
    }
    if n % 2 == 0 {
        for j in 0..n {
            let w = if j % 2 == 0 { dx } else { -dx };
            jac[(row, j)] = w * dq_dh[j];
            jac[(row, n + j)] = w * dq_du[j];
            jac[(row, 2 * n)] += w * dq_ds[j];
        }
        row += 1;
    }
    for j in 0..n {
        jac[(row, j)] = 2.0 * dx * h[j];
    }
    jac[(row + 1, pin.index)] = 1.0;
    Ok(jac)
}

fn check_inputs(h: &PeriodicField, u: &PeriodicField, pin: Pin) -> Result<()> {
    if h.grid() != u.grid() {
        return Err(Error::InvalidParameter(
            "radius and velocity live on different grids".into(),
        ));
    }
    if pin.index >= h.len() {
        return Err(Error::InvalidParameter(format!(
            "pin index {} outside a grid of {} nodes",
            pin.index,
            h.len()
        )));
    }
    operator::check_admissible(h.values(), 0.0)
}

/// Residual of the discrete travelling-wave system, length `2N + 1`:
/// `N` momentum rows, the continuity rows (with the checkerboard closure on
/// even grids), the mass constraint and the pin.
pub fn tw_residual(
    h: &PeriodicField,
    u: &PeriodicField,
    s: f64,
    mass: f64,
    pin: Pin,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    check_inputs(h, u, pin)?;
    residual_raw(
        &gather(h.values(), u.values(), s),
        h.grid().dx(),
        mass,
        pin,
        params,
    )
}

/// Analytic Jacobian of [`tw_residual`] with respect to `(H, U, s)` in that
/// (blocked) order.
pub fn tw_jacobian(
    h: &PeriodicField,
    u: &PeriodicField,
    s: f64,
    pin: Pin,
    params: &ModelParams,
) -> Result<DenseMatrix> {
    check_inputs(h, u, pin)?;
    jacobian_raw(&gather(h.values(), u.values(), s), h.grid().dx(), pin, params)
}

fn max_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Guess profiles and speed on `grid`.
fn build_guess(
    guess: &InitialGuess,
    mass: f64,
    params: &ModelParams,
    grid: Grid,
) -> Result<(PeriodicField, PeriodicField, f64)> {
    match guess {
        InitialGuess::FromTrajectory { state, speed } => {
            if *state.grid() != grid {
                return Err(Error::InvalidParameter(format!(
                    "guess has {} nodes on length {} but the solve uses {} nodes on length {}; \
                     resample the guess first",
                    state.grid().len(),
                    state.grid().length(),
                    grid.len(),
                    grid.length()
                )));
            }
            Ok((state.h.clone(), state.u.clone(), *speed))
        }
        InitialGuess::CosineBump { amplitude } => {
            let mean_sq = mass / grid.length() + 1.0;
            let k = 2.0 * std::f64::consts::PI / grid.length();
            let h = grid.sample(|x| mean_sq.sqrt() + amplitude * (k * x).cos());
            let scale = (mean_sq / (h.values().iter().map(|h| h * h).sum::<f64>() / grid.len() as f64))
                .sqrt();
            let h = h.map(|h| h * scale);
            operator::check_admissible(h.values(), 0.0)?;
            let mut u = h.clone();
            for value in u.values_mut() {
                *value = mobility_g(*value, params)?;
            }
            let s = match params.profile {
                FlowProfile::Plug => params.a * mass / grid.length(),
                FlowProfile::Laminar => {
                    params.a * u.values().iter().sum::<f64>() / grid.len() as f64
                }
            };
            Ok((h, u, s))
        }
    }
}

/// Node of steepest descent of `h`.
pub fn steepest_descent_node(h: &PeriodicField) -> usize {
    h.d1()
        .values()
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Newton solve for `(H, U, s)` at fixed mass.
pub fn solve_tw(
    config: &TwSolveConfig,
    mass: f64,
    params: &ModelParams,
    grid: Grid,
) -> Result<TwSolution> {
    params.validate()?;
    if !(mass > 0.0) {
        return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
    }
    let (mut h, mut u, s) = build_guess(&config.initial_guess, mass, params, grid)?;
    let pin = match config.pin {
        Some(pin) => {
            if pin.index >= grid.len() || !(pin.value >= h.min() && pin.value <= h.max()) {
                return Err(Error::InvalidParameter(format!(
                    "pin H[{}] = {} is not attained by the guess (range [{}, {}])",
                    pin.index,
                    pin.value,
                    h.min(),
                    h.max()
                )));
            }
            pin
        }
        None => {
            let k = steepest_descent_node(&h);
            h = h.shift(-(k as isize));
            u = u.shift(-(k as isize));
            Pin {
                index: 0,
                value: h[0],
            }
        }
    };
    check_inputs(&h, &u, pin)?;
    let n = grid.len();
    let dx = grid.dx();
    let mut z = gather(h.values(), u.values(), s);
    let mut r = residual_raw(&z, dx, mass, pin, params)?;
    let mut norm = max_norm(&r);
    let mut iterations = 0;
    let mut roundoff_limited = false;
    while norm > config.tol && iterations < config.max_iter {
        let jac = jacobian_raw(&z, dx, pin, params)?;
        let delta = DenseLu::factor(jac)?.solve(&r);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = z.iter().zip(&delta).map(|(a, d)| a - lambda * d).collect();
            if trial[..n].iter().all(|&h| h > 1.0) {
                let trial_r = residual_raw(&trial, dx, mass, pin, params)?;
                let trial_norm = max_norm(&trial_r);
                let better = trial_norm < norm;
                accepted = Some((trial, trial_r, trial_norm));
                if better {
                    break;
                }
            }
            lambda *= 0.5;
        }
        iterations += 1;
        let Some((trial, trial_r, trial_norm)) = accepted else {
            break;
        };
        z = trial;
        r = trial_r;
        norm = trial_norm;
        let step = max_norm(&delta);
        if step <= STAGNATION_STEP * (1.0 + max_norm(&z)) && norm <= ROUNDOFF_FACTOR * config.tol {
            roundoff_limited = norm > config.tol;
            break;
        }
    }
    let wave = assemble(&z, grid, mass, params);
    if norm <= config.tol || roundoff_limited {
        Ok(TwSolution {
            wave,
            pin,
            iterations,
            residual: norm,
            roundoff_limited,
        })
    } else {
        Err(Error::TravellingWaveFailed {
            residual: norm,
            iterations,
            best: Box::new(wave),
        })
    }
}

fn assemble(z: &[f64], grid: Grid, mass: f64, params: &ModelParams) -> TravellingWave {
    let n = grid.len();
    let h = PeriodicField::new(grid, z[..n].to_vec()).expect("length matches grid");
    let u = PeriodicField::new(grid, z[n..2 * n].to_vec()).expect("length matches grid");
    let mut wave = TravellingWave {
        h,
        u,
        s: z[2 * n],
        mass,
        q0: 0.0,
    };
    wave.q0 = flux_constant(&wave, params).q0;
    wave
}
