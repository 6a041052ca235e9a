//! Energy and entropy functionals, their a priori bounds, and wave tracking.
//!
//! All integrals are periodic rectangle-rule sums; `h_x` is the centred first
//! difference and `v_x = 2 h h_x`.

pub(crate) mod track;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::PeriodicField;
use crate::model::{arc_factor, mobility_g, EntropyPotential, FlowProfile, ModelParams};
use crate::pde::FieldState;

pub use track::{locate_peak, track_wave, Peak, WaveTrack, DEFAULT_TRAILING_FRACTION};

/// Relative slack allowed on bounds that are attained with equality at
/// `t = 0` (`E(0) = C0(0)`).
pub const INITIAL_SLACK: f64 = 1e-12;

fn slope(state: &FieldState) -> PeriodicField {
    state.h.d1()
}

fn area_slope(state: &FieldState) -> PeriodicField {
    state.h.zip_map(&slope(state), |h, hx| 2.0 * h * hx)
}

fn surface_term(state: &FieldState, params: &ModelParams, hx: &PeriodicField) -> Vec<f64> {
    let w = 4.0 * params.b / params.a;
    state
        .h
        .values()
        .iter()
        .zip(hx.values())
        .map(|(&h, &z)| w * h * arc_factor(z))
        .collect()
}

fn sum(values: impl Iterator<Item = f64>, dx: f64) -> f64 {
    dx * values.sum::<f64>()
}

/// `E = 1/2 integral (v u^2 + (4b/a) h Phi(h_x))`.
pub fn energy(state: &FieldState, params: &ModelParams) -> f64 {
    let hx = slope(state);
    let surface = surface_term(state, params, &hx);
    let dx = state.grid().dx();
    let terms = (0..state.h.len()).map(|i| {
        let h = state.h[i];
        let u = state.u[i];
        (h * h - 1.0) * u * u + surface[i]
    });
    0.5 * sum(terms, dx)
}

/// Instantaneous dissipation `c integral v u_x^2 + integral u^2 v / g(h)`.
pub fn dissipation_rate(state: &FieldState, params: &ModelParams) -> Result<f64> {
    let ux = state.u.d1();
    let mut acc = 0.0;
    for i in 0..state.h.len() {
        let h = state.h[i];
        let u = state.u[i];
        let v = h * h - 1.0;
        acc += params.c * v * ux[i] * ux[i] + u * u * v / mobility_g(h, params)?;
    }
    Ok(acc * state.grid().dx())
}

/// `integral v_x^2 / v`.
pub fn entropy_integral(state: &FieldState) -> Result<f64> {
    state.check(0.0)?;
    let vx = area_slope(state);
    let terms = (0..state.h.len()).map(|i| {
        let h = state.h[i];
        vx[i] * vx[i] / (h * h - 1.0)
    });
    Ok(sum(terms, state.grid().dx()))
}

/// Plug-flow entropy
/// `S1 = 1/2 integral [v (u + (c/a) v_x/v)^2 + (4b/a) h Phi + (2c/a^2)(v - ln v)]`.
pub fn entropy_s1(state: &FieldState, params: &ModelParams) -> Result<f64> {
    state.check(0.0)?;
    let hx = slope(state);
    let surface = surface_term(state, params, &hx);
    let ratio = params.c / params.a;
    let log_weight = 2.0 * params.c / (params.a * params.a);
    let terms = (0..state.h.len()).map(|i| {
        let h = state.h[i];
        let v = h * h - 1.0;
        let drift = state.u[i] + ratio * 2.0 * h * hx[i] / v;
        v * drift * drift + surface[i] + log_weight * (v - v.ln())
    });
    Ok(0.5 * sum(terms, state.grid().dx()))
}

/// Laminar entropy
/// `S2 = 1/2 integral [v (u + c/(a+e0) v_x/v)^2 + c^2 e0/(a (a+e0)^2) v_x^2/v
///  + (4b/a) h Phi + 4c/(a (a+e0)) (8v - G(h))]`.
///
/// Fails when the film dips below the potential's floor.
pub fn entropy_s2(
    state: &FieldState,
    params: &ModelParams,
    potential: &EntropyPotential,
) -> Result<f64> {
    let hx = slope(state);
    let surface = surface_term(state, params, &hx);
    let (a, c, e0) = (params.a, params.c, params.epsilon0);
    let ratio = c / (a + e0);
    let gradient_weight = c * c * e0 / (a * (a + e0) * (a + e0));
    let potential_weight = 4.0 * c / (a * (a + e0));
    let mut acc = 0.0;
    for i in 0..state.h.len() {
        let h = state.h[i];
        let v = h * h - 1.0;
        let vx = 2.0 * h * hx[i];
        let drift = state.u[i] + ratio * vx / v;
        acc += v * drift * drift
            + gradient_weight * vx * vx / v
            + surface[i]
            + potential_weight * (8.0 * v - potential.eval(h)?);
    }
    Ok(0.5 * acc * state.grid().dx())
}

/// `C0(t) = (sqrt(E0) + sqrt(2M)/2 t)^2`.
pub fn c0_bound(t: f64, e0: f64, mass: f64) -> f64 {
    let r = e0.sqrt() + 0.5 * (2.0 * mass).sqrt() * t;
    r * r
}

/// `integral_0^t C0` and `integral_0^t sqrt(C0)` in closed form.
fn c0_integrals(t: f64, e0: f64, mass: f64) -> (f64, f64) {
    let alpha = e0.sqrt();
    let beta = 0.5 * (2.0 * mass).sqrt();
    let end = alpha + beta * t;
    let int_c0 = if beta > 0.0 {
        (end.powi(3) - alpha.powi(3)) / (3.0 * beta)
    } else {
        alpha * alpha * t
    };
    (int_c0, alpha * t + 0.5 * beta * t * t)
}

/// `C1(t) = S1(0) + integral_0^t (c C0 + sqrt(2M) sqrt(C0))`.
pub fn c1_bound(t: f64, s1_0: f64, mass: f64, e0: f64, params: &ModelParams) -> f64 {
    let (int_c0, int_sqrt) = c0_integrals(t, e0, mass);
    s1_0 + params.c * int_c0 + (2.0 * mass).sqrt() * int_sqrt
}

/// `C3 = (a/c)^2 [2/(1-eps) C0 + 2/eps C1]` with `eps = params.epsilon`.
pub fn c3_bound(t: f64, s1_0: f64, mass: f64, e0: f64, params: &ModelParams) -> f64 {
    c3_bound_with_epsilon(t, s1_0, mass, e0, params, params.epsilon)
}

pub fn c3_bound_with_epsilon(
    t: f64,
    s1_0: f64,
    mass: f64,
    e0: f64,
    params: &ModelParams,
    epsilon: f64,
) -> f64 {
    let c0 = c0_bound(t, e0, mass);
    let c1 = c1_bound(t, s1_0, mass, e0, params);
    let r = params.a / params.c;
    r * r * (2.0 / (1.0 - epsilon) * c0 + 2.0 / epsilon * c1)
}

/// `C2(t) = S2(0) + integral_0^t (ac/(a+e0) C0 + sqrt(2M) sqrt(C0) + 16cM/(e0 (a+e0)))`.
pub fn c2_bound(t: f64, s2_0: f64, mass: f64, e0: f64, params: &ModelParams) -> f64 {
    let (a, c, eps0) = (params.a, params.c, params.epsilon0);
    let (int_c0, int_sqrt) = c0_integrals(t, e0, mass);
    s2_0 + a * c / (a + eps0) * int_c0
        + (2.0 * mass).sqrt() * int_sqrt
        + 16.0 * c * mass / (eps0 * (a + eps0)) * t
}

/// Functionals and bounds at one output time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsSample {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub cum_dissipation: f64,
    pub c0_bound: f64,
    pub entropy_integral: f64,
    /// Plug flow only.
    pub c1_bound: Option<f64>,
    /// Plug flow only.
    pub c3_bound: Option<f64>,
    /// Plug flow only.
    pub s1: Option<f64>,
    /// Laminar flow only, while the film stays above the potential floor.
    pub s2: Option<f64>,
    pub c2_bound: Option<f64>,
    pub peak_x: Option<f64>,
    pub peak_h: Option<f64>,
    pub speed_estimate: Option<f64>,
    pub certified: bool,
}

/// Accumulates diagnostics along a trajectory started from `initial`. `I(t)`
/// is integrated with the trapezoid rule over the initial state and the
/// recorded samples; bounds are evaluated at the time elapsed since the
/// initial state.
#[derive(Debug, Clone)]
pub struct Monitor {
    params: ModelParams,
    mass0: f64,
    e0: f64,
    s1_0: Option<f64>,
    s2_0: Option<f64>,
    potential: Option<EntropyPotential>,
    t0: f64,
    last: (f64, f64),
    recorded: usize,
    cumulative: f64,
    peaks: Vec<(f64, f64)>,
}

impl Monitor {
    pub fn new(initial: &FieldState, params: &ModelParams) -> Result<Self> {
        let (s1_0, potential) = match params.profile {
            FlowProfile::Plug => (Some(entropy_s1(initial, params)?), None),
            FlowProfile::Laminar => (None, Some(EntropyPotential::new(params)?)),
        };
        let s2_0 = potential
            .as_ref()
            .and_then(|p| entropy_s2(initial, params, p).ok());
        Ok(Self {
            params: *params,
            mass0: initial.mass(),
            e0: energy(initial, params),
            s1_0,
            s2_0,
            potential,
            t0: initial.t,
            last: (initial.t, dissipation_rate(initial, params)?),
            recorded: 0,
            cumulative: 0.0,
            peaks: Vec::new(),
        })
    }

    pub fn initial_energy(&self) -> f64 {
        self.e0
    }

    pub fn initial_mass(&self) -> f64 {
        self.mass0
    }

    pub fn initial_s1(&self) -> Option<f64> {
        self.s1_0
    }

    pub fn initial_s2(&self) -> Option<f64> {
        self.s2_0
    }

    /// Record the next sample. Times must increase; the first sample may be
    /// the initial state itself.
    pub fn record(&mut self, state: &FieldState) -> Result<DiagnosticsSample> {
        let params = &self.params;
        let rate = dissipation_rate(state, params)?;
        let (t_prev, rate_prev) = self.last;
        let initial_again = self.recorded == 0 && state.t == t_prev;
        if !initial_again {
            if !(state.t > t_prev) {
                return Err(Error::InvalidParameter(format!(
                    "diagnostics times must increase: {} after {t_prev}",
                    state.t
                )));
            }
            self.cumulative += 0.5 * (state.t - t_prev) * (rate + rate_prev);
        }
        self.last = (state.t, rate);
        self.recorded += 1;
        let t = state.t - self.t0;

        let mass = state.mass();
        let energy = energy(state, params);
        let c0 = c0_bound(t, self.e0, self.mass0);
        let entropy_integral = entropy_integral(state)?;
        let (s1, c1, c3) = match self.s1_0 {
            Some(s1_0) => (
                Some(entropy_s1(state, params)?),
                Some(c1_bound(t, s1_0, self.mass0, self.e0, params)),
                Some(c3_bound(t, s1_0, self.mass0, self.e0, params)),
            ),
            None => (None, None, None),
        };
        let (s2, c2) = match (&self.potential, self.s2_0) {
            (Some(potential), Some(s2_0)) => match entropy_s2(state, params, potential) {
                Ok(s2) => (Some(s2), Some(c2_bound(t, s2_0, self.mass0, self.e0, params))),
                Err(_) => (None, None),
            },
            _ => (None, None),
        };

        let peak = locate_peak(&state.h);
        if let Some(peak) = peak {
            self.peaks.push((state.t, peak.x));
        }
        let speed_estimate = track::fit_speed(&self.peaks, state.grid().length());

        let mut sample = DiagnosticsSample {
            t: state.t,
            mass,
            energy,
            cum_dissipation: self.cumulative,
            c0_bound: c0,
            entropy_integral,
            c1_bound: c1,
            c3_bound: c3,
            s1,
            s2,
            c2_bound: c2,
            peak_x: peak.map(|p| p.x),
            peak_h: peak.map(|p| p.h),
            speed_estimate,
            certified: false,
        };
        sample.certified = certify_sample(&sample).pass;
        Ok(sample)
    }
}

/// Margins of one sample; positive means the bound holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleVerdict {
    pub t: f64,
    /// `C0 - (E + I)`.
    pub energy_margin: f64,
    /// `C3 - integral v_x^2/v` (plug flow).
    pub entropy_margin: Option<f64>,
    /// `C2 - S2`, best effort (laminar flow above the potential floor). Not
    /// part of the verdict.
    pub s2_margin: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    pub samples: Vec<SampleVerdict>,
    pub pass: bool,
}

impl CertificationReport {
    pub fn first_failure(&self) -> Option<&SampleVerdict> {
        self.samples.iter().find(|s| !s.pass)
    }
}

/// A bound holds if its margin is positive, or non-negative up to roundoff
/// where the bound is attained with equality.
fn holds(margin: f64, scale: f64) -> bool {
    margin > 0.0 || margin >= -INITIAL_SLACK * scale.abs()
}

pub fn certify_sample(sample: &DiagnosticsSample) -> SampleVerdict {
    let energy_margin = sample.c0_bound - (sample.energy + sample.cum_dissipation);
    let entropy_margin = sample.c3_bound.map(|c3| c3 - sample.entropy_integral);
    let s2_margin = match (sample.s2, sample.c2_bound) {
        (Some(s2), Some(c2)) => Some(c2 - s2),
        _ => None,
    };
    let energy_ok = holds(energy_margin, sample.c0_bound);
    let entropy_ok = match (entropy_margin, sample.c3_bound) {
        (Some(m), Some(c3)) => holds(m, c3),
        _ => true,
    };
    SampleVerdict {
        t: sample.t,
        energy_margin,
        entropy_margin,
        s2_margin,
        pass: energy_ok && entropy_ok && energy_margin.is_finite(),
    }
}

/// Check `E + I <= C0` at every sample and, for plug flow,
/// `integral v_x^2/v <= C3`.
pub fn certify(samples: &[DiagnosticsSample]) -> CertificationReport {
    let samples: Vec<SampleVerdict> = samples.iter().map(certify_sample).collect();
    let pass = samples.iter().all(|s| s.pass);
    CertificationReport { samples, pass }
}

/// Recompute the diagnostics stream of stored snapshots of a run started
/// from `initial`.
pub fn recompute(
    initial: &FieldState,
    snapshots: &[FieldState],
    params: &ModelParams,
) -> Result<Vec<DiagnosticsSample>> {
    let mut monitor = Monitor::new(initial, params)?;
    snapshots.iter().map(|s| monitor.record(s)).collect()
}
