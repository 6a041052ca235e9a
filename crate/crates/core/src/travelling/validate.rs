use serde::Serialize;

use super::TravellingWave;
use crate::error::{Error, Result};
use crate::model::{curvature, mobility_g, slope_factor, FlowProfile, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxConstant {
    pub q0: f64,
    /// Largest deviation of `-V_i (s - a U_i)` from `q0`, relative to `|q0|`
    /// (absolute when `q0` vanishes).
    pub spread: f64,
}

pub fn flux_constant(wave: &TravellingWave, params: &ModelParams) -> FluxConstant {
    let q: Vec<f64> = wave
        .h
        .values()
        .iter()
        .zip(wave.u.values())
        .map(|(&h, &u)| -(h * h - 1.0) * (wave.s - params.a * u))
        .collect();
    let q0 = q.iter().sum::<f64>() / q.len() as f64;
    let deviation = q.iter().fold(0.0f64, |m, &x| m.max((x - q0).abs()));
    let scale = q
        .iter()
        .fold(0.0f64, |m, &x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let spread = if q0.abs() > 1e-12 * scale {
        deviation / q0.abs()
    } else {
        deviation
    };
    FluxConstant { q0, spread }
}

/// Cumulative trapezoid integral starting at node 0.
fn cumulative(f: &[f64], dx: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in f.windows(2) {
        acc += 0.5 * dx * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Largest violation of the first integral of the momentum equation,
///
/// ```text
/// f(H') = A H + B / H + q0^2 / (4 a b H V),
/// A = -(G - K/b) / 2,   B = B(0) + 1/2 integral_0^xi G' H^2,
/// G = 1/b integral_0^xi [U_c/g + q0/(a V g) - 1 + (c q0/a) (1/V) (V'/V)'],
/// K = b kappa(0) + q0^2 / (2 a V(0)^2),   U_c = s/a,
/// ```
///
/// with `B(0)` chosen so the identity holds at `xi = 0`. Derivatives are
/// centred differences and the integrals cumulative trapezoid sums, so the
/// violation vanishes at second order on a converged wave.
pub fn first_integral_check(wave: &TravellingWave, params: &ModelParams) -> Result<f64> {
    crate::pde::operator::check_admissible(wave.h.values(), 0.0)?;
    let (a, b, c) = (params.a, params.b, params.c);
    let dx = wave.grid().dx();
    let n = wave.h.len();
    let h = wave.h.values();
    let q0 = flux_constant(wave, params).q0;
    let u_c = wave.s / a;

    let v = wave.v();
    let hx = wave.h.d1();
    let hxx = hx.d1();
    let log_slope = v.d1().zip_map(&v, |vx, v| vx / v).d1();
    let mut g_prime = Vec::with_capacity(n);
    for i in 0..n {
        let g = mobility_g(h[i], params)?;
        g_prime.push(
            (u_c / g + q0 / (a * v[i] * g) - 1.0 + c * q0 / a * log_slope[i] / v[i]) / b,
        );
    }
    let g_int = cumulative(&g_prime, dx);
    let weighted: Vec<f64> = (0..n).map(|i| g_prime[i] * h[i] * h[i]).collect();
    let b_int = cumulative(&weighted, dx);

    let kinetic = q0 * q0 / (4.0 * a * b);
    let k = b * curvature(h[0], hx[0], hxx[0]) + q0 * q0 / (2.0 * a * v[0] * v[0]);
    let a_coef = |i: usize| -0.5 * (g_int[i] - k / b);
    let b0 = h[0] * slope_factor(hx[0]) - a_coef(0) * h[0] * h[0] - kinetic / v[0];
    let violation = (0..n).fold(0.0f64, |m, i| {
        let rhs = a_coef(i) * h[i] + (b0 + 0.5 * b_int[i]) / h[i] + kinetic / (h[i] * v[i]);
        m.max((slope_factor(hx[i]) - rhs).abs())
    });
    Ok(violation)
}

/// Speed and flux constant predicted by the periodicity conditions of the
/// first integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormSpeed {
    /// `U_c = s/a`.
    pub u_c: f64,
    pub q0_over_a: f64,
    pub delta: f64,
}

/// Evaluate
///
/// ```text
/// U_c   = [L J_h2vg - Mc J_vg + c (L - Mc) J_v'] / Delta
/// q0/a  = -[L J_h2g - Mc J_g] / Delta
/// Delta = J_g J_h2vg - J_h2g J_vg - c J_v/g J_v'
/// ```
///
/// with `J_g = integral 1/g`, `J_h2g = integral H^2/g`,
/// `J_h2vg = integral H^2/(V g)`, `J_vg = integral 1/(V g)`,
/// `J_v/g = integral V/g`, `J_v' = integral V'^2/V^3` and
/// `Mc = integral H^2 = M + L`.
pub fn closed_form_speed(wave: &TravellingWave, params: &ModelParams) -> Result<ClosedFormSpeed> {
    crate::pde::operator::check_admissible(wave.h.values(), 0.0)?;
    let dx = wave.grid().dx();
    let length = wave.grid().length();
    let v = wave.v();
    let vx = v.d1();
    let (mut j_g, mut j_h2g, mut j_h2vg, mut j_vg, mut j_v_g, mut j_vp) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..wave.h.len() {
        let h = wave.h[i];
        let g = mobility_g(h, params)?;
        let vi = v[i];
        j_g += 1.0 / g;
        j_h2g += h * h / g;
        j_h2vg += h * h / (vi * g);
        j_vg += 1.0 / (vi * g);
        j_v_g += vi / g;
        j_vp += vx[i] * vx[i] / (vi * vi * vi);
    }
    let [j_g, j_h2g, j_h2vg, j_vg, j_v_g, j_vp] =
        [j_g, j_h2g, j_h2vg, j_vg, j_v_g, j_vp].map(|x| x * dx);
    let total = dx * wave.h.values().iter().map(|h| h * h).sum::<f64>();
    let c = params.c;
    let delta = j_g * j_h2vg - j_h2g * j_vg - c * j_v_g * j_vp;
    let scale = (j_g * j_h2vg).abs() + (j_h2g * j_vg).abs() + (c * j_v_g * j_vp).abs();
    if !(delta.abs() > 1e-12 * scale) {
        return Err(Error::DegenerateDeterminant { delta });
    }
    let u_c = (length * j_h2vg - total * j_vg + c * (length - total) * j_vp) / delta;
    let q0_over_a = -(length * j_h2g - total * j_g) / delta;
    Ok(ClosedFormSpeed {
        u_c,
        q0_over_a,
        delta,
    })
}

/// Relations satisfied by waves whose flux constant vanishes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TouchdownReport {
    pub is_touchdown: bool,
    /// `max |U - s/a|`.
    pub velocity_deviation: Option<f64>,
    /// Mean of `H^2`, i.e. `(M + L)/L`.
    pub mean_square_radius: f64,
    /// `mean H^2 - (integral H^2/g)/(integral 1/g)`.
    pub mean_radius_residual: Option<f64>,
    /// Plug flow: `mean H^2 - (s/a + 1)`.
    pub plug_residual: Option<f64>,
    pub note: String,
}

/// Relative size of `q0` below which a wave counts as a touchdown wave.
pub const TOUCHDOWN_FLUX_TOL: f64 = 1e-8;

pub fn touchdown_relations(wave: &TravellingWave, params: &ModelParams) -> TouchdownReport {
    let length = wave.grid().length();
    let dx = wave.grid().dx();
    let mean_sq = dx * wave.h.values().iter().map(|h| h * h).sum::<f64>() / length;
    let flux = flux_constant(wave, params);
    let q_scale = wave
        .v()
        .values()
        .iter()
        .fold(0.0f64, |m, v| m.max((v * wave.s).abs()))
        .max(f64::MIN_POSITIVE);
    if flux.q0.abs() > TOUCHDOWN_FLUX_TOL * q_scale {
        return TouchdownReport {
            is_touchdown: false,
            velocity_deviation: None,
            mean_square_radius: mean_sq,
            mean_radius_residual: None,
            plug_residual: None,
            note: format!("not a touchdown wave: q0 = {:e}", flux.q0),
        };
    }
    let u_c = wave.s / params.a;
    let velocity_deviation = wave
        .u
        .values()
        .iter()
        .fold(0.0f64, |m, &u| m.max((u - u_c).abs()));
    let (mut num, mut den) = (0.0, 0.0);
    let mut finite = true;
    for &h in wave.h.values() {
        match mobility_g(h, params) {
            Ok(g) => {
                num += h * h / g;
                den += 1.0 / g;
            }
            Err(_) => finite = false,
        }
    }
    let mean_radius_residual = (finite && den > 0.0).then(|| mean_sq - num / den);
    let plug_residual =
        (params.profile == FlowProfile::Plug).then(|| mean_sq - (u_c + 1.0));
    TouchdownReport {
        is_touchdown: true,
        velocity_deviation: Some(velocity_deviation),
        mean_square_radius: mean_sq,
        mean_radius_residual,
        plug_residual,
        note: if finite {
            "touchdown wave".into()
        } else {
            "touchdown wave; the profile reaches the fibre, so the mean-radius quotient is skipped"
                .into()
        },
    }
}
