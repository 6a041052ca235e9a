//! Spatial operators of the radius/velocity system on a collocated periodic
//! grid, shared by the transient stepper and the travelling-wave solver.
//!
//! The high-order curvature term is evaluated through the first-order
//! auxiliary fields `k = d1 h`, `p = d1 k`, `w = d1 u`:
//!
//! ```text
//! momentum: a d1(u^2/2) + b d1(kappa) - c Dvisc(u; v)/v - 1 + u/g(h)
//! kappa_i = f(k_i)/h_i - f(k_i)^3 p_i
//! mass flux divergence: a d1(u v),   v = h^2 - 1
//! ```
//!
//! `Dvisc` is the compact conservative stencil with arithmetic-mean face
//! values of `v`.

use crate::error::{Error, Result};
use crate::model::{mobility_g, mobility_g_prime, slope_factor, ModelParams};

/// Unknown a Jacobian entry refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    H,
    U,
}

/// Largest node distance coupled by the momentum operator.
pub const STENCIL_RADIUS: usize = 3;

#[inline]
fn prev(i: usize, n: usize) -> usize {
    if i == 0 {
        n - 1
    } else {
        i - 1
    }
}

#[inline]
fn next(i: usize, n: usize) -> usize {
    if i + 1 == n {
        0
    } else {
        i + 1
    }
}

#[inline]
fn wrap(i: usize, offset: isize, n: usize) -> usize {
    (i as isize + offset).rem_euclid(n as isize) as usize
}

/// Fails with the first node where the film touches the fibre.
pub fn check_admissible(h: &[f64], v_floor: f64) -> Result<()> {
    match h.iter().position(|&x| !(x * x - 1.0 > v_floor)) {
        Some(node) => Err(Error::Degenerate { node, h: h[node] }),
        None => Ok(()),
    }
}

/// Keller-box auxiliaries and curvature at every node.
#[derive(Debug, Clone)]
pub struct CurvatureFields {
    pub k: Vec<f64>,
    pub p: Vec<f64>,
    pub kappa: Vec<f64>,
}

pub fn curvature_fields(h: &[f64], dx: f64) -> CurvatureFields {
    let n = h.len();
    let mut k = vec![0.0; n];
    let mut p = vec![0.0; n];
    crate::grid::d1_into(h, dx, &mut k);
    crate::grid::d1_into(&k, dx, &mut p);
    let kappa = (0..n)
        .map(|i| crate::model::curvature(h[i], k[i], p[i]))
        .collect();
    CurvatureFields { k, p, kappa }
}

/// Momentum operator (everything except the time derivative), written into
/// `out`.
pub fn momentum(h: &[f64], u: &[f64], dx: f64, params: &ModelParams, out: &mut [f64]) -> Result<()> {
    let n = h.len();
    check_admissible(h, 0.0)?;
    let CurvatureFields { kappa, .. } = curvature_fields(h, dx);
    let inv2dx = 0.5 / dx;
    let invdx2 = 1.0 / (dx * dx);
    for i in 0..n {
        let (ip, im) = (next(i, n), prev(i, n));
        let v = h[i] * h[i] - 1.0;
        let vp = 0.5 * (v + h[ip] * h[ip] - 1.0);
        let vm = 0.5 * (v + h[im] * h[im] - 1.0);
        let advection = params.a * 0.5 * (u[ip] * u[ip] - u[im] * u[im]) * inv2dx;
        let capillary = params.b * (kappa[ip] - kappa[im]) * inv2dx;
        let viscous = (vp * (u[ip] - u[i]) - vm * (u[i] - u[im])) * invdx2 / v;
        let drag = u[i] / mobility_g(h[i], params)?;
        out[i] = advection + capillary - params.c * viscous - 1.0 + drag;
    }
    Ok(())
}

/// Entries of the Jacobian of [`momentum`]: `sink(row, var, col, value)` is
/// called once or more per structurally nonzero entry; repeated calls for the
/// same entry must be summed.
pub fn momentum_jacobian(
    h: &[f64],
    u: &[f64],
    dx: f64,
    params: &ModelParams,
    mut sink: impl FnMut(usize, Var, usize, f64),
) -> Result<()> {
    let n = h.len();
    check_admissible(h, 0.0)?;
    let CurvatureFields { k, p, .. } = curvature_fields(h, dx);
    let inv2dx = 0.5 / dx;
    let invdx2 = 1.0 / (dx * dx);

    // d kappa_j / d h_{j+m}, m = -2..=2
    let dkappa: Vec<[f64; 5]> = (0..n)
        .map(|j| {
            let f = slope_factor(k[j]);
            let f3 = f * f * f;
            let dk = -k[j] * f3 / h[j] + 3.0 * k[j] * f3 * f * f * p[j];
            let outer = -f3 * 0.25 * invdx2;
            [
                outer,
                -dk * inv2dx,
                -f / (h[j] * h[j]) + 0.5 * f3 * invdx2,
                dk * inv2dx,
                outer,
            ]
        })
        .collect();

    for i in 0..n {
        let (ip, im) = (next(i, n), prev(i, n));

        sink(i, Var::U, ip, params.a * u[ip] * inv2dx);
        sink(i, Var::U, im, -params.a * u[im] * inv2dx);

        for (j, sign) in [(ip, 1.0), (im, -1.0)] {
            let coef = sign * params.b * inv2dx;
            for (m, d) in dkappa[j].iter().enumerate() {
                sink(i, Var::H, wrap(j, m as isize - 2, n), coef * d);
            }
        }

        let v = h[i] * h[i] - 1.0;
        let vip = h[ip] * h[ip] - 1.0;
        let vim = h[im] * h[im] - 1.0;
        let vp = 0.5 * (v + vip);
        let vm = 0.5 * (v + vim);
        let fwd = u[ip] - u[i];
        let bwd = u[i] - u[im];
        let dvisc = (vp * fwd - vm * bwd) * invdx2;
        let cv = params.c / v;
        sink(i, Var::U, ip, -cv * vp * invdx2);
        sink(i, Var::U, im, -cv * vm * invdx2);
        sink(i, Var::U, i, cv * (vp + vm) * invdx2);
        sink(i, Var::H, ip, -cv * h[ip] * fwd * invdx2);
        sink(i, Var::H, im, cv * h[im] * bwd * invdx2);
        let d_own = h[i] * (fwd - bwd) * invdx2;
        sink(i, Var::H, i, -params.c * (d_own / v - dvisc * 2.0 * h[i] / (v * v)));

        let g = mobility_g(h[i], params)?;
        let dg = mobility_g_prime(h[i], params)?;
        sink(i, Var::U, i, 1.0 / g);
        sink(i, Var::H, i, -u[i] * dg / (g * g));
    }
    Ok(())
}

/// Mass flux divergence `a d1(u v)`, written into `out`.
pub fn flux_divergence(h: &[f64], u: &[f64], dx: f64, a: f64, out: &mut [f64]) {
    let n = h.len();
    let inv2dx = 0.5 / dx;
    for i in 0..n {
        let (ip, im) = (next(i, n), prev(i, n));
        let qp = u[ip] * (h[ip] * h[ip] - 1.0);
        let qm = u[im] * (h[im] * h[im] - 1.0);
        out[i] = a * (qp - qm) * inv2dx;
    }
}

/// Jacobian entries of [`flux_divergence`], same convention as
/// [`momentum_jacobian`].
pub fn flux_divergence_jacobian(
    h: &[f64],
    u: &[f64],
    dx: f64,
    a: f64,
    mut sink: impl FnMut(usize, Var, usize, f64),
) {
    let n = h.len();
    let inv2dx = 0.5 / dx;
    for i in 0..n {
        for (j, sign) in [(next(i, n), 1.0), (prev(i, n), -1.0)] {
            let coef = sign * a * inv2dx;
            sink(i, Var::H, j, coef * 2.0 * h[j] * u[j]);
            sink(i, Var::U, j, coef * (h[j] * h[j] - 1.0));
        }
    }
}
