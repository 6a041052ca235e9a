#![allow(dead_code)]

use fibreflow::grid::{DenseMatrix, Grid};
use fibreflow::model::{FlowProfile, ModelParams};
use fibreflow::pde::{initial_condition, FieldState};
use fibreflow::travelling::{
    relaxation_guess, solve_tw, RelaxationConfig, TwSolution, TwSolveConfig,
};

pub const LENGTH: f64 = 20.0;
pub const H0: f64 = 2.29;
pub const AMPLITUDE: f64 = 0.1;

pub fn case_a() -> ModelParams {
    ModelParams::new(0.2, 10.0, 1.0, FlowProfile::Plug)
}

pub fn case_b() -> ModelParams {
    ModelParams::new(0.4, 12.0, 3.0, FlowProfile::Plug)
}

pub fn case_c() -> ModelParams {
    ModelParams::new(1.5, 13.0, 4.0, FlowProfile::Laminar)
}

pub fn case_d() -> ModelParams {
    ModelParams::new(0.1, 11.0, 4.0, FlowProfile::Laminar)
}

/// Exact mass of the sinusoidal initial film: the sine integrates to zero
/// and its square to L/2.
pub fn ic_mass_exact() -> f64 {
    LENGTH * (H0 * H0 - 1.0) + AMPLITUDE * AMPLITUDE * LENGTH / 2.0
}

pub fn ic(nodes: usize, params: &ModelParams) -> FieldState {
    initial_condition(Grid::new(LENGTH, nodes).unwrap(), H0, AMPLITUDE, params).unwrap()
}

/// Travelling wave from the default relaxation guess.
pub fn wave(params: &ModelParams, nodes: usize) -> TwSolution {
    let grid = Grid::new(LENGTH, nodes).unwrap();
    let guess = relaxation_guess(grid, ic_mass_exact(), params, &RelaxationConfig::default())
        .unwrap();
    solve_tw(&TwSolveConfig::new(guess), ic_mass_exact(), params, grid).unwrap()
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Fourth-order central-difference Jacobian of `r` at `x`.
pub fn fd_jacobian(x: &[f64], r: impl Fn(&[f64]) -> Vec<f64>) -> Vec<Vec<f64>> {
    let n = x.len();
    let m = r(x).len();
    let mut jac = vec![vec![0.0; n]; m];
    let mut y = x.to_vec();
    for j in 0..n {
        let eps = 1e-3 * (1.0 + x[j].abs());
        let mut at = |k: f64| {
            y[j] = x[j] + k * eps;
            let out = r(&y);
            y[j] = x[j];
            out
        };
        let (p1, m1, p2, m2) = (at(1.0), at(-1.0), at(2.0), at(-2.0));
        for i in 0..m {
            jac[i][j] = (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * eps);
        }
    }
    jac
}

/// Largest relative mismatch over entries whose magnitude in either matrix
/// is at least `floor`, together with its position.
pub fn worst_relative_mismatch(
    analytic: &DenseMatrix,
    fd: &[Vec<f64>],
    floor: f64,
) -> (f64, usize, usize) {
    let mut worst = (0.0, 0, 0);
    for (i, row) in fd.iter().enumerate() {
        for (j, &b) in row.iter().enumerate() {
            let a = analytic[(i, j)];
            if a.abs().max(b.abs()) < floor {
                continue;
            }
            let rel = (a - b).abs() / a.abs().max(b.abs());
            if rel > worst.0 {
                worst = (rel, i, j);
            }
        }
    }
    worst
}
