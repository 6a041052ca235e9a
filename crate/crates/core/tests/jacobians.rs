mod common;

use common::{fd_jacobian, worst_relative_mismatch};
use fibreflow::grid::Grid;
use fibreflow::model::{FlowProfile, ModelParams};
use fibreflow::pde::{jacobian, residual, FieldState, JacobianMode};
use fibreflow::travelling::{tw_jacobian, tw_residual, Pin};
use proptest::prelude::*;

const N: usize = 16;

fn params(profile: FlowProfile) -> ModelParams {
    ModelParams::new(0.3, 5.0, 2.0, profile)
}

fn state_from(grid: Grid, t: f64, h: Vec<f64>, u: Vec<f64>) -> FieldState {
    FieldState::new(t, grid.field(h).unwrap(), grid.field(u).unwrap()).unwrap()
}

fn admissible() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (
        prop::collection::vec(1.4..3.0f64, N),
        prop::collection::vec(-1.0..6.0f64, N),
        0.1..3.0f64,
    )
}

fn check_pde(profile: FlowProfile, h: Vec<f64>, u: Vec<f64>, dt: f64) -> Result<(), TestCaseError> {
    let params = params(profile);
    let grid = Grid::new(20.0, N).unwrap();
    let new = state_from(grid, 0.0, h.clone(), u.clone());
    let old = state_from(grid, 0.0, h.iter().map(|x| x + 0.01).collect(), u.clone());
    let analytic = jacobian(&new, dt, JacobianMode::Analytic, &params).unwrap();
    let fd = fd_jacobian(&new.interleave(), |x| {
        let trial = FieldState::from_interleaved(0.0, grid, x);
        residual(&trial, &old, dt, &params).unwrap()
    });
    let (worst, i, j) = worst_relative_mismatch(&analytic, &fd, 1e-8);
    prop_assert!(worst < 1e-6, "entry ({i}, {j}) off by {worst:e}");
    Ok(())
}

fn check_tw(profile: FlowProfile, h: Vec<f64>, u: Vec<f64>, s: f64) -> Result<(), TestCaseError> {
    let params = params(profile);
    let grid = Grid::new(20.0, N).unwrap();
    let pin = Pin {
        index: 3,
        value: h[3],
    };
    let mass = 40.0;
    let hf = grid.field(h.clone()).unwrap();
    let uf = grid.field(u.clone()).unwrap();
    let analytic = tw_jacobian(&hf, &uf, s, pin, &params).unwrap();
    let mut z = h.clone();
    z.extend_from_slice(&u);
    z.push(s);
    let fd = fd_jacobian(&z, |z| {
        let h = grid.field(z[..N].to_vec()).unwrap();
        let u = grid.field(z[N..2 * N].to_vec()).unwrap();
        tw_residual(&h, &u, z[2 * N], mass, pin, &params).unwrap()
    });
    let (worst, i, j) = worst_relative_mismatch(&analytic, &fd, 1e-8);
    prop_assert!(worst < 1e-6, "entry ({i}, {j}) off by {worst:e}");
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pde_jacobian_matches_differences_plug((h, u, dt) in admissible()) {
        check_pde(FlowProfile::Plug, h, u, dt)?;
    }

    #[test]
    fn pde_jacobian_matches_differences_laminar((h, u, dt) in admissible()) {
        check_pde(FlowProfile::Laminar, h, u, dt)?;
    }

    #[test]
    fn tw_jacobian_matches_differences_plug((h, u, s) in admissible()) {
        check_tw(FlowProfile::Plug, h, u, s)?;
    }

    #[test]
    fn tw_jacobian_matches_differences_laminar((h, u, s) in admissible()) {
        check_tw(FlowProfile::Laminar, h, u, s)?;
    }
}

#[test]
fn odd_grid_tw_jacobian_matches_differences() {
    let params = params(FlowProfile::Plug);
    let n = 17;
    let grid = Grid::new(20.0, n).unwrap();
    let h = grid.sample(|x| 2.0 + 0.3 * (0.3 * x).sin() + 0.1 * (0.9 * x).cos());
    let u = grid.sample(|x| 3.0 + 0.5 * (0.3 * x).cos());
    let pin = Pin { index: 0, value: h[0] };
    let analytic = tw_jacobian(&h, &u, 1.2, pin, &params).unwrap();
    let mut z = h.values().to_vec();
    z.extend_from_slice(u.values());
    z.push(1.2);
    let fd = fd_jacobian(&z, |z| {
        let h = grid.field(z[..n].to_vec()).unwrap();
        let u = grid.field(z[n..2 * n].to_vec()).unwrap();
        tw_residual(&h, &u, z[2 * n], 50.0, pin, &params).unwrap()
    });
    let (worst, i, j) = worst_relative_mismatch(&analytic, &fd, 1e-8);
    assert!(worst < 1e-6, "entry ({i}, {j}) off by {worst:e}");
}
