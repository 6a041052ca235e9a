mod common;

use common::simpson;
use fibreflow::grid::{Grid, MIN_NODES};
use fibreflow::model::{
    arc_factor, arc_factor_prime, arc_factor_second, curvature, entropy_potential_g, laminar_i,
    mobility_g, slope_factor, EntropyPotential, FlowProfile, ModelParams,
};
use fibreflow::PeriodicField;
use proptest::prelude::*;

fn laminar() -> ModelParams {
    ModelParams::new(0.1, 11.0, 4.0, FlowProfile::Laminar)
}

fn plug() -> ModelParams {
    ModelParams::new(0.2, 10.0, 1.0, FlowProfile::Plug)
}

/// Closed form evaluated directly, without the series branch.
fn laminar_closed(h: f64) -> f64 {
    (4.0 * h.powi(4) * h.ln() + (h * h - 1.0) * (1.0 - 3.0 * h * h)) / 16.0
}

#[test]
fn hand_evaluated_model_values() {
    assert_eq!(slope_factor(0.0), 1.0);
    assert!((slope_factor(1.0) - 0.7071067811865476).abs() <= 2.0 * f64::EPSILON);
    assert!((arc_factor(1.0) - 1.4142135623730951).abs() <= 2.0 * f64::EPSILON);
    assert_eq!((arc_factor(0.0), arc_factor_prime(0.0), arc_factor_second(0.0)), (1.0, 0.0, 1.0));
    for z in [0.3, 2.0] {
        let fd = (arc_factor(z + 1e-5) - arc_factor(z - 1e-5)) / 2e-5;
        assert!((arc_factor_prime(z) - fd).abs() < 1e-8);
    }
    assert_eq!(laminar_i(1.0).unwrap(), 0.0);
    let i2 = 4.0 * 2f64.ln() - 33.0 / 16.0;
    assert!((laminar_i(2.0).unwrap() - i2).abs() < 1e-14);
    assert!((laminar_i(2.0).unwrap() - 0.710088).abs() < 1e-6);
    assert!(laminar_i(0.99).is_err());
    assert_eq!(mobility_g(2.0, &plug()).unwrap(), 3.0);
    assert!((mobility_g(2.0, &laminar()).unwrap() - 0.236696).abs() < 1e-6);
    assert!(mobility_g(1.0, &plug()).is_err());
    assert!((curvature(2.29, 0.0, 0.0) - 1.0 / 2.29).abs() < 1e-16);
    for q in [-1.0, 0.0, 1.0] {
        assert!((curvature(1.0, 0.0, q) - (1.0 - q)).abs() < 1e-15);
    }
    let expected = 1.0 / (2.0 * 2f64.sqrt()) - 0.5 / (2.0 * 2f64.sqrt());
    assert!((curvature(2.0, 1.0, 0.5) - expected).abs() < 1e-15);
    assert!((curvature(2.0, 1.0, 0.5) - 0.1767767).abs() < 1e-7);
}

#[test]
fn laminar_integral_near_the_fibre() {
    let eps: f64 = 1e-3;
    let leading = eps.powi(3) / 3.0;
    assert!(((laminar_i(1.0 + eps).unwrap() - leading) / leading).abs() < 0.01);
    // below the switch the closed form has lost most of its digits
    let tiny: f64 = 1e-5;
    let series = laminar_i(1.0 + tiny).unwrap();
    assert!(((series - tiny.powi(3) / 3.0) / series).abs() < 1e-4);
}

#[test]
fn potential_differences_match_quadrature() {
    let params = laminar();
    let g = |h: f64| laminar_closed(h) / (h * h - 1.0);
    let oracle = simpson(&|h| h / g(h), 1.5, 2.5, 1e-13);
    let direct = entropy_potential_g(2.5, &params).unwrap() - entropy_potential_g(1.5, &params).unwrap();
    assert!((direct - oracle).abs() < 1e-8, "{direct} vs {oracle}");
    let potential = EntropyPotential::new(&params).unwrap();
    assert_eq!(potential.eval(2.0).unwrap(), params.g_ref);
    assert!(potential.eval(2.5).unwrap() > potential.eval(1.5).unwrap());
    assert!(potential.eval(1.01).is_err());
    assert!(EntropyPotential::new(&plug()).is_err());
}

fn smooth(grid: Grid) -> PeriodicField {
    let k = 2.0 * std::f64::consts::PI / grid.length();
    grid.sample(|x| (k * x).sin().exp())
}

/// Max-norm errors of d1 and d2 on `exp(sin(kx))`.
fn derivative_errors(nodes: usize) -> (f64, f64) {
    let grid = Grid::new(20.0, nodes).unwrap();
    let k = 2.0 * std::f64::consts::PI / grid.length();
    let f = smooth(grid);
    let exact1 = grid.sample(|x| k * (k * x).cos() * (k * x).sin().exp());
    let exact2 = grid.sample(|x| {
        let (s, c) = ((k * x).sin(), (k * x).cos());
        k * k * (c * c - s) * s.exp()
    });
    (f.d1().max_abs_diff(&exact1), f.d2().max_abs_diff(&exact2))
}

#[test]
fn derivatives_converge_at_second_order() {
    let errors: Vec<(f64, f64)> = [64, 128, 256, 512].into_iter().map(derivative_errors).collect();
    for pair in errors.windows(2) {
        let r1 = pair[0].0 / pair[1].0;
        let r2 = pair[0].1 / pair[1].1;
        assert!((r1 - 4.0).abs() <= 0.3, "d1 ratio {r1}");
        assert!((r2 - 4.0).abs() <= 0.3, "d2 ratio {r2}");
    }
}

fn field_strategy(nodes: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, nodes)
}

proptest! {
    #[test]
    fn slope_and_arc_factors_are_reciprocal(z in -1e6..1e6f64) {
        let product = slope_factor(z) * arc_factor(z);
        prop_assert!((product - 1.0).abs() < 4.0 * f64::EPSILON);
        let f = slope_factor(z);
        prop_assert!((arc_factor_second(z) - f * f * f).abs() <= 4.0 * f64::EPSILON * f * f * f);
        prop_assert!(f > 0.0 && f <= 1.0);
        prop_assert_eq!(slope_factor(z), slope_factor(-z));
    }

    #[test]
    fn flat_profile_curvature_is_azimuthal(h0 in 1.0001..50.0f64) {
        prop_assert_eq!(curvature(h0, 0.0, 0.0), 1.0 / h0);
        let grid = Grid::new(20.0, 32).unwrap();
        let (k, p) = (grid.constant(h0).d1(), grid.constant(h0).d1().d1());
        prop_assert_eq!(curvature(h0, k[7], p[7]), 1.0 / h0);
    }

    #[test]
    fn laminar_integral_matches_closed_form(h in 1.01..20.0f64) {
        let direct = laminar_closed(h);
        prop_assert!(((laminar_i(h).unwrap() - direct) / direct).abs() < 1e-12);
    }

    #[test]
    fn laminar_integral_leading_term(eps in 1e-6..1e-3f64) {
        let leading = eps.powi(3) / 3.0;
        prop_assert!(((laminar_i(1.0 + eps).unwrap() - leading) / leading).abs() < 0.01);
    }

    #[test]
    fn plug_mobility_is_exact(h in 1.0001..100.0f64) {
        prop_assert_eq!(mobility_g(h, &plug()).unwrap(), h * h - 1.0);
    }

    #[test]
    fn differences_annihilate_constants(c in -1e3..1e3f64, nodes in MIN_NODES..200) {
        let field = Grid::new(7.0, nodes).unwrap().constant(c);
        prop_assert!(field.d1().values().iter().all(|&x| x == 0.0));
        prop_assert!(field.d2().values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn differences_commute_with_shifts(values in field_strategy(24), k in -30isize..30) {
        let f = Grid::new(20.0, 24).unwrap().field(values).unwrap();
        prop_assert_eq!(f.shift(k).d1(), f.d1().shift(k));
        prop_assert_eq!(f.shift(k).d2(), f.d2().shift(k));
    }

    #[test]
    fn summation_by_parts(f in field_strategy(40), g in field_strategy(40)) {
        let grid = Grid::new(20.0, 40).unwrap();
        let (f, g) = (grid.field(f).unwrap(), grid.field(g).unwrap());
        let lhs = f.d1().zip_map(&g, |a, b| a * b).integrate();
        let rhs = -f.zip_map(&g.d1(), |a, b| a * b).integrate();
        prop_assert!((lhs - rhs).abs() < 1e-11);
    }
}
