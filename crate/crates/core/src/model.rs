//! Closures of the control-volume fibre coating model.
//!
//! Everything here is a pure function of the film radius `h` (fibre radius
//! normalised to one) and its slope. The cross-sectional fluid area is
//! carried through the solvers as `v = h^2 - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cross-sectional velocity profile assumed by the drag closure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowProfile {
    /// Uniform velocity across the film, `g(h) = h^2 - 1`.
    Plug,
    /// Fully developed laminar profile, `g(h) = I(h) / (h^2 - 1)`.
    Laminar,
}

/// Physical constants of the model plus the free parameters of the entropy
/// functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Square of the Froude number.
    pub a: f64,
    /// Reciprocal Bond number.
    pub b: f64,
    /// Ratio of axial viscous to gravitational forces.
    pub c: f64,
    pub profile: FlowProfile,
    /// Interpolation parameter of the plug-flow entropy bound, in (0, 1).
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Weight of the laminar entropy functional, > 0.
    #[serde(default = "default_epsilon0")]
    pub epsilon0: f64,
    /// Smallest radius at which the laminar entropy potential is evaluated.
    #[serde(default = "default_gap_floor")]
    pub h_gap_floor: f64,
    /// Value of the laminar entropy potential at `h = 2`.
    #[serde(default)]
    pub g_ref: f64,
}

fn default_epsilon() -> f64 {
    0.5
}

fn default_epsilon0() -> f64 {
    0.1
}

fn default_gap_floor() -> f64 {
    1.05
}

impl ModelParams {
    pub fn new(a: f64, b: f64, c: f64, profile: FlowProfile) -> Self {
        Self {
            a,
            b,
            c,
            profile,
            epsilon: default_epsilon(),
            epsilon0: default_epsilon0(),
            h_gap_floor: default_gap_floor(),
            g_ref: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")))
            }
        };
        positive("a", self.a)?;
        positive("b", self.b)?;
        positive("c", self.c)?;
        positive("epsilon0", self.epsilon0)?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if !(self.h_gap_floor > 1.0 && self.h_gap_floor < POTENTIAL_REF_H) {
            return Err(Error::InvalidParameter(format!(
                "h_gap_floor must lie in (1, {POTENTIAL_REF_H}), got {}",
                self.h_gap_floor
            )));
        }
        if !self.g_ref.is_finite() {
            return Err(Error::InvalidParameter("g_ref must be finite".into()));
        }
        Ok(())
    }
}

/// `f(z) = (1 + z^2)^(-1/2)`.
#[inline]
pub fn slope_factor(z: f64) -> f64 {
    1.0 / z.hypot(1.0)
}

/// `Phi(z) = (1 + z^2)^(1/2)`, the arc-length density of the free surface.
#[inline]
pub fn arc_factor(z: f64) -> f64 {
    z.hypot(1.0)
}

/// `Phi'(z) = z f(z)`.
#[inline]
pub fn arc_factor_prime(z: f64) -> f64 {
    z * slope_factor(z)
}

/// `Phi''(z) = f(z)^3`.
#[inline]
pub fn arc_factor_second(z: f64) -> f64 {
    slope_factor(z).powi(3)
}

// Below this gap the closed form of I(h) cancels two O(1e-2) terms down to
// O(1e-7) and the series is used instead.
const SERIES_GAP: f64 = 1e-3;

/// Laminar profile integral `I(h) = [4 h^4 ln h + (h^2 - 1)(1 - 3 h^2)] / 16`.
pub fn laminar_i(h: f64) -> Result<f64> {
    if !(h >= 1.0) {
        return Err(Error::Domain { h });
    }
    let e = h - 1.0;
    if e < SERIES_GAP {
        // e^3/3 + e^4/3 + e^5/20 - e^6/120 + e^7/420 - e^8/1120
        let tail = 1.0 / 20.0 + e * (-1.0 / 120.0 + e * (1.0 / 420.0 - e / 1120.0));
        return Ok(e * e * e * (1.0 / 3.0 + e * (1.0 / 3.0 + e * tail)));
    }
    let h2 = h * h;
    Ok((4.0 * h2 * h2 * h.ln() + (h2 - 1.0) * (1.0 - 3.0 * h2)) / 16.0)
}

/// `I'(h) = h^3 ln h - h^3/2 + h/2`.
pub fn laminar_i_prime(h: f64) -> Result<f64> {
    if !(h >= 1.0) {
        return Err(Error::Domain { h });
    }
    let e = h - 1.0;
    if e < SERIES_GAP {
        // e^2 + 4e^3/3 + e^4/4 - e^5/20 + e^6/60 - e^7/140
        let tail = 0.25 + e * (-1.0 / 20.0 + e * (1.0 / 60.0 - e / 140.0));
        return Ok(e * e * (1.0 + e * (4.0 / 3.0 + e * tail)));
    }
    let h3 = h * h * h;
    Ok(h3 * h.ln() - 0.5 * h3 + 0.5 * h)
}

/// Drag mobility `g(h)`: the drag term of the momentum balance is `u / g(h)`.
pub fn mobility_g(h: f64, params: &ModelParams) -> Result<f64> {
    if !(h > 1.0) {
        return Err(Error::DegenerateMobility { h });
    }
    let v = h * h - 1.0;
    match params.profile {
        FlowProfile::Plug => Ok(v),
        FlowProfile::Laminar => Ok(laminar_i(h)? / v),
    }
}

/// Derivative of [`mobility_g`] with respect to `h`.
pub fn mobility_g_prime(h: f64, params: &ModelParams) -> Result<f64> {
    if !(h > 1.0) {
        return Err(Error::DegenerateMobility { h });
    }
    let v = h * h - 1.0;
    match params.profile {
        FlowProfile::Plug => Ok(2.0 * h),
        FlowProfile::Laminar => Ok(laminar_i_prime(h)? / v - 2.0 * h * laminar_i(h)? / (v * v)),
    }
}

/// Combined azimuthal and streamwise curvature `f(h_x)/h - f(h_x)^3 h_xx`.
#[inline]
pub fn curvature(h: f64, hx: f64, hxx: f64) -> f64 {
    let f = slope_factor(hx);
    f / h - f * f * f * hxx
}

/// Base point of the entropy potential normalisation.
pub const POTENTIAL_REF_H: f64 = 2.0;

// Upper end of the tabulated range; larger radii are integrated on demand.
const POTENTIAL_TABLE_MAX_H: f64 = 12.0;
// Table spacing in ln(h - 1).
const POTENTIAL_TABLE_STEP: f64 = 2e-3;

const GAUSS_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Eight-point Gauss-Legendre rule on `[lo, hi]`.
fn gauss8(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut sum = 0.0;
    for (x, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
        sum += w * (f(mid - half * x) + f(mid + half * x));
    }
    sum * half
}

/// Laminar entropy potential `G(h)` with `G'(h) = h / g(h)`.
///
/// The integrand behaves like `6 / (h - 1)^2` near the fibre, so `G` is only
/// available for `h >= h_gap_floor`. It is normalised by `G(2) = g_ref`.
/// Values are tabulated once on a grid uniform in `ln(h - 1)` and read back
/// with cubic Hermite interpolation using the exact derivative.
#[derive(Debug, Clone)]
pub struct EntropyPotential {
    params: ModelParams,
    log_gap_start: f64,
    cumulative: Vec<f64>,
    offset: f64,
}

impl EntropyPotential {
    pub fn new(params: &ModelParams) -> Result<Self> {
        if params.profile != FlowProfile::Laminar {
            return Err(Error::InvalidParameter(
                "the entropy potential is defined for the laminar profile only".into(),
            ));
        }
        params.validate()?;
        let log_gap_start = (params.h_gap_floor - 1.0).ln();
        let log_gap_end = (POTENTIAL_TABLE_MAX_H - 1.0).ln();
        let intervals = ((log_gap_end - log_gap_start) / POTENTIAL_TABLE_STEP).ceil() as usize;
        let mut cumulative = Vec::with_capacity(intervals + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for k in 0..intervals {
            let lo = log_gap_start + k as f64 * POTENTIAL_TABLE_STEP;
            acc += gauss8(lo, lo + POTENTIAL_TABLE_STEP, |t| {
                let gap = t.exp();
                gap * density(1.0 + gap, params)
            });
            cumulative.push(acc);
        }
        let mut potential = Self {
            params: *params,
            log_gap_start,
            cumulative,
            offset: 0.0,
        };
        potential.offset = potential.table(POTENTIAL_REF_H);
        Ok(potential)
    }

    pub fn floor(&self) -> f64 {
        self.params.h_gap_floor
    }

    pub fn eval(&self, h: f64) -> Result<f64> {
        if !(h >= self.params.h_gap_floor) {
            return Err(Error::BelowPotentialFloor {
                h,
                floor: self.params.h_gap_floor,
            });
        }
        Ok(self.params.g_ref + self.table(h) - self.offset)
    }

    /// `G'(h) = h / g(h)`.
    pub fn derivative(&self, h: f64) -> f64 {
        density(h, &self.params)
    }

    fn table(&self, h: f64) -> f64 {
        let last = self.cumulative.len() - 1;
        let t_max = self.log_gap_start + last as f64 * POTENTIAL_TABLE_STEP;
        let t = (h - 1.0).ln();
        if t >= t_max {
            let h_max = 1.0 + t_max.exp();
            let pieces = ((h - h_max) / 0.25).ceil().max(1.0) as usize;
            let width = (h - h_max) / pieces as f64;
            let extra: f64 = (0..pieces)
                .map(|k| {
                    let lo = h_max + k as f64 * width;
                    gauss8(lo, lo + width, |s| density(s, &self.params))
                })
                .sum();
            return self.cumulative[last] + extra;
        }
        let pos = ((t - self.log_gap_start) / POTENTIAL_TABLE_STEP).max(0.0);
        let k = (pos.floor() as usize).min(last - 1);
        let t0 = self.log_gap_start + k as f64 * POTENTIAL_TABLE_STEP;
        let s = (t - t0) / POTENTIAL_TABLE_STEP;
        let slope = |tk: f64| {
            let gap = tk.exp();
            gap * density(1.0 + gap, &self.params) * POTENTIAL_TABLE_STEP
        };
        let (y0, y1) = (self.cumulative[k], self.cumulative[k + 1]);
        let (m0, m1) = (slope(t0), slope(t0 + POTENTIAL_TABLE_STEP));
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1
    }
}

fn density(h: f64, params: &ModelParams) -> f64 {
    // h > 1 is guaranteed by every caller
    h / mobility_g(h, params).expect("radius above the fibre")
}

/// One-off evaluation of the laminar entropy potential. Loops should build an
/// [`EntropyPotential`] once and reuse it.
pub fn entropy_potential_g(h: f64, params: &ModelParams) -> Result<f64> {
    EntropyPotential::new(params)?.eval(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laminar() -> ModelParams {
        ModelParams::new(0.1, 11.0, 4.0, FlowProfile::Laminar)
    }

    #[test]
    fn slope_and_arc_factor_values() {
        assert_eq!(slope_factor(0.0), 1.0);
        assert!((slope_factor(1.0) - 0.707_106_781_186_547_6).abs() < 1e-15);
        assert!((arc_factor(1.0) - 1.414_213_562_373_095_1).abs() < 1e-15);
        assert_eq!(arc_factor_prime(0.0), 0.0);
        assert_eq!(arc_factor_second(0.0), 1.0);
        for z in [0.5, 1.0, 3.0] {
            assert!((slope_factor(z) * arc_factor(z) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn arc_factor_prime_matches_central_difference() {
        let step = 1e-5;
        for z in [0.3, 2.0] {
            let fd = (arc_factor(z + step) - arc_factor(z - step)) / (2.0 * step);
            assert!((fd - arc_factor_prime(z)).abs() < 1e-8);
            let fd2 = (arc_factor_prime(z + step) - arc_factor_prime(z - step)) / (2.0 * step);
            assert!((fd2 - arc_factor_second(z)).abs() < 1e-8);
        }
    }

    #[test]
    fn laminar_integral_values() {
        assert_eq!(laminar_i(1.0).unwrap(), 0.0);
        let expected = 4.0 * 2f64.ln() - 33.0 / 16.0;
        assert!((laminar_i(2.0).unwrap() - expected).abs() < 1e-14);
        assert!((laminar_i(2.0).unwrap() - 0.710_088).abs() < 1e-6);
        let e = 1e-3;
        let leading = e * e * e / 3.0;
        assert!(((laminar_i(1.0 + e).unwrap() - leading) / leading).abs() < 1e-2);
        assert!(matches!(laminar_i(0.99), Err(Error::Domain { .. })));
        assert!(laminar_i(f64::NAN).is_err());
    }

    #[test]
    fn series_branch_is_continuous_with_closed_form() {
        // the closed form keeps ~9 digits at the switch point
        let below = laminar_i(1.0 + SERIES_GAP * (1.0 - 1e-12)).unwrap();
        let above = laminar_i(1.0 + SERIES_GAP).unwrap();
        assert!(((below - above) / above).abs() < 1e-7);
        let below = laminar_i_prime(1.0 + SERIES_GAP * (1.0 - 1e-12)).unwrap();
        let above = laminar_i_prime(1.0 + SERIES_GAP).unwrap();
        assert!(((below - above) / above).abs() < 1e-8);
    }

    #[test]
    fn mobility_values() {
        let plug = ModelParams::new(0.2, 10.0, 1.0, FlowProfile::Plug);
        assert_eq!(mobility_g(2.0, &plug).unwrap(), 3.0);
        assert!((mobility_g(2.0, &laminar()).unwrap() - 0.236_696).abs() < 1e-6);
        assert!(matches!(
            mobility_g(1.0, &plug),
            Err(Error::DegenerateMobility { .. })
        ));
        let mut prev = f64::INFINITY;
        for k in 1..10 {
            let g = mobility_g(1.0 + 10f64.powi(-k), &plug).unwrap();
            assert!(g > 0.0 && g < prev);
            prev = g;
        }
    }

    #[test]
    fn mobility_prime_matches_central_difference() {
        let plug = ModelParams::new(0.2, 10.0, 1.0, FlowProfile::Plug);
        for params in [plug, laminar()] {
            for h in [1.2, 2.29, 4.0] {
                let step = 1e-6;
                let fd = (mobility_g(h + step, &params).unwrap()
                    - mobility_g(h - step, &params).unwrap())
                    / (2.0 * step);
                let exact = mobility_g_prime(h, &params).unwrap();
                assert!((fd - exact).abs() < 1e-7 * exact.abs().max(1.0));
            }
        }
    }

    #[test]
    fn curvature_values() {
        assert!((curvature(2.29, 0.0, 0.0) - 1.0 / 2.29).abs() < 1e-15);
        for q in [-1.0, 0.0, 1.0] {
            assert_eq!(curvature(1.0, 0.0, q), 1.0 - q);
        }
        assert!((curvature(2.0, 1.0, 0.5) - 0.176_776_7).abs() < 1e-7);
    }

    #[test]
    fn potential_is_normalised_and_increasing() {
        let params = laminar();
        let g = EntropyPotential::new(&params).unwrap();
        assert_eq!(g.eval(POTENTIAL_REF_H).unwrap(), 0.0);
        assert!(g.eval(2.5).unwrap() > g.eval(1.5).unwrap());
        let mut prev = f64::NEG_INFINITY;
        for k in 0..200 {
            let value = g.eval(1.05 + 0.07 * k as f64).unwrap();
            assert!(value > prev);
            prev = value;
        }
        assert!(matches!(
            g.eval(1.01),
            Err(Error::BelowPotentialFloor { .. })
        ));
        let shifted = ModelParams {
            g_ref: 3.5,
            ..params
        };
        assert_eq!(entropy_potential_g(2.0, &shifted).unwrap(), 3.5);
        let plug = ModelParams::new(0.2, 10.0, 1.0, FlowProfile::Plug);
        assert!(EntropyPotential::new(&plug).is_err());
    }

    #[test]
    fn parameter_validation() {
        let mut params = ModelParams::new(0.2, 10.0, 1.0, FlowProfile::Plug);
        assert!(params.validate().is_ok());
        params.epsilon = 1.0;
        assert!(params.validate().is_err());
        params.epsilon = 0.5;
        params.c = 0.0;
        assert!(params.validate().is_err());
    }
}
