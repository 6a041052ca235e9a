//! Uniform periodic mesh and the centred difference operators shared by the
//! transient and travelling-wave solvers.

mod linalg;

use std::ops::{Index, IndexMut};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use linalg::{solve_dense, DenseLu, DenseMatrix, PeriodicBandLu, PeriodicBandMatrix};

pub const MIN_NODES: usize = 8;

/// Periodic mesh on `[0, length)` with `nodes` points `x_i = i * dx`; the
/// right endpoint is identified with the left one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    length: f64,
    nodes: usize,
}

impl Grid {
    pub fn new(length: f64, nodes: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "domain length must be positive, got {length}"
            )));
        }
        if nodes < MIN_NODES {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least {MIN_NODES} nodes, got {nodes}"
            )));
        }
        Ok(Self { length, nodes })
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.length / self.nodes as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.x(i)).collect()
    }

    /// Index `i + offset` wrapped onto `0..len`.
    #[inline]
    pub fn wrap(&self, i: usize, offset: isize) -> usize {
        let n = self.nodes as isize;
        (i as isize + offset).rem_euclid(n) as usize
    }

    pub fn field(&self, values: Vec<f64>) -> Result<PeriodicField> {
        PeriodicField::new(*self, values)
    }

    pub fn constant(&self, value: f64) -> PeriodicField {
        PeriodicField {
            grid: *self,
            values: vec![value; self.nodes],
        }
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> PeriodicField {
        PeriodicField {
            grid: *self,
            values: (0..self.nodes).map(|i| f(self.x(i))).collect(),
        }
    }
}

/// Nodal values of a periodic function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    grid: Grid,
    values: Vec<f64>,
}

impl PeriodicField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values on a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&x, &y)| f(x, y))
                .collect(),
        }
    }

    /// Centred first difference `(f_{i+1} - f_{i-1}) / (2 dx)`.
    pub fn d1(&self) -> Self {
        let mut out = vec![0.0; self.len()];
        d1_into(&self.values, self.grid.dx(), &mut out);
        Self {
            grid: self.grid,
            values: out,
        }
    }

    /// Compact centred second difference `(f_{i+1} - 2 f_i + f_{i-1}) / dx^2`.
    pub fn d2(&self) -> Self {
        let mut out = vec![0.0; self.len()];
        d2_into(&self.values, self.grid.dx(), &mut out);
        Self {
            grid: self.grid,
            values: out,
        }
    }

    /// Rectangle rule `dx * sum f_i`.
    pub fn integrate(&self) -> f64 {
        self.grid.dx() * self.values.iter().sum::<f64>()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Circular shift by `k` nodes: `out_i = f_{i-k}`, i.e. the profile moves
    /// right by `k * dx`.
    pub fn shift(&self, k: isize) -> Self {
        let values = (0..self.len())
            .map(|i| self.values[self.grid.wrap(i, -k)])
            .collect();
        Self {
            grid: self.grid,
            values,
        }
    }

    /// Translate the profile right by a distance `delta` (any real number)
    /// using trigonometric interpolation of the nodal values.
    pub fn translate(&self, delta: f64) -> Self {
        let n = self.len();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let mut buf: Vec<Complex<f64>> = self.values.iter().map(|&x| Complex::new(x, 0.0)).collect();
        forward.process(&mut buf);
        let base = -2.0 * std::f64::consts::PI * delta / self.grid.length();
        for (k, c) in buf.iter_mut().enumerate() {
            let wavenumber = if 2 * k < n {
                k as f64
            } else if 2 * k == n {
                // Nyquist mode: keep the real (cosine) part only
                let phase = Complex::from_polar(1.0, base * k as f64);
                *c = Complex::new((*c * phase).re, 0.0);
                continue;
            } else {
                k as f64 - n as f64
            };
            *c *= Complex::from_polar(1.0, base * wavenumber);
        }
        inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        Self {
            grid: self.grid,
            values: buf.iter().map(|c| c.re * scale).collect(),
        }
    }

    /// Linear interpolation of the periodic profile onto another grid with
    /// the same length.
    pub fn resample(&self, target: Grid) -> Result<Self> {
        if (target.length() - self.grid.length()).abs() > 1e-12 * self.grid.length() {
            return Err(Error::InvalidParameter(format!(
                "cannot resample from length {} to length {}",
                self.grid.length(),
                target.length()
            )));
        }
        let n = self.len();
        let dx = self.grid.dx();
        let values = (0..target.len())
            .map(|j| {
                let pos = target.x(j) / dx;
                let i = pos.floor() as usize % n;
                let w = pos - pos.floor();
                (1.0 - w) * self.values[i] + w * self.values[(i + 1) % n]
            })
            .collect();
        Ok(Self {
            grid: target,
            values,
        })
    }
}

impl Index<usize> for PeriodicField {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl IndexMut<usize> for PeriodicField {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

/// Slice form of [`PeriodicField::d1`].
pub fn d1_into(f: &[f64], dx: f64, out: &mut [f64]) {
    let n = f.len();
    let scale = 0.5 / dx;
    for i in 0..n {
        let next = f[if i + 1 == n { 0 } else { i + 1 }];
        let prev = f[if i == 0 { n - 1 } else { i - 1 }];
        out[i] = (next - prev) * scale;
    }
}

/// Slice form of [`PeriodicField::d2`].
pub fn d2_into(f: &[f64], dx: f64, out: &mut [f64]) {
    let n = f.len();
    let scale = 1.0 / (dx * dx);
    for i in 0..n {
        let next = f[if i + 1 == n { 0 } else { i + 1 }];
        let prev = f[if i == 0 { n - 1 } else { i - 1 }];
        out[i] = (next - 2.0 * f[i] + prev) * scale;
    }
}
