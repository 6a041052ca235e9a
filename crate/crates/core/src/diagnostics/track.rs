use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::PeriodicField;
use crate::pde::FieldState;

/// Share of the most recent samples used for the speed fit.
pub const DEFAULT_TRAILING_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    /// Position in `[0, L)`.
    pub x: f64,
    pub h: f64,
}

/// Maximum of a periodic profile, refined by a three-point parabola through
/// the discrete argmax. `None` for a flat profile.
pub fn locate_peak(field: &PeriodicField) -> Option<Peak> {
    let values = field.values();
    let (imax, &top) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    let bottom = field.min();
    if !(top - bottom > 1e-12 * top.abs().max(1.0)) {
        return None;
    }
    let grid = field.grid();
    let left = values[grid.wrap(imax, -1)];
    let right = values[grid.wrap(imax, 1)];
    let curvature = left - 2.0 * top + right;
    let (offset, h) = if curvature < 0.0 {
        let offset = 0.5 * (left - right) / curvature;
        (offset, top - 0.25 * (left - right) * offset)
    } else {
        (0.0, top)
    };
    let x = (imax as f64 + offset) * grid.dx();
    Some(Peak {
        x: x.rem_euclid(grid.length()),
        h,
    })
}

/// Undo the periodic wrap of peak positions, taking the shortest
/// displacement between consecutive samples.
pub fn unwrap_positions(positions: &[f64], length: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(positions.len());
    for &x in positions {
        let next = match out.last() {
            None => x,
            Some(&prev) => {
                let jump = (x - prev).rem_euclid(length);
                let jump = if jump > 0.5 * length { jump - length } else { jump };
                prev + jump
            }
        };
        out.push(next);
    }
    out
}

fn least_squares_slope(t: &[f64], x: &[f64]) -> Option<f64> {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let xm = x.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (&ti, &xi) in t.iter().zip(x) {
        num += (ti - tm) * (xi - xm);
        den += (ti - tm) * (ti - tm);
    }
    (den > 0.0).then(|| num / den)
}

/// Speed from a least-squares line through the trailing half of the
/// `(t, x)` peak history; needs at least three samples.
pub(crate) fn fit_speed(peaks: &[(f64, f64)], length: f64) -> Option<f64> {
    fit_speed_window(peaks, length, DEFAULT_TRAILING_FRACTION)
}

pub(crate) fn fit_speed_window(peaks: &[(f64, f64)], length: f64, fraction: f64) -> Option<f64> {
    if peaks.len() < 3 {
        return None;
    }
    let t: Vec<f64> = peaks.iter().map(|p| p.0).collect();
    let x: Vec<f64> = peaks.iter().map(|p| p.1).collect();
    let x = unwrap_positions(&x, length);
    let start = trailing_start(peaks.len(), fraction);
    least_squares_slope(&t[start..], &x[start..])
}

fn trailing_start(n: usize, fraction: f64) -> usize {
    let keep = ((n as f64 * fraction).ceil() as usize).clamp(2, n);
    n - keep
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveTrack {
    pub times: Vec<f64>,
    pub peaks: Vec<Peak>,
    /// Peak positions with the periodic wrap removed.
    pub unwrapped: Vec<f64>,
    pub speed: f64,
}

/// Peak position of every snapshot and the propagation speed fitted over the
/// trailing half of the samples.
pub fn track_wave(snapshots: &[FieldState]) -> Result<WaveTrack> {
    track_wave_with_window(snapshots, DEFAULT_TRAILING_FRACTION)
}

pub fn track_wave_with_window(snapshots: &[FieldState], fraction: f64) -> Result<WaveTrack> {
    if snapshots.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "wave tracking needs at least 3 snapshots, got {}",
            snapshots.len()
        )));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "trailing window fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let mut peaks = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        let peak = locate_peak(&s.h).ok_or_else(|| {
            Error::InvalidParameter(format!("profile at t = {} has no unique peak", s.t))
        })?;
        peaks.push(peak);
    }
    let times: Vec<f64> = snapshots.iter().map(|s| s.t).collect();
    let raw: Vec<f64> = peaks.iter().map(|p| p.x).collect();
    let unwrapped = unwrap_positions(&raw, snapshots[0].grid().length());
    let start = trailing_start(times.len(), fraction);
    let speed = least_squares_slope(&times[start..], &unwrapped[start..]).ok_or_else(|| {
        Error::InvalidParameter("snapshot times in the trailing window coincide".into())
    })?;
    Ok(WaveTrack {
        times,
        peaks,
        unwrapped,
        speed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    fn bump(grid: Grid, centre: f64) -> PeriodicField {
        grid.sample(|x| 2.0 + 0.5 * (2.0 * PI * (x - centre) / grid.length()).cos())
    }

    #[test]
    fn parabolic_refinement_finds_offgrid_peak() {
        let grid = Grid::new(20.0, 400).unwrap();
        let peak = locate_peak(&bump(grid, 7.3217)).unwrap();
        assert!((peak.x - 7.3217).abs() < 1e-4);
        assert!((peak.h - 2.5).abs() < 1e-6);
        assert!(locate_peak(&grid.constant(2.0)).is_none());
    }

    #[test]
    fn synthetic_advection_speed() {
        let grid = Grid::new(20.0, 400).unwrap();
        let snapshots: Vec<FieldState> = (0..=40)
            .map(|k| {
                let t = 0.5 * k as f64;
                let h = bump(grid, 3.0 + t);
                FieldState::new(t, h.clone(), h).unwrap()
            })
            .collect();
        let track = track_wave(&snapshots).unwrap();
        assert!((track.speed - 1.0).abs() < 1e-3);
        assert!(track.unwrapped.last().unwrap() > &20.0);
    }

    #[test]
    fn flat_and_short_inputs_are_reported() {
        let grid = Grid::new(20.0, 64).unwrap();
        let flat = FieldState::new(0.0, grid.constant(2.0), grid.constant(3.0)).unwrap();
        let mut later = flat.clone();
        assert!(track_wave(&[flat.clone(), flat.clone()]).is_err());
        later.t = 1.0;
        let mut last = flat.clone();
        last.t = 2.0;
        assert!(track_wave(&[flat, later, last]).is_err());
    }

    #[test]
    fn unwrap_crosses_the_boundary() {
        let x = unwrap_positions(&[19.0, 0.5, 2.0, 19.5], 20.0);
        assert_eq!(x, vec![19.0, 20.5, 22.0, 19.5]);
    }
}
