use std::path::{Path, PathBuf};

use super::config::{CaseFile, GuessSpec};
use super::io::{
    self, DiagnosticsRow, DiagnosticsWriter, ProfileHeader, RunStatus, RunSummary,
    TrajectoryWriter, DIAGNOSTICS_FILE, SUMMARY_FILE, TRAJECTORY_FILE,
};
use super::{exit_code, EXIT_CONFIG, EXIT_MISMATCH, EXIT_OK, EXIT_SOLVER};
use crate::diagnostics::{certify, recompute, DiagnosticsSample, Monitor};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::ModelParams;
use crate::pde::{initial_condition, run_with, FieldState, RunConfig};
use crate::travelling::{
    first_integral_check, relaxation_guess, solve_tw, InitialGuess, Pin, TwSolveConfig,
};

/// Agreement required between stored and recomputed diagnostics: absolute
/// below magnitude one, relative above.
pub const CHECK_TOL: f64 = 1e-8;

fn report(err: &Error) -> u8 {
    eprintln!("error: {err}");
    exit_code(err)
}

fn default_out_dir(config_path: &Path) -> PathBuf {
    let stem = config_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    PathBuf::from(format!("{stem}-out"))
}

/// `fibreflow pde`.
pub fn cmd_pde(config_path: &Path, out: Option<&Path>) -> u8 {
    let prepared = CaseFile::load(config_path).and_then(|case| {
        let run = case.run_config()?;
        let grid = run.grid()?;
        // reject an inadmissible start before any file is created
        initial_condition(grid, run.ic.h0, run.ic.amplitude, &run.params)
            .map_err(|e| Error::Config(e.to_string()))?;
        let dir = out
            .map(Path::to_path_buf)
            .or(case.out_dir.clone())
            .unwrap_or_else(|| default_out_dir(config_path));
        Ok((run, dir))
    });
    let (run, dir) = match prepared {
        Ok(prepared) => prepared,
        Err(err) => return report(&err),
    };
    match execute_pde(&run, &dir) {
        Ok(summary) => {
            let c = &summary.certification;
            println!(
                "{}: {} snapshots, mass drift {:e}, certification {}",
                dir.display(),
                summary.snapshots,
                summary.relative_mass_drift,
                if c.pass { "pass" } else { "fail" }
            );
            match &summary.failure {
                Some(failure) => {
                    eprintln!("solver failure at t = {}: {}", failure.t, failure.message);
                    EXIT_SOLVER
                }
                None => EXIT_OK,
            }
        }
        Err(err) => report(&err),
    }
}

fn execute_pde(run: &RunConfig, dir: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut trajectory = TrajectoryWriter::create(&dir.join(TRAJECTORY_FILE))?;
    let mut diagnostics = DiagnosticsWriter::create(&dir.join(DIAGNOSTICS_FILE))?;
    let initial = initial_condition(run.grid()?, run.ic.h0, run.ic.amplitude, &run.params)?;
    let monitor = Monitor::new(&initial, &run.params)?;
    let mut samples: Vec<DiagnosticsSample> = Vec::new();
    let failure = run_with(run, |state, sample| {
        trajectory.write(state)?;
        diagnostics.write(sample)?;
        samples.push(sample.clone());
        Ok(())
    })?;
    if let Some(failure) = &failure {
        trajectory.write_failure(failure)?;
        diagnostics.write_failure(failure)?;
    }
    let report = certify(&samples);
    let initial_mass = monitor.initial_mass();
    let final_mass = samples.last().map_or(initial_mass, |s| s.mass);
    let summary = RunSummary {
        config: run.clone(),
        status: if failure.is_some() {
            RunStatus::SolverFailure
        } else {
            RunStatus::Completed
        },
        failure: failure.map(|f| io::FailureInfo {
            t: f.t,
            message: f.message,
        }),
        snapshots: samples.len(),
        initial_mass,
        final_mass,
        relative_mass_drift: (final_mass - initial_mass).abs() / initial_mass,
        initial_energy: monitor.initial_energy(),
        initial_s1: monitor.initial_s1(),
        initial_s2: monitor.initial_s2(),
        speed_estimate: samples.last().and_then(|s| s.speed_estimate),
        certification: (&report).into(),
    };
    io::write_summary(&dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

/// Command-line overrides for `fibreflow tw`.
#[derive(Debug, Clone, Default)]
pub struct TwOptions {
    pub guess: Option<PathBuf>,
    pub resample: bool,
    pub out: Option<PathBuf>,
}

/// `fibreflow tw`.
pub fn cmd_tw(config_path: &Path, options: &TwOptions) -> u8 {
    match execute_tw(config_path, options) {
        Ok((path, header)) => {
            println!(
                "{}: s = {}, q0 = {}, first-integral violation {:e}",
                path.display(),
                header.s,
                header.q0,
                header.first_integral_violation
            );
            EXIT_OK
        }
        Err(err) => report(&err),
    }
}

fn guess_from_file(
    path: &Path,
    grid: Grid,
    resample: bool,
    params: &ModelParams,
) -> Result<InitialGuess> {
    let profile = io::read_profile(path)?;
    let n = profile.xi.len();
    let length = profile.value("L").unwrap_or(grid.length());
    let stored_speed = profile.value("s");
    let own = Grid::new(length, n).map_err(|e| Error::Config(e.to_string()))?;
    let h = own.field(profile.h)?;
    let u = own.field(profile.u)?;
    let (h, u) = if own == grid {
        (h, u)
    } else if resample {
        let h = h.resample(grid).map_err(|e| Error::Config(e.to_string()))?;
        let u = u.resample(grid).map_err(|e| Error::Config(e.to_string()))?;
        (h, u)
    } else {
        return Err(Error::Config(format!(
            "{}: guess has {n} nodes on length {length} but the grid has {} nodes on length {}; \
             pass --resample to interpolate it linearly onto the grid",
            path.display(),
            grid.len(),
            grid.length()
        )));
    };
    let speed = match stored_speed {
        Some(s) => s,
        None => {
            let mean_u = u.values().iter().sum::<f64>() / grid.len() as f64;
            params.a * mean_u
        }
    };
    let state = FieldState::new(0.0, h, u)?;
    Ok(InitialGuess::FromTrajectory { state, speed })
}

fn execute_tw(config_path: &Path, options: &TwOptions) -> Result<(PathBuf, ProfileHeader)> {
    let case = CaseFile::load(config_path)?;
    let tw = case.tw_section()?;
    let grid = case.grid()?;
    let params = case.params;
    let mass = case.tw_mass()?;
    let out = options
        .out
        .clone()
        .or(tw.out.clone())
        .unwrap_or_else(|| PathBuf::from("tw_profile.csv"));

    let guess = match (&options.guess, &tw.guess) {
        (Some(path), _) => guess_from_file(path, grid, options.resample, &params)?,
        (None, GuessSpec::File { path }) => {
            let path = match config_path.parent() {
                Some(base) if path.is_relative() => base.join(path),
                _ => path.clone(),
            };
            guess_from_file(&path, grid, options.resample, &params)?
        }
        (None, GuessSpec::CosineBump { amplitude }) => InitialGuess::CosineBump {
            amplitude: *amplitude,
        },
        (None, GuessSpec::Relaxation { settings }) => {
            relaxation_guess(grid, mass, &params, settings)
                .map_err(|e| Error::Solver(format!("relaxation guess failed: {e}")))?
        }
    };
    let config = TwSolveConfig {
        pin: tw.pin_index.zip(tw.pin_value).map(|(index, value)| Pin { index, value }),
        tol: tw.tol,
        max_iter: tw.max_iter,
        initial_guess: guess,
    };
    let solution = solve_tw(&config, mass, &params, grid)?;
    if solution.roundoff_limited {
        eprintln!(
            "note: residual {:e} stalled at the roundoff floor above tol {:e}",
            solution.residual, tw.tol
        );
    }
    let wave = &solution.wave;
    let header = ProfileHeader {
        s: wave.s,
        q0: wave.q0,
        mass: wave.mass,
        length: grid.length(),
        first_integral_violation: first_integral_check(wave, &params)?,
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    io::write_profile(&out, &header, &wave.h, &wave.u)?;
    Ok((out, header))
}

/// Result of `fibreflow check`.
#[derive(Debug, Clone, PartialEq)]
pub enum CheckOutcome {
    Pass { rows: usize },
    /// Missing or unreadable files.
    Unreadable(String),
    /// `row` counts data rows from 1; `line` is the file line.
    Mismatch {
        row: usize,
        line: usize,
        column: String,
        stored: String,
        recomputed: String,
    },
    CertificationFailed { t: f64 },
}

impl CheckOutcome {
    pub fn code(&self) -> u8 {
        match self {
            CheckOutcome::Pass { rows } => {
                println!("check passed: {rows} diagnostics rows reproduced and certified");
                EXIT_OK
            }
            CheckOutcome::Unreadable(message) => {
                eprintln!("error: {message}");
                EXIT_CONFIG
            }
            CheckOutcome::Mismatch {
                row,
                line,
                column,
                stored,
                recomputed,
            } => {
                eprintln!(
                    "mismatch: {DIAGNOSTICS_FILE} row {row} (line {line}), column {column}: stored {stored}, recomputed {recomputed}"
                );
                EXIT_MISMATCH
            }
            CheckOutcome::CertificationFailed { t } => {
                eprintln!("certification failed at t = {t}");
                EXIT_MISMATCH
            }
        }
    }
}

fn agrees(stored: f64, recomputed: f64) -> bool {
    let scale = stored.abs().max(recomputed.abs()).max(1.0);
    (stored - recomputed).abs() <= CHECK_TOL * scale
}

/// `fibreflow check`: rebuild the initial state from the manifest, recompute
/// the diagnostics of every stored snapshot and compare.
pub fn cmd_check(dir: &Path) -> CheckOutcome {
    let loaded = (|| -> Result<_> {
        let summary = io::read_summary(&dir.join(SUMMARY_FILE))?;
        let run = summary.config;
        let grid = run.grid()?;
        let snapshots = io::read_trajectory(&dir.join(TRAJECTORY_FILE), grid)?;
        let stored = io::read_diagnostics(&dir.join(DIAGNOSTICS_FILE))?;
        let initial = initial_condition(grid, run.ic.h0, run.ic.amplitude, &run.params)?;
        Ok((run.params, initial, snapshots, stored))
    })();
    let (params, initial, snapshots, stored) = match loaded {
        Ok(loaded) => loaded,
        Err(err) => return CheckOutcome::Unreadable(err.to_string()),
    };
    let recomputed = match recompute(&initial, &snapshots, &params) {
        Ok(samples) => samples,
        Err(err) => {
            return CheckOutcome::Mismatch {
                row: 0,
                line: 0,
                column: "(all)".into(),
                stored: format!("{} rows", stored.rows.len()),
                recomputed: format!("error: {err}"),
            }
        }
    };
    if recomputed.len() != stored.rows.len() {
        return CheckOutcome::Mismatch {
            row: stored.rows.len().min(recomputed.len()) + 1,
            line: stored.rows.last().map_or(1, |r| r.0),
            column: "(row count)".into(),
            stored: stored.rows.len().to_string(),
            recomputed: recomputed.len().to_string(),
        };
    }
    for (k, ((line, row), sample)) in stored.rows.iter().zip(&recomputed).enumerate() {
        let fresh = DiagnosticsRow::from(sample);
        for (j, (a, b)) in row.numbers().iter().zip(fresh.numbers()).enumerate() {
            let same = match (a, b) {
                (Some(a), Some(b)) => agrees(*a, b),
                (None, None) => true,
                _ => false,
            };
            if !same {
                let show = |x: Option<f64>| x.map_or("(empty)".to_string(), io::fmt_f64);
                return CheckOutcome::Mismatch {
                    row: k + 1,
                    line: *line,
                    column: DiagnosticsRow::COLUMNS[j].into(),
                    stored: show(*a),
                    recomputed: show(b),
                };
            }
        }
        if row.certified != fresh.certified {
            let word = |c: bool| if c { "pass" } else { "fail" }.to_string();
            return CheckOutcome::Mismatch {
                row: k + 1,
                line: *line,
                column: "certified".into(),
                stored: word(row.certified),
                recomputed: word(fresh.certified),
            };
        }
    }
    let report = certify(&recomputed);
    if let Some(failure) = report.first_failure() {
        return CheckOutcome::CertificationFailed { t: failure.t };
    }
    CheckOutcome::Pass {
        rows: recomputed.len(),
    }
}
