//! CSV and JSON files written and read by the command-line tool. Floats are
//! printed with the shortest representation that parses back to the same
//! binary64 value.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{CertificationReport, DiagnosticsSample};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::pde::{FieldState, RunConfig, RunFailure};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const SUMMARY_FILE: &str = "summary.json";

pub const TRAJECTORY_HEADER: &str = "t,x,h,u";
pub const DIAGNOSTICS_HEADER: &str = "t,mass,energy,cum_dissipation,c0_bound,entropy_integral,c1_bound,c3_bound,s1,peak_x,peak_h,speed_estimate,certified";
pub const PROFILE_HEADER: &str = "xi,H,U";

pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn failure_marker(failure: &RunFailure) -> String {
    let message = failure.message.replace(['\n', '\r'], " ");
    format!("# failure t={} message={message}", fmt_f64(failure.t))
}

/// Line-buffered CSV output flushed after every record.
struct CsvFile {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvFile {
    fn create(path: &Path, header: &str) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut csv = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        csv.line(header)?;
        csv.flush()?;
        Ok(csv)
    }

    fn line(&mut self, line: &str) -> Result<()> {
        writeln!(self.out, "{line}").map_err(|e| Error::io(&self.path, e))
    }

    fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub struct TrajectoryWriter(CsvFile);

impl TrajectoryWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self(CsvFile::create(path, TRAJECTORY_HEADER)?))
    }

    pub fn write(&mut self, state: &FieldState) -> Result<()> {
        let t = fmt_f64(state.t);
        let grid = state.grid();
        for i in 0..grid.len() {
            let line = format!(
                "{t},{},{},{}",
                fmt_f64(grid.x(i)),
                fmt_f64(state.h[i]),
                fmt_f64(state.u[i])
            );
            self.0.line(&line)?;
        }
        self.0.flush()
    }

    pub fn write_failure(&mut self, failure: &RunFailure) -> Result<()> {
        self.0.line(&failure_marker(failure))?;
        self.0.flush()
    }
}

pub struct DiagnosticsWriter(CsvFile);

impl DiagnosticsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self(CsvFile::create(path, DIAGNOSTICS_HEADER)?))
    }

    pub fn write(&mut self, sample: &DiagnosticsSample) -> Result<()> {
        let row = DiagnosticsRow::from(sample);
        self.0.line(&row.to_line())?;
        self.0.flush()
    }

    pub fn write_failure(&mut self, failure: &RunFailure) -> Result<()> {
        self.0.line(&failure_marker(failure))?;
        self.0.flush()
    }
}

/// One row of `diagnostics.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub cum_dissipation: f64,
    pub c0_bound: f64,
    pub entropy_integral: f64,
    pub c1_bound: Option<f64>,
    pub c3_bound: Option<f64>,
    pub s1: Option<f64>,
    pub peak_x: Option<f64>,
    pub peak_h: Option<f64>,
    pub speed_estimate: Option<f64>,
    pub certified: bool,
}

impl From<&DiagnosticsSample> for DiagnosticsRow {
    fn from(s: &DiagnosticsSample) -> Self {
        Self {
            t: s.t,
            mass: s.mass,
            energy: s.energy,
            cum_dissipation: s.cum_dissipation,
            c0_bound: s.c0_bound,
            entropy_integral: s.entropy_integral,
            c1_bound: s.c1_bound,
            c3_bound: s.c3_bound,
            s1: s.s1,
            peak_x: s.peak_x,
            peak_h: s.peak_h,
            speed_estimate: s.speed_estimate,
            certified: s.certified,
        }
    }
}

impl DiagnosticsRow {
    pub const COLUMNS: [&'static str; 13] = [
        "t",
        "mass",
        "energy",
        "cum_dissipation",
        "c0_bound",
        "entropy_integral",
        "c1_bound",
        "c3_bound",
        "s1",
        "peak_x",
        "peak_h",
        "speed_estimate",
        "certified",
    ];

    /// The numeric columns in file order.
    pub fn numbers(&self) -> [Option<f64>; 12] {
        [
            Some(self.t),
            Some(self.mass),
            Some(self.energy),
            Some(self.cum_dissipation),
            Some(self.c0_bound),
            Some(self.entropy_integral),
            self.c1_bound,
            self.c3_bound,
            self.s1,
            self.peak_x,
            self.peak_h,
            self.speed_estimate,
        ]
    }

    fn to_line(&self) -> String {
        let mut cells: Vec<String> = self.numbers().iter().map(|x| fmt_opt(*x)).collect();
        cells.push(if self.certified { "pass" } else { "fail" }.into());
        cells.join(",")
    }
}

/// Body lines of a CSV file with the expected header, each with its 1-based
/// line number; `# failure` markers are returned separately and other
/// comment lines skipped.
struct CsvBody {
    rows: Vec<(usize, Vec<String>)>,
    failure: Option<String>,
    comments: Vec<String>,
}

fn read_csv(path: &Path, header: &str) -> Result<CsvBody> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parse = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut body = CsvBody {
        rows: Vec::new(),
        failure: None,
        comments: Vec::new(),
    };
    let mut seen_header = false;
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let number = k + 1;
        let line = line.trim_end();
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(failure) = comment.strip_prefix("failure ") {
                body.failure = Some(failure.to_string());
            } else {
                body.comments.push(comment.to_string());
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if !seen_header {
            if line != header {
                return Err(parse(number, format!("expected header `{header}`, found `{line}`")));
            }
            seen_header = true;
            continue;
        }
        let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
        let width = header.split(',').count();
        if cells.len() != width {
            return Err(parse(number, format!("expected {width} columns, found {}", cells.len())));
        }
        body.rows.push((number, cells));
    }
    if !seen_header {
        return Err(parse(1, format!("missing header `{header}`")));
    }
    Ok(body)
}

fn parse_number(path: &Path, line: usize, column: &str, cell: &str) -> Result<f64> {
    cell.parse::<f64>().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("column {column}: `{cell}` is not a number"),
    })
}

fn parse_optional(path: &Path, line: usize, column: &str, cell: &str) -> Result<Option<f64>> {
    if cell.is_empty() {
        Ok(None)
    } else {
        parse_number(path, line, column, cell).map(Some)
    }
}

/// Rows of `diagnostics.csv` with their line numbers.
#[derive(Debug, Clone)]
pub struct DiagnosticsFile {
    pub rows: Vec<(usize, DiagnosticsRow)>,
    pub failure: Option<String>,
}

pub fn read_diagnostics(path: &Path) -> Result<DiagnosticsFile> {
    let body = read_csv(path, DIAGNOSTICS_HEADER)?;
    let mut rows = Vec::with_capacity(body.rows.len());
    for (line, cells) in &body.rows {
        let line = *line;
        let col = DiagnosticsRow::COLUMNS;
        let req = |j: usize| parse_number(path, line, col[j], &cells[j]);
        let opt = |j: usize| parse_optional(path, line, col[j], &cells[j]);
        let certified = match cells[12].as_str() {
            "pass" => true,
            "fail" => false,
            other => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("column certified: expected pass or fail, found `{other}`"),
                })
            }
        };
        let row = DiagnosticsRow {
            t: req(0)?,
            mass: req(1)?,
            energy: req(2)?,
            cum_dissipation: req(3)?,
            c0_bound: req(4)?,
            entropy_integral: req(5)?,
            c1_bound: opt(6)?,
            c3_bound: opt(7)?,
            s1: opt(8)?,
            peak_x: opt(9)?,
            peak_h: opt(10)?,
            speed_estimate: opt(11)?,
            certified,
        };
        rows.push((line, row));
    }
    Ok(DiagnosticsFile {
        rows,
        failure: body.failure,
    })
}

/// Snapshots of `trajectory.csv` on `grid`, in file order.
pub fn read_trajectory(path: &Path, grid: Grid) -> Result<Vec<FieldState>> {
    let body = read_csv(path, TRAJECTORY_HEADER)?;
    let n = grid.len();
    let parse = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    if body.rows.len() % n != 0 {
        let line = body.rows.last().map_or(1, |r| r.0);
        return Err(parse(
            line,
            format!("{} rows is not a whole number of {n}-node snapshots", body.rows.len()),
        ));
    }
    let mut snapshots = Vec::with_capacity(body.rows.len() / n);
    for chunk in body.rows.chunks(n) {
        let t = parse_number(path, chunk[0].0, "t", &chunk[0].1[0])?;
        let mut h = Vec::with_capacity(n);
        let mut u = Vec::with_capacity(n);
        for (i, (line, cells)) in chunk.iter().enumerate() {
            let ti = parse_number(path, *line, "t", &cells[0])?;
            let x = parse_number(path, *line, "x", &cells[1])?;
            if ti != t {
                return Err(parse(*line, format!("snapshot at t = {t} ends early")));
            }
            if (x - grid.x(i)).abs() > 1e-9 * grid.length() {
                return Err(parse(
                    *line,
                    format!("x = {x} does not match grid node {i} at {}", grid.x(i)),
                ));
            }
            h.push(parse_number(path, *line, "h", &cells[2])?);
            u.push(parse_number(path, *line, "u", &cells[3])?);
        }
        let state = FieldState::new(t, grid.field(h)?, grid.field(u)?)
            .map_err(|e| parse(chunk[0].0, e.to_string()))?;
        snapshots.push(state);
    }
    Ok(snapshots)
}

/// Run manifest written next to the CSV files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    /// Fully resolved configuration, defaults included.
    pub config: RunConfig,
    pub status: RunStatus,
    pub failure: Option<FailureInfo>,
    pub snapshots: usize,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub relative_mass_drift: f64,
    pub initial_energy: f64,
    pub initial_s1: Option<f64>,
    pub initial_s2: Option<f64>,
    pub speed_estimate: Option<f64>,
    pub certification: CertificationSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    SolverFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureInfo {
    pub t: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationSummary {
    pub pass: bool,
    pub samples: usize,
    pub min_energy_margin: Option<f64>,
    pub min_entropy_margin: Option<f64>,
    pub first_failure_t: Option<f64>,
}

impl From<&CertificationReport> for CertificationSummary {
    fn from(report: &CertificationReport) -> Self {
        let min = |it: &mut dyn Iterator<Item = f64>| it.reduce(f64::min);
        Self {
            pass: report.pass,
            samples: report.samples.len(),
            min_energy_margin: min(&mut report.samples.iter().map(|s| s.energy_margin)),
            min_entropy_margin: min(&mut report.samples.iter().filter_map(|s| s.entropy_margin)),
            first_failure_t: report.first_failure().map(|s| s.t),
        }
    }
}

pub fn write_summary(path: &Path, summary: &RunSummary) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)
        .map_err(|e| Error::Config(format!("cannot serialise run summary: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Header values of a travelling-wave profile file.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileHeader {
    pub s: f64,
    pub q0: f64,
    pub mass: f64,
    pub length: f64,
    pub first_integral_violation: f64,
}

pub fn write_profile(
    path: &Path,
    header: &ProfileHeader,
    h: &crate::grid::PeriodicField,
    u: &crate::grid::PeriodicField,
) -> Result<()> {
    let mut csv = CsvFile {
        path: path.to_path_buf(),
        out: BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?),
    };
    csv.line(&format!("# s={}", fmt_f64(header.s)))?;
    csv.line(&format!("# q0={}", fmt_f64(header.q0)))?;
    csv.line(&format!("# M={}", fmt_f64(header.mass)))?;
    csv.line(&format!("# L={}", fmt_f64(header.length)))?;
    csv.line(&format!(
        "# first_integral_violation={}",
        fmt_f64(header.first_integral_violation)
    ))?;
    csv.line(PROFILE_HEADER)?;
    let grid = h.grid();
    for i in 0..grid.len() {
        csv.line(&format!("{},{},{}", fmt_f64(grid.x(i)), fmt_f64(h[i]), fmt_f64(u[i])))?;
    }
    csv.flush()
}

/// A profile read back from disk, on its own uniform grid.
#[derive(Debug, Clone)]
pub struct ProfileFile {
    pub xi: Vec<f64>,
    pub h: Vec<f64>,
    pub u: Vec<f64>,
    /// `# key=value` header entries.
    pub header: Vec<(String, String)>,
}

impl ProfileFile {
    pub fn value(&self, key: &str) -> Option<f64> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .and_then(|(_, v)| v.parse().ok())
    }
}

pub fn read_profile(path: &Path) -> Result<ProfileFile> {
    let body = read_csv(path, PROFILE_HEADER)?;
    let mut profile = ProfileFile {
        xi: Vec::new(),
        h: Vec::new(),
        u: Vec::new(),
        header: body
            .comments
            .iter()
            .filter_map(|c| c.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect(),
    };
    for (line, cells) in &body.rows {
        profile.xi.push(parse_number(path, *line, "xi", &cells[0])?);
        profile.h.push(parse_number(path, *line, "H", &cells[1])?);
        profile.u.push(parse_number(path, *line, "U", &cells[2])?);
    }
    if profile.xi.len() < 3 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("profile has {} nodes; at least 3 are needed", profile.xi.len()),
        });
    }
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FlowProfile, ModelParams};
    use crate::pde::initial_condition;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.29, 1e-300, -7.5e12, f64::MIN_POSITIVE, 84.982] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.1), "0.1");
    }

    #[test]
    fn trajectory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(TRAJECTORY_FILE);
        let grid = Grid::new(20.0, 24).unwrap();
        let params = ModelParams::new(0.2, 10.0, 1.0, FlowProfile::Plug);
        let mut a = initial_condition(grid, 2.29, 0.1, &params).unwrap();
        let mut w = TrajectoryWriter::create(&path).unwrap();
        w.write(&a).unwrap();
        a.t = 0.3;
        a.h[5] += 1.0 / 7.0;
        w.write(&a).unwrap();
        drop(w);
        let back = read_trajectory(&path, grid).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1], a);
        assert!(read_trajectory(&path, Grid::new(20.0, 16).unwrap()).is_err());
    }

    #[test]
    fn failure_marker_is_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(DIAGNOSTICS_FILE);
        let mut w = DiagnosticsWriter::create(&path).unwrap();
        w.write_failure(&RunFailure {
            t: 1.5,
            message: "Newton\nfailed".into(),
        })
        .unwrap();
        drop(w);
        let file = read_diagnostics(&path).unwrap();
        assert!(file.rows.is_empty());
        assert_eq!(file.failure.as_deref(), Some("t=1.5 message=Newton failed"));
    }

    #[test]
    fn malformed_rows_name_their_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(DIAGNOSTICS_FILE);
        std::fs::write(&path, format!("{DIAGNOSTICS_HEADER}\n0,1,2,3,4,5,,,,,,,pass\n0,x,2,3,4,5,,,,,,,pass\n")).unwrap();
        match read_diagnostics(&path) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("mass"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
