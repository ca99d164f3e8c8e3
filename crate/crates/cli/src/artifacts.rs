//! Files written by `solve` and `raytrace`, and the loader that rebuilds a
//! solution from disk.
//!
//! CSV files are comma separated with a header row and LF line ends.
//! Floats use the shortest representation that round-trips, except in the
//! mesh, which uses 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use lumen::raytrace::RaytraceReport;
use lumen::reflector::{Reflector, ReflectorProblem};
use lumen::solver::SolveOutcome;
use lumen::verify::Check;

use crate::config::ProblemConfig;
use crate::CliError;

pub const CONFIG_FILE: &str = "config.json";
pub const MESH_FILE: &str = "mesh.obj";
pub const ETA_FILE: &str = "eta.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const REPORT_FILE: &str = "report.json";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const RAYTRACE_FILE: &str = "raytrace.json";

/// OBJ mesh of the points `X ρ(X)`; on a 2-dimensional grid every grid
/// square with four active corners becomes two triangles.
pub fn mesh_obj(problem: &ReflectorProblem, reflector: &Reflector) -> String {
    let grid = problem.grid();
    let mut s = String::new();
    for (x, r) in grid.lifted().iter().zip(&reflector.rho) {
        s.push('v');
        for c in x.iter() {
            let _ = write!(s, " {:.16e}", c * r);
        }
        s.push('\n');
    }
    if grid.dim() == 2 {
        for i in 0..grid.len() {
            let m = grid.multi_index(i);
            let corner = |da: usize, db: usize| grid.at(&[m[0] + da, m[1] + db]);
            if let (Some(a), Some(b), Some(c)) = (corner(1, 0), corner(1, 1), corner(0, 1)) {
                // OBJ indices are 1-based
                let _ = writeln!(s, "f {} {} {}", i + 1, a + 1, b + 1);
                let _ = writeln!(s, "f {} {} {}", i + 1, b + 1, c + 1);
            }
        }
    }
    s
}

fn csv_string(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| CliError::input(e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::input(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::input(e.to_string()))
}

/// Per-target table: position, normalized weight `g`, focal data `η`,
/// `p = 1/η`, cell mass and residual.
pub fn eta_csv(problem: &ReflectorProblem, outcome: &SolveOutcome) -> Result<String, CliError> {
    let dim = problem.dim();
    let mut header = vec!["index".to_string()];
    header.extend((0..=dim).map(|k| format!("y{k}")));
    header.extend(["g", "eta", "p", "cell_mass", "residual"].map(String::from));
    let foci = problem.target().foci();
    let res = &outcome.residual;
    let rows = (0..problem.n_target()).map(|j| {
        let eta = outcome.reflector.eta[j];
        let mut row = vec![j.to_string()];
        row.extend(foci[j].iter().map(|c| c.to_string()));
        row.extend([problem.target_mass()[j], eta, 1.0 / eta, res.masses[j], res.residuals[j]].map(|v| v.to_string()));
        row
    });
    csv_string(&header, rows)
}

pub fn trace_csv(outcome: &SolveOutcome) -> Result<String, CliError> {
    let header =
        ["iteration", "max_residual", "functional", "min_rho", "occupied", "damping", "accepted"].map(String::from);
    let rows = outcome.trace.records.iter().map(|r| {
        vec![
            r.iteration.to_string(),
            r.max_residual.to_string(),
            r.functional.to_string(),
            r.min_rho.to_string(),
            r.occupied.to_string(),
            r.damping.to_string(),
            r.accepted.to_string(),
        ]
    });
    csv_string(&header, rows)
}

pub fn histogram_csv(report: &RaytraceReport) -> Result<String, CliError> {
    let header = ["index", "count", "histogram", "expected"].map(String::from);
    let rows = (0..report.counts.len()).map(|j| {
        vec![
            j.to_string(),
            report.counts[j].to_string(),
            report.histogram[j].to_string(),
            report.expected[j].to_string(),
        ]
    });
    csv_string(&header, rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub suite: String,
    pub name: String,
    /// `null` when the value is not finite.
    pub observed: f64,
    pub bound: String,
    pub samples: usize,
    pub passed: bool,
}

impl From<&Check> for CheckRecord {
    fn from(c: &Check) -> Self {
        Self {
            suite: c.suite.to_string(),
            name: c.name.clone(),
            observed: c.observed,
            bound: c.bound.to_string(),
            samples: c.samples,
            passed: c.passed,
        }
    }
}

/// Summary of one solve. Wall-clock timing is left out so that the file is
/// identical across runs.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ProblemConfig,
    pub converged: bool,
    pub iterations: usize,
    pub n_source: usize,
    pub n_target: usize,
    pub max_residual: f64,
    pub empty_cells: Vec<usize>,
    pub functional: f64,
    pub min_rho: f64,
    /// Functional after each accepted iteration.
    pub functional_trace: Vec<f64>,
    pub checks: Vec<CheckRecord>,
}

impl RunReport {
    pub fn new(config: &ProblemConfig, problem: &ReflectorProblem, outcome: &SolveOutcome, checks: &[Check]) -> Self {
        Self {
            config: config.clone(),
            converged: outcome.converged,
            iterations: outcome.iterations,
            n_source: problem.n_source(),
            n_target: problem.n_target(),
            max_residual: outcome.residual.max_abs,
            empty_cells: outcome.residual.empty.clone(),
            functional: outcome.functional,
            min_rho: outcome.reflector.min_rho(),
            functional_trace: outcome.trace.records.iter().filter(|r| r.accepted).map(|r| r.functional).collect(),
            checks: checks.iter().map(CheckRecord::from).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RaytraceSummary {
    pub rays: u64,
    pub seed: u64,
    pub tv: f64,
    pub max_aim_error: f64,
    pub residual_tol: f64,
    /// `2 · residual_tol`.
    pub tv_bound: f64,
    pub within_bound: bool,
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::input(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Rebuilds the problem and the reflector from `config.json` and `eta.csv`.
pub fn load_solution(dir: &Path) -> Result<(ProblemConfig, ReflectorProblem, Reflector), CliError> {
    if !dir.is_dir() {
        return Err(CliError::input(format!("{}: no solution directory", dir.display())));
    }
    let config = ProblemConfig::load(&dir.join(CONFIG_FILE))?;
    let problem = config.build()?;
    let path = dir.join(ETA_FILE);
    let text = read(&path)?;
    let bad = |msg: String| CliError::input(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = headers.iter().position(|h| h == "eta").ok_or_else(|| bad("missing column 'eta'".into()))?;
    let mut eta = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let v: f64 = rec
            .get(col)
            .ok_or_else(|| bad(format!("row {}: missing eta", k + 1)))?
            .parse()
            .map_err(|e| bad(format!("row {}: {e}", k + 1)))?;
        eta.push(v);
    }
    if eta.len() != problem.n_target() {
        return Err(bad(format!("{} rows for {} targets", eta.len(), problem.n_target())));
    }
    let reflector = Reflector::from_eta(eta, &problem)?;
    Ok((config, problem, reflector))
}
