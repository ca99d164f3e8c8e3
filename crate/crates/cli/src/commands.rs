//! The subcommands. Each writes its human-readable output to `out`,
//! diagnostics to `err`, and returns the process exit code.

use std::fs;
use std::io::Write;
use std::path::Path;

use lumen::mongeampere::{refinement_study, CatalogReflector};
use lumen::raytrace::raytrace;
use lumen::solver::solve;
use lumen::verify::{format_refinement, run_suite, solution_checks, Size, Suite, SuiteReport};

use crate::artifacts::{self, RaytraceSummary, RunReport};
use crate::config::ProblemConfig;
use crate::{CliError, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_OK};

/// Observed order required of the finest refinement pair.
pub const REQUIRED_ORDER: f64 = 1.5;

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn say(w: &mut dyn Write, line: impl std::fmt::Display) -> Result<(), CliError> {
    writeln!(w, "{line}").map_err(CliError::from)
}

/// Solves the problem in `config` and writes every artifact to `dir`.
/// Exit 0 on convergence, 2 when the solver stops early.
pub fn solve_cmd(config: &Path, dir: &Path, log_every: usize, out: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = ProblemConfig::load(config)?;
    let problem = cfg.build()?;
    let mut params = cfg.solver_params()?;
    params.log_every = log_every;
    fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;

    let outcome = solve(&problem, &params)?;
    let checks = solution_checks(&problem, &outcome, params.residual_tol)?;
    write_file(dir, artifacts::CONFIG_FILE, &artifacts::to_json(&cfg)?)?;
    write_file(dir, artifacts::MESH_FILE, &artifacts::mesh_obj(&problem, &outcome.reflector))?;
    write_file(dir, artifacts::ETA_FILE, &artifacts::eta_csv(&problem, &outcome)?)?;
    write_file(dir, artifacts::TRACE_FILE, &artifacts::trace_csv(&outcome)?)?;
    let report = RunReport::new(&cfg, &problem, &outcome, &checks);
    write_file(dir, artifacts::REPORT_FILE, &artifacts::to_json(&report)?)?;

    say(
        out,
        format_args!(
            "{} after {} iterations: max residual {:.3e} (tol {:.1e}), {} nodes, {} targets",
            if outcome.converged { "converged" } else { "NOT converged" },
            outcome.iterations,
            outcome.residual.max_abs,
            params.residual_tol,
            problem.n_source(),
            problem.n_target()
        ),
    )?;
    for c in &checks {
        say(out, c)?;
    }
    Ok(if outcome.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Traces `rays` rays through a solution written by [`solve_cmd`].
pub fn raytrace_cmd(dir: &Path, rays: u64, seed: u64, out: &mut dyn Write) -> Result<i32, CliError> {
    let (cfg, problem, reflector) = artifacts::load_solution(dir)?;
    let report = raytrace(&reflector, &problem, rays, seed)?;
    let tol = cfg.solver.residual_tol;
    let summary = RaytraceSummary {
        rays: report.rays,
        seed,
        tv: report.tv,
        max_aim_error: report.max_aim_error,
        residual_tol: tol,
        tv_bound: 2.0 * tol,
        within_bound: report.tv <= 2.0 * tol,
    };
    write_file(dir, artifacts::HISTOGRAM_FILE, &artifacts::histogram_csv(&report)?)?;
    write_file(dir, artifacts::RAYTRACE_FILE, &artifacts::to_json(&summary)?)?;
    say(
        out,
        format_args!(
            "{} rays: total variation {:.3e} (2·tol = {:.1e}), max aim error {:.3e}",
            report.rays, report.tv, summary.tv_bound, report.max_aim_error
        ),
    )?;
    Ok(EXIT_OK)
}

fn print_suite(report: &SuiteReport, out: &mut dyn Write) -> Result<i32, CliError> {
    for c in &report.checks {
        say(out, c)?;
    }
    for t in &report.tables {
        say(out, t.trim_end())?;
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    say(out, format_args!("{} checks, {} failed", report.checks.len(), failed))?;
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Runs one invariant suite. Exit 0 iff every check passes.
pub fn verify_cmd(suite: &str, seed: u64, size: &str, out: &mut dyn Write) -> Result<i32, CliError> {
    let suite: Suite = suite.parse()?;
    let size: Size = size.parse()?;
    print_suite(&run_suite(suite, seed, size)?, out)
}

/// Every suite at the smallest size.
pub fn selftest_cmd(seed: u64, out: &mut dyn Write) -> Result<i32, CliError> {
    print_suite(&run_suite(Suite::All, seed, Size::Tiny)?, out)
}

/// Residual refinement study of a catalog reflector. The CSV table goes
/// to `out`. Exit 0 iff the finest observed order reaches
/// [`REQUIRED_ORDER`], or the reflector is flagged degenerate everywhere.
pub fn residual_cmd(
    catalog: &str,
    levels: &[usize],
    radius: f64,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let refl = CatalogReflector::from_id(catalog, 2)
        .map_err(|_| CliError::input(format!("unknown catalog id '{catalog}' (known: {:?})", CatalogReflector::IDS)))?;
    if levels.len() < 2 || levels.windows(2).any(|w| w[0] >= w[1]) || levels[0] < 4 {
        return Err(CliError::input(format!("levels: need at least two increasing values >= 4, got {levels:?}")));
    }
    if !(radius > 0.0 && radius < 1.0) {
        return Err(CliError::input(format!("radius: must lie in (0, 1), got {radius}")));
    }
    let table = refinement_study(&refl, 2, radius, levels, &refl.level_set())?;
    write!(out, "{}", format_refinement(&table))?;
    if table.fully_degenerate() {
        say(err, format_args!("{catalog}: every node is degenerate (a single ellipsoid has a constant reflection map); no order to report"))?;
        return Ok(EXIT_OK);
    }
    match table.finest_order() {
        Some(order) if order >= REQUIRED_ORDER => Ok(EXIT_OK),
        Some(order) => {
            say(err, format_args!("observed order {order:.3} is below {REQUIRED_ORDER}"))?;
            Ok(EXIT_NOT_CONVERGED)
        }
        None => {
            say(err, "no order could be computed")?;
            Ok(EXIT_INPUT)
        }
    }
}
