//! Iterative solver for the semi-discrete reflector problem.
//!
//! Each outer iteration is a Gauss-Seidel sweep over the targets. For target
//! `j` the focal datum `η_j` is moved (in log scale, damped) towards the value
//! at which its visibility cell carries exactly the target mass, holding the
//! other ellipsoids fixed. All focal parameters are then scaled by a common
//! factor so that `min ρ = c0`. A sweep is kept only if the functional `I`
//! does not decrease; otherwise the damping is halved and the sweep retried.

use rayon::prelude::*;

use crate::dual_core::{maximize_dual, AscentParams, PotentialPair};
use crate::ellipsoid::eccentricity;
use crate::error::{Error, Result};
use crate::reflector::{
    functional_i_reflector, pushforward_residual, rho_from_eta, PushforwardResidual, Reflector, ReflectorConstraint,
    ReflectorObjective, ReflectorProblem,
};
use crate::roots::bisect_increasing;
use crate::vector::dist;

/// Allowed decrease of `I` between accepted sweeps.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Coupling used in the functional `I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingMode {
    /// `γ = μ ⊗ ν`.
    #[default]
    Product,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    /// Stop when every cell mass is within this of its target (unit total).
    pub residual_tol: f64,
    pub max_outer: usize,
    /// Fraction of the mass-matching step taken per sweep, in `(0, 1]`.
    pub damping: f64,
    /// Give up once retries have shrunk the damping below this.
    pub min_damping: f64,
    pub coupling_mode: CouplingMode,
    /// Overrides the problem's normalization `min ρ` when set.
    pub c0: Option<f64>,
    /// Progress line on stderr every this many iterations (0 = silent).
    pub log_every: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            residual_tol: 1e-3,
            max_outer: 500,
            damping: 1.0,
            min_damping: 1e-6,
            coupling_mode: CouplingMode::Product,
            c0: None,
            log_every: 0,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("residual_tol must be positive, got {}", self.residual_tol)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.min_damping > 0.0) {
            return Err(Error::InvalidParameter("min_damping must be positive".into()));
        }
        if let Some(c0) = self.c0 {
            if !(c0 > 0.0) {
                return Err(Error::InvalidParameter(format!("c0 must be positive, got {c0}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub max_residual: f64,
    pub functional: f64,
    pub min_rho: f64,
    /// Number of non-empty visibility cells.
    pub occupied: usize,
    pub damping: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
}

impl SolveTrace {
    /// Whether `I` is non-decreasing over accepted records within `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        let accepted: Vec<f64> = self.records.iter().filter(|r| r.accepted).map(|r| r.functional).collect();
        accepted.windows(2).all(|w| w[1] >= w[0] - slack)
    }

    pub fn accepted(&self) -> usize {
        self.records.iter().filter(|r| r.accepted).count()
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub reflector: Reflector,
    pub trace: SolveTrace,
    pub residual: PushforwardResidual,
    pub functional: f64,
    pub converged: bool,
    /// Sweeps attempted, accepted or not.
    pub iterations: usize,
}

/// Radial values `r_ij` of all ellipsoids at all nodes, row-major in `i`.
struct RadialTable {
    m: usize,
    values: Vec<f64>,
}

impl RadialTable {
    fn new(eta: &[f64], problem: &ReflectorProblem) -> Result<Self> {
        let m = eta.len();
        let mut t = Self { m, values: vec![0.0; problem.n_source() * m] };
        for (j, e) in eta.iter().enumerate() {
            t.set_column(j, *e, problem)?;
        }
        Ok(t)
    }

    fn set_column(&mut self, j: usize, eta: f64, problem: &ReflectorProblem) -> Result<()> {
        let eps = eccentricity(1.0 / eta, problem.focus_dist()[j])?;
        let m = self.m;
        for (i, slot) in self.values.iter_mut().skip(j).step_by(m).enumerate() {
            let den = 1.0 - eps * problem.theta(i, j);
            if !(den > 0.0) {
                return Err(Error::InfeasibleGeometry(format!("ellipsoid {j} degenerates at node {i}")));
            }
            *slot = 1.0 / (eta * den);
        }
        Ok(())
    }

    /// Per node, the smallest radial over targets before and after `j`.
    fn others(&self, j: usize) -> Vec<(f64, f64)> {
        self.values
            .chunks(self.m)
            .map(|row| {
                let before = row[..j].iter().copied().fold(f64::INFINITY, f64::min);
                let after = row[j + 1..].iter().copied().fold(f64::INFINITY, f64::min);
                (before, after)
            })
            .collect()
    }
}

/// Mass of cell `j` if `η_j = e^{log_eta}`, with lowest-index tie breaking.
fn cell_mass(log_eta: f64, j: usize, others: &[(f64, f64)], problem: &ReflectorProblem) -> f64 {
    let eta = log_eta.exp();
    let Ok(eps) = eccentricity(1.0 / eta, problem.focus_dist()[j]) else { return f64::NAN };
    others
        .par_iter()
        .enumerate()
        .map(|(i, &(before, after))| {
            let r = 1.0 / (eta * (1.0 - eps * problem.theta(i, j)));
            if r < before && r <= after {
                problem.source_mass()[i]
            } else {
                0.0
            }
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// `log η_j` at which cell `j` best matches its target mass.
fn matching_log_eta(current: f64, j: usize, others: &[(f64, f64)], problem: &ReflectorProblem) -> Result<f64> {
    let target = problem.target_mass()[j];
    let gap = |l: f64| cell_mass(l, j, others, problem) - target;
    let mut span = 8.0;
    loop {
        match bisect_increasing(gap, current - span, current + span, 1e-13) {
            Ok(b) => {
                let lo = (gap(b.lo)).abs();
                let hi = (gap(b.hi)).abs();
                return Ok(if hi < lo { b.hi } else { b.lo });
            }
            Err(e) if span >= 64.0 => {
                return Err(Error::InfeasibleGeometry(format!("cannot bracket the cell mass of target {j}: {e}")))
            }
            Err(_) => span *= 2.0,
        }
    }
}

/// Focal data for which each ellipsoid alone has `min ρ = c0` on the grid.
pub fn initial_eta(problem: &ReflectorProblem, c0: f64) -> Result<Vec<f64>> {
    let foci = problem.target().foci();
    let lifted = problem.grid().lifted();
    (0..problem.n_target())
        .map(|j| {
            let i = (0..problem.n_source())
                .min_by(|&a, &b| problem.theta(a, j).total_cmp(&problem.theta(b, j)))
                .unwrap_or(0);
            let point: Vec<f64> = lifted[i].iter().map(|v| v * c0).collect();
            let eps = problem.focus_dist()[j] / (c0 + dist(&foci[j], &point));
            let p = c0 * (1.0 - eps * problem.theta(i, j));
            if !(p > 0.0) {
                return Err(Error::InfeasibleGeometry(format!("no ellipsoid for target {j} reaches c0 = {c0}")));
            }
            Ok(1.0 / p)
        })
        .collect()
}

/// Common factor on all focal parameters so that `min ρ = c0`.
pub fn normalize_min_rho(eta: &[f64], problem: &ReflectorProblem, c0: f64) -> Result<Vec<f64>> {
    let (rho, _) = rho_from_eta(eta, problem)?;
    let current = rho.iter().copied().fold(f64::INFINITY, f64::min);
    let scaled = |log_lambda: f64| -> Vec<f64> { eta.iter().map(|e| e / log_lambda.exp()).collect() };
    let gap = |log_lambda: f64| {
        rho_from_eta(&scaled(log_lambda), problem)
            .map(|(r, _)| (r.iter().copied().fold(f64::INFINITY, f64::min) / c0).ln())
            .unwrap_or(f64::NAN)
    };
    let guess = (c0 / current).ln();
    if gap(guess).abs() <= 1e-14 {
        return Ok(scaled(guess));
    }
    let b = bisect_increasing(gap, guess - 2.0 - guess.abs(), guess + 2.0 + guess.abs(), 1e-15)?;
    // the upper end keeps min ρ >= c0
    Ok(scaled(b.hi))
}

fn sweep(eta: &[f64], damping: f64, problem: &ReflectorProblem) -> Result<Vec<f64>> {
    let mut work = eta.to_vec();
    let mut table = RadialTable::new(&work, problem)?;
    for j in 0..work.len() {
        let others = table.others(j);
        let cur = work[j].ln();
        let best = matching_log_eta(cur, j, &others, problem)?;
        work[j] = (cur + damping * (best - cur)).exp();
        table.set_column(j, work[j], problem)?;
    }
    Ok(work)
}

fn occupied(res: &PushforwardResidual) -> usize {
    res.masses.iter().filter(|m| **m > 0.0).count()
}

/// Drives the cell masses to the target masses.
pub fn solve(problem: &ReflectorProblem, params: &SolverParams) -> Result<SolveOutcome> {
    params.validate()?;
    let c0 = params.c0.unwrap_or(problem.c0());
    let mut eta = normalize_min_rho(&initial_eta(problem, c0)?, problem, c0)?;
    let mut reflector = Reflector::from_eta(eta.clone(), problem)?;
    let mut residual = pushforward_residual(&reflector, problem)?;
    let mut value = functional_i_reflector(&reflector, problem)?;
    let mut trace = SolveTrace::default();
    trace.records.push(IterationRecord {
        iteration: 0,
        max_residual: residual.max_abs,
        functional: value,
        min_rho: reflector.min_rho(),
        occupied: occupied(&residual),
        damping: params.damping,
        accepted: true,
    });
    let mut damping = params.damping;
    let mut iterations = 0;
    let mut converged = residual.max_abs <= params.residual_tol;
    while !converged && iterations < params.max_outer && damping >= params.min_damping {
        iterations += 1;
        let cand_eta = normalize_min_rho(&sweep(&eta, damping, problem)?, problem, c0)?;
        let cand = Reflector::from_eta(cand_eta.clone(), problem)?;
        let cand_res = pushforward_residual(&cand, problem)?;
        let cand_value = functional_i_reflector(&cand, problem)?;
        let accepted = cand_value >= value - MONOTONE_SLACK;
        trace.records.push(IterationRecord {
            iteration: iterations,
            max_residual: cand_res.max_abs,
            functional: cand_value,
            min_rho: cand.min_rho(),
            occupied: occupied(&cand_res),
            damping,
            accepted,
        });
        if params.log_every > 0 && iterations % params.log_every == 0 {
            eprintln!(
                "iter {iterations:5}  max|r| {:.3e}  I {:.12}  damping {damping:.3e}  {}",
                cand_res.max_abs,
                cand_value,
                if accepted { "accepted" } else { "rejected" }
            );
        }
        if accepted {
            eta = cand_eta;
            reflector = cand;
            residual = cand_res;
            value = cand_value;
            damping = (2.0 * damping).min(params.damping);
            converged = residual.max_abs <= params.residual_tol;
        } else {
            damping *= 0.5;
        }
    }
    Ok(SolveOutcome { reflector, trace, residual, functional: value, converged, iterations })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrosscheckReport {
    /// `max_i |ρ_solve - ρ_ascent| / ρ_solve`.
    pub rho_gap: f64,
    pub functional_solver: f64,
    pub functional_ascent: f64,
    pub functional_rel_gap: f64,
    pub solver_converged: bool,
}

/// Compares [`solve`] with derivative-free ascent of `I` over dual pairs
/// on the slice `min ρ = c0`.
///
/// On the full constraint set `I` keeps increasing as the reflector is
/// scaled up (its supremum is only approached as `ρ → ∞`), so the ascent is
/// pinned to the normalization slice.
pub fn ascent_crosscheck(problem: &ReflectorProblem, params: &SolverParams) -> Result<CrosscheckReport> {
    let c0 = params.c0.unwrap_or(problem.c0());
    let solved = solve(problem, params)?;
    let start = Reflector::from_eta(normalize_min_rho(&initial_eta(problem, c0)?, problem, c0)?, problem)?;
    let initial =
        PotentialPair { u: start.rho.iter().map(|r| r.ln()).collect(), v: start.eta.iter().map(|e| e.ln()).collect() };
    let ap = AscentParams { c0: Some(c0.ln()), pin: true, step_min: 1e-6, ftol: 1e-9, ..AscentParams::default() };
    let domains = problem.domains();
    let asc = maximize_dual(&initial, &ReflectorObjective::ambient(), &ReflectorConstraint::ambient(), &domains, &ap)?;
    let eta: Vec<f64> = asc.pair.v.iter().map(|v| v.exp()).collect();
    let other = Reflector::from_eta(eta, problem)?;
    let rho_gap = solved.reflector.rho.iter().zip(&other.rho).map(|(a, b)| (a - b).abs() / a).fold(0.0, f64::max);
    let fa = functional_i_reflector(&other, problem)?;
    let fs = solved.functional;
    Ok(CrosscheckReport {
        rho_gap,
        functional_solver: fs,
        functional_ascent: fa,
        functional_rel_gap: (fs - fa).abs() / fs.abs().max(fa.abs()).max(1e-300),
        solver_converged: solved.converged,
    })
}
