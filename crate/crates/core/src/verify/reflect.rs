//! Invariants of solved reflector instances.

use super::{cell_boundary_nodes, random_problem, Bound, Check, Size, SuiteReport};
use crate::dual_core::{optimal_map, variational_derivative_check, PotentialPair, TransformParams};
use crate::error::Result;
use crate::reflector::{
    eta_from_rho, focal_oracle, rho_from_eta, t_rho_at_node, Reflector, ReflectorConstraint, ReflectorObjective,
    ReflectorProblem,
};
use crate::solver::{solve, SolveOutcome, SolverParams, MONOTONE_SLACK};

/// Perturbation sizes of the first-variation check.
pub const VARIATION_EPS: [f64; 3] = [1e-2, 1e-3, 1e-4];
/// Number of basis test functions `h = e_j` in the first-variation check.
pub const VARIATION_BASIS: usize = 5;

/// Contact map of the dual pair against the reflection map traced with
/// grid gradients, over the mask-interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementReport {
    pub interior: usize,
    pub agree: usize,
    /// Disagreeing nodes with a neighbour in another visibility cell.
    pub on_boundary: usize,
    pub off_boundary: usize,
}

impl AgreementReport {
    pub fn fraction(&self) -> f64 {
        self.agree as f64 / self.interior.max(1) as f64
    }
}

fn log_pair(reflector: &Reflector) -> PotentialPair {
    PotentialPair {
        u: reflector.rho.iter().map(|r| r.ln()).collect(),
        v: reflector.eta.iter().map(|e| e.ln()).collect(),
    }
}

pub fn map_agreement(reflector: &Reflector, problem: &ReflectorProblem) -> Result<AgreementReport> {
    let map = optimal_map(&log_pair(reflector), &ReflectorConstraint::ambient(), &problem.domains(), 1e-8)?;
    let grid = problem.grid();
    let boundary = cell_boundary_nodes(grid, &[&map]);
    let mut rep = AgreementReport { interior: 0, agree: 0, on_boundary: 0, off_boundary: 0 };
    for i in (0..grid.len()).filter(|&i| grid.is_interior(i)) {
        rep.interior += 1;
        if t_rho_at_node(i, reflector, problem)?.index == Some(map[i]) {
            rep.agree += 1;
        } else if boundary[i] {
            rep.on_boundary += 1;
        } else {
            rep.off_boundary += 1;
        }
    }
    Ok(rep)
}

/// Checks on one solved instance: weak-solution residual, monotone trace,
/// envelope support, map agreement and the first variation of the dual
/// pair under `v -> v + ε e_j`.
pub fn solution_checks(problem: &ReflectorProblem, outcome: &SolveOutcome, residual_tol: f64) -> Result<Vec<Check>> {
    let refl = &outcome.reflector;
    let accepted: Vec<f64> = outcome.trace.records.iter().filter(|r| r.accepted).map(|r| r.functional).collect();
    let drop = accepted.windows(2).fold(0.0f64, |w, p| w.max(p[0] - p[1]));
    let (above, gap) = focal_oracle(refl, problem)?;
    let agreement = map_agreement(refl, problem)?;

    let pair = log_pair(refl);
    let domains = problem.domains();
    let (mut slope, mut integral) = (0.0f64, 0.0f64);
    let basis = VARIATION_BASIS.min(problem.n_target());
    for j in 0..basis {
        let mut h = vec![0.0; problem.n_target()];
        h[j] = 1.0;
        let rep = variational_derivative_check(
            &pair,
            &ReflectorObjective::ambient(),
            &ReflectorConstraint::ambient(),
            &domains,
            &h,
            &VARIATION_EPS,
            1e-8,
            &TransformParams::default(),
        )?;
        for row in &rep.rows {
            slope = slope.max(row.max_error / row.eps);
        }
        integral = integral.max(rep.integral.abs());
    }

    let residual = if outcome.converged { outcome.residual.max_abs } else { f64::INFINITY };
    Ok(vec![
        Check::new("reflector", "pushforward_residual", residual, Bound::AtMost(residual_tol), 1),
        Check::new("reflector", "functional_non_decreasing", drop, Bound::AtMost(MONOTONE_SLACK), accepted.len()),
        Check::new("reflector", "envelope_support", above.max(gap), Bound::AtMost(1e-12), problem.n_source()),
        Check::new(
            "reflector",
            "map_agreement_fraction",
            agreement.fraction(),
            Bound::AtLeast(0.99),
            agreement.interior,
        ),
        Check::new(
            "reflector",
            "map_disagreement_off_boundary",
            agreement.off_boundary as f64,
            Bound::AtMost(0.0),
            agreement.interior,
        ),
        Check::new(
            "reflector",
            "variation_slope_error_over_eps",
            slope,
            Bound::AtMost(5.0),
            basis * VARIATION_EPS.len(),
        ),
        Check::new("reflector", "first_variation_integral", integral, Bound::AtMost(1e-3), basis),
    ])
}

/// Folds `next` into `acc` keeping the worst value per invariant.
fn merge(acc: &mut Vec<Check>, next: Vec<Check>) {
    for c in next {
        match acc.iter_mut().find(|a| a.name == c.name) {
            Some(a) => {
                let worse = match a.bound {
                    Bound::AtLeast(_) => c.observed < a.observed,
                    _ => c.observed > a.observed,
                };
                if worse || c.observed.is_nan() {
                    a.observed = c.observed;
                }
                a.samples += c.samples;
                a.passed &= c.passed;
            }
            None => acc.push(c),
        }
    }
}

/// Grid, target count and solver tolerance of the suite instances.
pub const SUITE_CELLS: usize = 96;
pub const SUITE_TARGETS: usize = 10;
pub const SUITE_RESIDUAL_TOL: f64 = 3e-4;

pub(super) fn reflector_suite(seed: u64, size: Size) -> Result<SuiteReport> {
    let instances = size.pick(1, 2, 4);
    let params = SolverParams { residual_tol: SUITE_RESIDUAL_TOL, ..SolverParams::default() };
    let mut checks = Vec::new();
    let mut tables = Vec::new();
    let (mut exact, mut dominated) = (0.0f64, 0.0f64);
    for k in 0..instances as u64 {
        let problem = random_problem(SUITE_CELLS, SUITE_TARGETS, -30.0, 4.0, seed.wrapping_add(k))?;
        let out = solve(&problem, &params)?;
        let rows = solution_checks(&problem, &out, 1e-3)?;
        tables.push(format!(
            "reflector: instance {k}: {} iterations, residual {:.3e}, agreement {}",
            out.iterations,
            out.residual.max_abs,
            rows.iter().find(|c| c.name == "map_agreement_fraction").map_or(f64::NAN, |c| c.observed)
        ));
        merge(&mut checks, rows);

        // an admissible reflector is its own envelope; any other radial
        // function lies below the envelope built from its focal data
        let rho = &out.reflector.rho;
        let (back, _) = rho_from_eta(&eta_from_rho(rho, &problem)?, &problem)?;
        exact = exact.max(rho.iter().zip(&back).fold(0.0f64, |w, (a, b)| w.max((a - b).abs() / a)));
        let bumpy: Vec<f64> = problem
            .grid()
            .points()
            .iter()
            .zip(rho)
            .map(|(x, r)| r * (1.0 + 0.05 * (7.0 * x.coords()[0] + 3.0 * x.coords()[1] + k as f64).sin()))
            .collect();
        let (env, _) = rho_from_eta(&eta_from_rho(&bumpy, &problem)?, &problem)?;
        dominated = dominated.max(bumpy.iter().zip(&env).fold(0.0f64, |w, (a, b)| w.max((a - b) / a)));
    }
    checks.push(Check::new("reflector", "admissible_round_trip", exact, Bound::AtMost(1e-10), instances));
    checks.push(Check::new("reflector", "envelope_dominates", dominated, Bound::AtMost(1e-12), instances));
    Ok(SuiteReport { checks, tables })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_keeps_the_worst() {
        let mut acc = vec![
            Check::new("s", "a", 0.1, Bound::AtMost(1.0), 1),
            Check::new("s", "b", 0.995, Bound::AtLeast(0.99), 1),
        ];
        merge(
            &mut acc,
            vec![
                Check::new("s", "a", 2.0, Bound::AtMost(1.0), 1),
                Check::new("s", "b", 0.993, Bound::AtLeast(0.99), 1),
            ],
        );
        assert_eq!(acc[0].observed, 2.0);
        assert!(!acc[0].passed);
        assert_eq!(acc[1].observed, 0.993);
        assert_eq!(acc[1].samples, 2);
    }

    #[test]
    fn agreement_on_a_small_instance() {
        let p = random_problem(48, 4, -10.0, 2.0, 3).unwrap();
        let out = solve(&p, &SolverParams::default()).unwrap();
        let rep = map_agreement(&out.reflector, &p).unwrap();
        assert_eq!(rep.off_boundary, 0, "{rep:?}");
        assert!(rep.fraction() > 0.95, "{rep:?}");
    }
}
