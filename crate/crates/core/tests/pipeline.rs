//! End to end: build, solve, check the weak-solution residual, ray-trace.

use lumen::raytrace::raytrace;
use lumen::reflector::{pushforward_residual, Reflector};
use lumen::solver::{solve, SolverParams, MONOTONE_SLACK};
use lumen::verify::{random_problem, symmetric_pair};

#[test]
fn solve_then_raytrace() {
    let problem = random_problem(48, 5, -15.0, 3.0, 17).unwrap();
    let out = solve(&problem, &SolverParams::default()).unwrap();
    assert!(out.converged);
    assert!(out.trace.is_monotone(MONOTONE_SLACK));

    // the reported residual is reproduced from the focal data alone
    let again = Reflector::from_eta(out.reflector.eta.clone(), &problem).unwrap();
    assert_eq!(again, out.reflector);
    let res = pushforward_residual(&again, &problem).unwrap();
    assert_eq!(res.max_abs, out.residual.max_abs);
    assert!(res.max_abs <= 1e-3);

    let rt = raytrace(&again, &problem, 200_000, 4).unwrap();
    assert_eq!(rt.rays, 200_000);
    assert!(rt.tv < 0.02, "{}", rt.tv);
    assert!(rt.max_aim_error < 1e-6);
}

#[test]
fn normalization_scales_the_reflector() {
    let problem = random_problem(32, 4, -12.0, 2.0, 5).unwrap();
    let a = solve(&problem, &SolverParams::default()).unwrap();
    let b = solve(&problem, &SolverParams { c0: Some(2.0), ..SolverParams::default() }).unwrap();
    assert!((a.reflector.min_rho() - 1.0).abs() < 1e-12);
    assert!((b.reflector.min_rho() - 2.0).abs() < 1e-12);
    assert!(a.converged && b.converged);
}

#[test]
fn symmetric_pair_splits_evenly() {
    let problem = symmetric_pair(40, -10.0, 2.0).unwrap();
    let out = solve(&problem, &SolverParams::default()).unwrap();
    let rt = raytrace(&out.reflector, &problem, 100_000, 9).unwrap();
    let diff = rt.counts[0].abs_diff(rt.counts[1]) as f64;
    // three binomial standard deviations of the difference
    assert!(diff <= 3.0 * (rt.rays as f64).sqrt(), "{:?}", rt.counts);
}
