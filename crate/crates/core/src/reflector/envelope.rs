//! Envelopes of confocal ellipsoids and the `(ρ, η)` transform pair.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{Reflector, ReflectorProblem};
use crate::ellipsoid::{eccentricity, Ellipsoid, DEGENERATE_DENOMINATOR};
use crate::error::{Error, Result};
use crate::geometry::{lift, ChartPoint};
use crate::roots::bisect_increasing;
use crate::vector::{dist, dot, AmbientVector};

fn eccentricities(eta: &[f64], problem: &ReflectorProblem) -> Result<Vec<f64>> {
    if eta.len() != problem.n_target() {
        return Err(Error::DimensionMismatch { expected: problem.n_target(), got: eta.len() });
    }
    eta.iter()
        .zip(problem.focus_dist())
        .map(|(&e, &d)| {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::InvalidParameter(format!("η must be positive, got {e}")));
            }
            eccentricity(1.0 / e, d)
        })
        .collect()
}

/// `ρ_i = min_j p_j / (1 - ε_j θ_ij)` with the argmin (lowest index on ties).
pub fn rho_from_eta(eta: &[f64], problem: &ReflectorProblem) -> Result<(Vec<f64>, Vec<usize>)> {
    let eps = eccentricities(eta, problem)?;
    let rows: Vec<Result<(f64, usize)>> = (0..problem.n_source())
        .into_par_iter()
        .map(|i| {
            let th = problem.theta_row(i);
            let mut best = (f64::INFINITY, 0);
            for j in 0..eta.len() {
                let den = 1.0 - eps[j] * th[j];
                if den <= DEGENERATE_DENOMINATOR {
                    return Err(Error::InfeasibleGeometry(format!(
                        "ellipsoid {j} degenerates at source node {i} (1 - εθ = {den:e})"
                    )));
                }
                let r = 1.0 / (eta[j] * den);
                if r < best.0 {
                    best = (r, j);
                }
            }
            Ok(best)
        })
        .collect();
    let mut rho = Vec::with_capacity(rows.len());
    let mut contact = Vec::with_capacity(rows.len());
    for r in rows {
        let (v, j) = r?;
        rho.push(v);
        contact.push(j);
    }
    Ok((rho, contact))
}

/// `η_j = min_i 1/p_ij` where `p_ij` is the focal parameter of the
/// ellipsoid with focus `Y_j` through `X_i ρ_i`.
pub fn eta_from_rho(rho: &[f64], problem: &ReflectorProblem) -> Result<Vec<f64>> {
    check_rho(rho, problem)?;
    let foci = problem.target().foci();
    let lifted = problem.grid().lifted();
    (0..problem.n_target())
        .into_par_iter()
        .map(|j| {
            let y = &foci[j];
            let d = problem.focus_dist()[j];
            let mut p_max = 0.0f64;
            for (i, x) in lifted.iter().enumerate() {
                let point: Vec<f64> = x.iter().map(|v| v * rho[i]).collect();
                let eps = d / (rho[i] + dist(y, &point));
                let p = rho[i] * (1.0 - eps * problem.theta(i, j));
                if !(p > 0.0) {
                    return Err(Error::InfeasibleGeometry(format!(
                        "no supporting ellipsoid for target {j} at node {i}"
                    )));
                }
                p_max = p_max.max(p);
            }
            Ok(1.0 / p_max)
        })
        .collect()
}

/// Same transform by monotone bracketing of
/// `η = min_i [ρ_i (1 - ε(1/η) θ_ij)]^{-1}` in `log η`.
///
/// The right side is decreasing in `η` (ε grows as `p` shrinks), so the
/// fixed-point gap is increasing and has a single root.
pub fn eta_from_rho_bracketed(rho: &[f64], problem: &ReflectorProblem, tol: f64) -> Result<Vec<f64>> {
    check_rho(rho, problem)?;
    (0..problem.n_target())
        .into_par_iter()
        .map(|j| {
            let d = problem.focus_dist()[j];
            let gap = |log_eta: f64| {
                let eta = log_eta.exp();
                let Ok(eps) = eccentricity(1.0 / eta, d) else { return f64::NAN };
                let rhs = (0..rho.len())
                    .map(|i| 1.0 / (rho[i] * (1.0 - eps * problem.theta(i, j))))
                    .fold(f64::INFINITY, f64::min);
                log_eta - rhs.ln()
            };
            let scale = rho.iter().copied().fold(f64::INFINITY, f64::min).min(d).max(1e-300);
            let centre = -scale.ln();
            let b = bisect_increasing(gap, centre - 40.0, centre + 40.0, tol)
                .map_err(|e| Error::InfeasibleGeometry(format!("bracketing failed for target {j}: {e}")))?;
            Ok(b.mid().exp())
        })
        .collect()
}

fn check_rho(rho: &[f64], problem: &ReflectorProblem) -> Result<()> {
    if rho.len() != problem.n_source() {
        return Err(Error::DimensionMismatch { expected: problem.n_source(), got: rho.len() });
    }
    if rho.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::InvalidParameter("ρ must be positive and finite".into()));
    }
    Ok(())
}

/// Envelope value and derivatives at an arbitrary chart point.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopePoint {
    pub rho: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
    pub contact: usize,
    /// Ellipsoids within `tie_tol` (relative) of the minimum.
    pub multiplicity: usize,
}

/// The envelope `min_j ρ_j(x)` with the derivatives of the active ellipsoid.
pub fn envelope_at(x: &ChartPoint, foci: &[AmbientVector], eta: &[f64], tie_tol: f64) -> Result<EnvelopePoint> {
    if foci.len() != eta.len() || foci.is_empty() {
        return Err(Error::DimensionMismatch { expected: foci.len(), got: eta.len() });
    }
    let big_x = lift(x);
    let radials: Vec<f64> = foci
        .iter()
        .zip(eta)
        .map(|(y, &e)| {
            Ellipsoid::new(y.clone(), 1.0 / e)?
                .radial(&big_x)
                .map_err(|_| Error::InfeasibleGeometry("ellipsoid degenerates on the source".into()))
        })
        .collect::<Result<_>>()?;
    let mut contact = 0;
    for (j, r) in radials.iter().enumerate() {
        if *r < radials[contact] {
            contact = j;
        }
    }
    let r0 = radials[contact];
    let multiplicity = radials.iter().filter(|r| **r <= r0 * (1.0 + tie_tol)).count();
    let (rho, grad, hess) = Ellipsoid::new(foci[contact].clone(), 1.0 / eta[contact])?.radial_derivatives(x)?;
    Ok(EnvelopePoint { rho, grad, hess, contact, multiplicity })
}

/// Number of ellipsoids that support the reflector at node `i` within a
/// relative tolerance; more than one marks a kink where the reflection map
/// is set-valued.
pub fn contact_multiplicity(i: usize, reflector: &Reflector, problem: &ReflectorProblem, tol: f64) -> Result<usize> {
    let eps = eccentricities(&reflector.eta, problem)?;
    let th = problem.theta_row(i);
    let rho = reflector.rho[i];
    Ok((0..eps.len()).filter(|&j| 1.0 / (reflector.eta[j] * (1.0 - eps[j] * th[j])) <= rho * (1.0 + tol)).count())
}

/// Exhaustive admissibility scan: the largest relative amount by which `ρ`
/// exceeds some ellipsoid, and the largest relative mismatch with the
/// contact ellipsoid.
pub fn focal_oracle(reflector: &Reflector, problem: &ReflectorProblem) -> Result<(f64, f64)> {
    let eps = eccentricities(&reflector.eta, problem)?;
    let foci = problem.target().foci();
    let mut above = f64::NEG_INFINITY;
    let mut contact_gap = 0.0f64;
    for (i, x) in problem.grid().lifted().iter().enumerate() {
        let rho = reflector.rho[i];
        for (j, y) in foci.iter().enumerate() {
            // evaluated from the focal data directly, not the cached angles
            let th = dot(x, y) / problem.focus_dist()[j];
            let r = 1.0 / (reflector.eta[j] * (1.0 - eps[j] * th));
            above = above.max((rho - r) / rho);
            if j == reflector.contact[i] {
                contact_gap = contact_gap.max((rho - r).abs() / rho);
            }
        }
    }
    Ok((above, contact_gap))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::random_problem;
    use super::super::{BalancePolicy, TargetPoint, TargetSpec};
    use super::*;
    use crate::dual_core::{u_star, v_star, TransformParams};
    use crate::reflector::ReflectorConstraint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_eta(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(0.2..2.0)).collect()
    }

    #[test]
    fn envelope_is_admissible() {
        for seed in 0..5 {
            let p = random_problem(16, 6, -4.0, seed);
            let r = Reflector::from_eta(random_eta(6, seed), &p).unwrap();
            let (above, gap) = focal_oracle(&r, &p).unwrap();
            assert!(above <= 1e-14, "{above}");
            assert!(gap <= 1e-14, "{gap}");
        }
    }

    #[test]
    fn single_target_is_one_ellipsoid() {
        let p = random_problem(12, 1, -3.0, 4);
        let r = Reflector::from_eta(vec![0.8], &p).unwrap();
        let e = Ellipsoid::new(p.target().points[0].y.clone(), 1.0 / 0.8).unwrap();
        for (i, x) in p.grid().lifted().iter().enumerate() {
            assert!((r.rho[i] - e.radial(x).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn duplicated_target_gives_same_envelope() {
        let p = random_problem(12, 3, -3.0, 8);
        let mut pts = p.target().points.clone();
        pts.push(TargetPoint { y: pts[1].y.clone(), g: pts[1].g });
        let flux: f64 = pts.iter().map(|t| t.g).sum();
        let scale = (flux - pts[3].g) / flux;
        for t in pts.iter_mut() {
            t.g *= scale;
        }
        let q = ReflectorProblem::new(
            p.grid().clone(),
            p.f().to_vec(),
            TargetSpec::new(pts, None).unwrap(),
            1.0,
            BalancePolicy::Rescale,
        )
        .unwrap();
        let eta = random_eta(3, 2);
        let mut eta4 = eta.clone();
        eta4.push(eta[1]);
        let (a, _) = rho_from_eta(&eta, &p).unwrap();
        let (b, _) = rho_from_eta(&eta4, &q).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn eta_round_trip_on_a_single_ellipsoid() {
        let p = random_problem(12, 1, -3.0, 4);
        let (rho, _) = rho_from_eta(&[0.37], &p).unwrap();
        let eta = eta_from_rho(&rho, &p).unwrap();
        assert!((eta[0] - 0.37).abs() < 1e-10);
        let eta_b = eta_from_rho_bracketed(&rho, &p, 1e-14).unwrap();
        assert!((eta_b[0] - 0.37).abs() < 1e-10);
    }

    #[test]
    fn closed_form_and_bracketed_transforms_agree() {
        let p = random_problem(12, 5, -4.0, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho: Vec<f64> = (0..p.n_source()).map(|_| rng.gen_range(0.8..1.2)).collect();
        let a = eta_from_rho(&rho, &p).unwrap();
        let b = eta_from_rho_bracketed(&rho, &p, 1e-14).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() / x < 1e-10, "{x} vs {y}");
        }
        // the round trip gives the least envelope above ρ, with equality for
        // admissible ρ
        let (back, _) = rho_from_eta(&a, &p).unwrap();
        assert!(back.iter().zip(&rho).all(|(b, r)| *b >= r * (1.0 - 1e-12)));
        assert!(back.iter().zip(&rho).any(|(b, r)| *b > r * (1.0 + 1e-6)));
        let again = eta_from_rho(&back, &p).unwrap();
        let (twice, _) = rho_from_eta(&again, &p).unwrap();
        for (x, y) in twice.iter().zip(&back) {
            assert!((x - y).abs() / y < 1e-10);
        }
    }

    #[test]
    fn log_pair_is_a_dual_pair() {
        let p = random_problem(16, 6, -4.0, 3);
        let eta = random_eta(6, 9);
        let (rho, _) = rho_from_eta(&eta, &p).unwrap();
        let eta = eta_from_rho(&rho, &p).unwrap();
        let d = p.domains();
        let c = ReflectorConstraint::ambient();
        let tp = TransformParams::default();
        let u: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
        let v = v_star(&u, &c, &d, &tp).unwrap();
        for (a, b) in v.iter().zip(&eta) {
            assert!((a - b.ln()).abs() < 1e-10);
        }
        let u2 = u_star(&v, &c, &d, &tp).unwrap();
        for (a, b) in u2.iter().zip(&u) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn continuous_envelope_matches_grid() {
        let p = random_problem(16, 4, -4.0, 6);
        let eta = random_eta(4, 1);
        let r = Reflector::from_eta(eta.clone(), &p).unwrap();
        let foci = p.target().foci();
        for (i, x) in p.grid().points().iter().enumerate() {
            let e = envelope_at(x, &foci, &eta, 0.0).unwrap();
            assert!((e.rho - r.rho[i]).abs() < 1e-13);
            assert_eq!(e.contact, r.contact[i]);
            assert!(contact_multiplicity(i, &r, &p, 1e-12).unwrap() >= 1);
        }
    }
}
