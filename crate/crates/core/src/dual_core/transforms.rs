//! Alternating transforms `v*`, `u*` and the functional `I`.

use rayon::prelude::*;

use super::{ConstraintPhi, DiscreteDomainPair, ObjectiveF, PotentialPair};
use crate::error::{Error, Result};

/// Scalar search ranges and root tolerance for the transforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformParams {
    pub t_range: (f64, f64),
    pub s_range: (f64, f64),
    pub root_tol: f64,
}

impl Default for TransformParams {
    fn default() -> Self {
        Self { t_range: (-50.0, 50.0), s_range: (-50.0, 50.0), root_tol: 1e-12 }
    }
}

/// `v*_j = sup{s : φ(x_i, y_j, u_i, s) <= 0 for all i}`.
///
/// Each point only triggers a root solve when it can lower the running
/// minimum, which keeps the transform close to one evaluation per pair.
pub fn v_star<P: ConstraintPhi + ?Sized>(
    u: &[f64],
    phi: &P,
    domains: &DiscreteDomainPair,
    params: &TransformParams,
) -> Result<Vec<f64>> {
    if u.len() != domains.len_u() {
        return Err(Error::DimensionMismatch { expected: domains.len_u(), got: u.len() });
    }
    (0..domains.len_v())
        .into_par_iter()
        .map(|j| {
            let y = &domains.v_points[j];
            let mut best = f64::INFINITY;
            for (i, x) in domains.u_points.iter().enumerate() {
                if best.is_finite() {
                    let at = phi.value(x, y, u[i], best);
                    if !at.is_finite() {
                        return Err(Error::InfeasibleGeometry(format!("constraint undefined at pair ({i}, {j})")));
                    }
                    if at <= 0.0 {
                        continue;
                    }
                }
                let r = phi.solve_s(x, y, u[i], params.s_range, params.root_tol)?;
                best = best.min(r);
            }
            Ok(best)
        })
        .collect()
}

/// `u*_i = sup{t : φ(x_i, y_j, t, v_j) <= 0 for all j}`.
pub fn u_star<P: ConstraintPhi + ?Sized>(
    v: &[f64],
    phi: &P,
    domains: &DiscreteDomainPair,
    params: &TransformParams,
) -> Result<Vec<f64>> {
    if v.len() != domains.len_v() {
        return Err(Error::DimensionMismatch { expected: domains.len_v(), got: v.len() });
    }
    (0..domains.len_u())
        .into_par_iter()
        .map(|i| {
            let x = &domains.u_points[i];
            let mut best = f64::INFINITY;
            for (j, y) in domains.v_points.iter().enumerate() {
                if best.is_finite() {
                    let at = phi.value(x, y, best, v[j]);
                    if !at.is_finite() {
                        return Err(Error::InfeasibleGeometry(format!("constraint undefined at pair ({i}, {j})")));
                    }
                    if at <= 0.0 {
                        continue;
                    }
                }
                let r = phi.solve_t(x, y, v[j], params.t_range, params.root_tol)?;
                best = best.min(r);
            }
            Ok(best)
        })
        .collect()
}

/// `Σ_ij γ_ij F(x_i, y_j, u_i, v_j)`, summed in a fixed order.
pub fn functional_i<F: ObjectiveF + ?Sized>(pair: &PotentialPair, obj: &F, domains: &DiscreteDomainPair) -> f64 {
    let rows: Vec<f64> = (0..domains.len_u())
        .into_par_iter()
        .map(|i| {
            let x = &domains.u_points[i];
            let mut acc = 0.0;
            for (j, y) in domains.v_points.iter().enumerate() {
                let w = domains.gamma(i, j);
                if w != 0.0 {
                    acc += w * obj.value(x, y, domains.f[i], domains.g[j], pair.u[i], pair.v[j]);
                }
            }
            acc
        })
        .collect();
    rows.iter().sum()
}

/// Largest `φ(x_i, y_j, u_i, v_j)` over all pairs.
pub fn max_violation<P: ConstraintPhi + ?Sized>(pair: &PotentialPair, phi: &P, domains: &DiscreteDomainPair) -> f64 {
    let rows: Vec<f64> = (0..domains.len_u())
        .into_par_iter()
        .map(|i| {
            domains
                .v_points
                .iter()
                .enumerate()
                .map(|(j, y)| phi.value(&domains.u_points[i], y, pair.u[i], pair.v[j]))
                .fold(f64::NEG_INFINITY, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) })
        })
        .collect();
    rows.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_feasible<P: ConstraintPhi + ?Sized>(
    pair: &PotentialPair,
    phi: &P,
    domains: &DiscreteDomainPair,
    tol: f64,
) -> bool {
    max_violation(pair, phi, domains) <= tol
}
