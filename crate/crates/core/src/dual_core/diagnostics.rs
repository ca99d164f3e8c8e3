//! Structural checks on constraints, objectives and dual pairs.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::transforms::{u_star, TransformParams};
use super::{ConstraintPhi, DiscreteDomainPair, ObjectiveF, PotentialPair};
use crate::error::{Error, Result};
use crate::vector::{dist, norm};

/// Ranges of the scalar slots sampled by [`check_conditions`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarBox {
    pub t: (f64, f64),
    pub s: (f64, f64),
    /// Samples per scalar axis.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub min_f_t: f64,
    pub min_f_s: f64,
    pub min_phi_t: f64,
    pub min_phi_s: f64,
    /// Sampled lower bound `δ0 = min(min φ_t, min φ_s)`.
    pub delta0: f64,
    /// `Σ γ_ij [-F_t + F_s φ_t/φ_s]` at the supplied pair.
    pub balance: Option<f64>,
    pub violations: Vec<String>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples monotonicity of `F` and `φ` over the domains and scalar box and
/// evaluates the balance integral at `pair`.
pub fn check_conditions<F, P>(
    obj: &F,
    phi: &P,
    domains: &DiscreteDomainPair,
    scalar_box: &ScalarBox,
    pair: Option<&PotentialPair>,
    delta0_requested: f64,
    balance_tol: f64,
) -> ConditionReport
where
    F: ObjectiveF + ?Sized,
    P: ConstraintPhi + ?Sized,
{
    let k = scalar_box.samples.max(2);
    let lerp = |r: (f64, f64), a: usize| r.0 + (r.1 - r.0) * a as f64 / (k - 1) as f64;
    let pairs = domains.len_u() * domains.len_v();
    let stride = (pairs / 4000).max(1);
    let mins = (0..pairs)
        .into_par_iter()
        .step_by(stride)
        .map(|flat| {
            let i = flat / domains.len_v();
            let j = flat % domains.len_v();
            let (x, y) = (&domains.u_points[i], &domains.v_points[j]);
            let (f, g) = (domains.f[i], domains.g[j]);
            let mut m = [f64::INFINITY; 4];
            for a in 0..k {
                for b in 0..k {
                    let t = lerp(scalar_box.t, a);
                    let s = lerp(scalar_box.s, b);
                    m[0] = m[0].min(obj.f_t(x, y, f, g, t, s));
                    m[1] = m[1].min(obj.f_s(x, y, f, g, t, s));
                    m[2] = m[2].min(phi.phi_t(x, y, t, s));
                    m[3] = m[3].min(phi.phi_s(x, y, t, s));
                }
            }
            m
        })
        .reduce(|| [f64::INFINITY; 4], |a, b| [a[0].min(b[0]), a[1].min(b[1]), a[2].min(b[2]), a[3].min(b[3])]);

    let balance = pair.map(|p| {
        let rows: Vec<f64> = (0..domains.len_u())
            .into_par_iter()
            .map(|i| {
                let x = &domains.u_points[i];
                (0..domains.len_v())
                    .map(|j| {
                        let y = &domains.v_points[j];
                        let (f, g, t, s) = (domains.f[i], domains.g[j], p.u[i], p.v[j]);
                        let ratio = phi.phi_t(x, y, t, s) / phi.phi_s(x, y, t, s);
                        domains.gamma(i, j) * (-obj.f_t(x, y, f, g, t, s) + obj.f_s(x, y, f, g, t, s) * ratio)
                    })
                    .sum::<f64>()
            })
            .collect();
        rows.iter().sum::<f64>()
    });

    let mut violations = Vec::new();
    if mins[0] < 0.0 {
        violations.push(format!("F_t negative: {:e}", mins[0]));
    }
    if mins[1] < 0.0 {
        violations.push(format!("F_s negative: {:e}", mins[1]));
    }
    if mins[2] < delta0_requested {
        violations.push(format!("phi_t below {delta0_requested:e}: {:e}", mins[2]));
    }
    if mins[3] < delta0_requested {
        violations.push(format!("phi_s below {delta0_requested:e}: {:e}", mins[3]));
    }
    if let Some(b) = balance {
        if b.abs() > balance_tol {
            violations.push(format!("balance integral {b:e} exceeds {balance_tol:e}"));
        }
    }
    ConditionReport {
        min_f_t: mins[0],
        min_f_s: mins[1],
        min_phi_t: mins[2],
        min_phi_s: mins[3],
        delta0: mins[2].min(mins[3]),
        balance,
        violations,
    }
}

/// Contact map `T(x_i) = argmax_j φ(x_i, y_j, u_i, v_j)` with the gap to
/// the runner-up. Ties go to the lowest index.
pub fn optimal_map_with_margin<P: ConstraintPhi + ?Sized>(
    pair: &PotentialPair,
    phi: &P,
    domains: &DiscreteDomainPair,
    contact_tol: f64,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let rows: Vec<Result<(usize, f64)>> = (0..domains.len_u())
        .into_par_iter()
        .map(|i| {
            let x = &domains.u_points[i];
            let mut best = (usize::MAX, f64::NEG_INFINITY);
            let mut second = f64::NEG_INFINITY;
            for (j, y) in domains.v_points.iter().enumerate() {
                let val = phi.value(x, y, pair.u[i], pair.v[j]);
                if val > best.1 {
                    second = best.1;
                    best = (j, val);
                } else if val > second {
                    second = val;
                }
            }
            if !(best.1.abs() <= contact_tol) {
                return Err(Error::DanglingPoint(i));
            }
            Ok((best.0, best.1 - second))
        })
        .collect();
    let mut map = Vec::with_capacity(rows.len());
    let mut margin = Vec::with_capacity(rows.len());
    for r in rows {
        let (j, m) = r?;
        map.push(j);
        margin.push(m);
    }
    Ok((map, margin))
}

pub fn optimal_map<P: ConstraintPhi + ?Sized>(
    pair: &PotentialPair,
    phi: &P,
    domains: &DiscreteDomainPair,
    contact_tol: f64,
) -> Result<Vec<usize>> {
    optimal_map_with_margin(pair, phi, domains, contact_tol).map(|(m, _)| m)
}

/// `|φ_x + φ_t Du|` at each source point, evaluated at its contact.
pub fn stationarity_residual<P: ConstraintPhi + ?Sized>(
    pair: &PotentialPair,
    phi: &P,
    domains: &DiscreteDomainPair,
    map: &[usize],
    du: &[Vec<f64>],
) -> Vec<f64> {
    (0..domains.len_u())
        .into_par_iter()
        .map(|i| {
            let j = map[i];
            let (x, y) = (&domains.u_points[i], &domains.v_points[j]);
            let (t, s) = (pair.u[i], pair.v[j]);
            let px = phi.phi_x(x, y, t, s);
            let pt = phi.phi_t(x, y, t, s);
            let r: Vec<f64> = px.iter().zip(&du[i]).map(|(a, d)| a + pt * d).collect();
            norm(&r)
        })
        .collect()
}

/// `φ_xy + Du ⊗ φ_yt + φ_xs ⊗ Dv + φ_ts Du ⊗ Dv` and its determinant.
///
/// Entry `(a, b)` pairs source coordinate `a` with target coordinate `b`.
pub fn uniqueness_matrix<P: ConstraintPhi + ?Sized>(
    phi: &P,
    x: &[f64],
    y: &[f64],
    t: f64,
    s: f64,
    du: &[f64],
    dv: &[f64],
) -> (DMatrix<f64>, f64) {
    let p = phi.partials(x, y, t, s);
    let m = DMatrix::from_fn(x.len(), y.len(), |a, b| {
        p.xy[(a, b)] + du[a] * p.yt[b] + p.xs[a] * dv[b] + p.ts * du[a] * dv[b]
    });
    let det = if m.is_square() { m.determinant() } else { f64::NAN };
    (m, det)
}

/// One row of [`variational_derivative_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalRow {
    pub eps: f64,
    /// Largest `|(u_ε - u)/ε + (φ_s/φ_t) h(T(x))|` over stable points.
    pub max_error: f64,
    /// Points whose contact is unchanged by the perturbation.
    pub stable: usize,
    /// Points whose contact moved (cell-boundary points).
    pub switched: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalReport {
    pub rows: Vec<VariationalRow>,
    /// `Σ γ_ij [-F_t (φ_s/φ_t)(x_i, T x_i) h(T x_i) + F_s h(y_j)]`.
    pub integral: f64,
}

/// First variation of the dual pair under `v -> v + ε h`.
pub fn variational_derivative_check<F, P>(
    pair: &PotentialPair,
    obj: &F,
    phi: &P,
    domains: &DiscreteDomainPair,
    h: &[f64],
    eps_list: &[f64],
    contact_tol: f64,
    params: &TransformParams,
) -> Result<VariationalReport>
where
    F: ObjectiveF + ?Sized,
    P: ConstraintPhi + ?Sized,
{
    if h.len() != domains.len_v() {
        return Err(Error::DimensionMismatch { expected: domains.len_v(), got: h.len() });
    }
    let map = optimal_map(pair, phi, domains, contact_tol)?;
    let ratio: Vec<f64> = (0..domains.len_u())
        .map(|i| {
            let (x, y) = (&domains.u_points[i], &domains.v_points[map[i]]);
            let (t, s) = (pair.u[i], pair.v[map[i]]);
            phi.phi_s(x, y, t, s) / phi.phi_t(x, y, t, s)
        })
        .collect();

    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let v_eps: Vec<f64> = pair.v.iter().zip(h).map(|(v, hj)| v + eps * hj).collect();
        let u_eps = u_star(&v_eps, phi, domains, params)?;
        let moved = PotentialPair { u: u_eps.clone(), v: v_eps };
        let map_eps = optimal_map(&moved, phi, domains, contact_tol.max(1e-8))?;
        let mut row = VariationalRow { eps, max_error: 0.0, stable: 0, switched: 0 };
        for i in 0..domains.len_u() {
            if map_eps[i] != map[i] {
                row.switched += 1;
                continue;
            }
            row.stable += 1;
            let slope = (u_eps[i] - pair.u[i]) / eps;
            let predicted = -ratio[i] * h[map[i]];
            row.max_error = row.max_error.max((slope - predicted).abs());
        }
        rows.push(row);
    }

    let parts: Vec<f64> = (0..domains.len_u())
        .into_par_iter()
        .map(|i| {
            let x = &domains.u_points[i];
            let ht = h[map[i]];
            (0..domains.len_v())
                .map(|j| {
                    let y = &domains.v_points[j];
                    let (f, g, t, s) = (domains.f[i], domains.g[j], pair.u[i], pair.v[j]);
                    domains.gamma(i, j)
                        * (-obj.f_t(x, y, f, g, t, s) * ratio[i] * ht + obj.f_s(x, y, f, g, t, s) * h[j])
                })
                .sum::<f64>()
        })
        .collect();
    Ok(VariationalReport { rows, integral: parts.iter().sum() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzReport {
    /// `sup (|φ_x| + |φ_y|)` over sampled pairs.
    pub c2: f64,
    /// `min(inf φ_t, inf φ_s)` over sampled pairs.
    pub c3: f64,
    pub bound: f64,
    /// Largest `|u_a - u_b| / |x_a - x_b|` over the supplied edges.
    pub worst_quotient: f64,
    pub violations: usize,
}

impl LipschitzReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Compares discrete Lipschitz quotients of `u` on `edges` with `C2/C3`.
pub fn lipschitz_bound_check<P: ConstraintPhi + ?Sized>(
    pair: &PotentialPair,
    phi: &P,
    domains: &DiscreteDomainPair,
    edges: &[(usize, usize)],
    slack: f64,
) -> LipschitzReport {
    let (c2, c3) = (0..domains.len_u())
        .into_par_iter()
        .map(|i| {
            let x = &domains.u_points[i];
            let mut c2 = 0.0f64;
            let mut c3 = f64::INFINITY;
            for (j, y) in domains.v_points.iter().enumerate() {
                let (t, s) = (pair.u[i], pair.v[j]);
                c2 = c2.max(norm(&phi.phi_x(x, y, t, s)) + norm(&phi.phi_y(x, y, t, s)));
                c3 = c3.min(phi.phi_t(x, y, t, s)).min(phi.phi_s(x, y, t, s));
            }
            (c2, c3)
        })
        .reduce(|| (0.0, f64::INFINITY), |a, b| (a.0.max(b.0), a.1.min(b.1)));
    let bound = c2 / c3;
    let mut worst = 0.0f64;
    let mut violations = 0;
    for &(a, b) in edges {
        let q = (pair.u[a] - pair.u[b]).abs() / dist(&domains.u_points[a], &domains.u_points[b]);
        worst = worst.max(q);
        if q > bound * (1.0 + slack) + 1e-12 {
            violations += 1;
        }
    }
    LipschitzReport { c2, c3, bound, worst_quotient: worst, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual_core::{
        maximize_dual, v_star, AscentParams, Bilinear, Distance, OtConstraint, OtObjective, SquaredDistance,
    };

    fn line(n: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
        (0..n).map(|k| vec![lo + (hi - lo) * (k as f64 + 0.5) / n as f64]).collect()
    }

    #[test]
    fn ot_conditions_and_balance() {
        let d = DiscreteDomainPair::new(line(5, 0.0, 1.0), vec![1.0; 5], line(5, 0.5, 2.0), vec![1.0; 5]).unwrap();
        let phi = OtConstraint { cost: SquaredDistance { k: 1.0 } };
        let obj = OtObjective { u_measure: 5.0, v_measure: 5.0 };
        let pair = PotentialPair { u: vec![0.0; 5], v: vec![0.0; 5] };
        let b = ScalarBox { t: (-1.0, 1.0), s: (-1.0, 1.0), samples: 3 };
        let r = check_conditions(&obj, &phi, &d, &b, Some(&pair), 0.5, 1e-12);
        assert!(r.passed(), "{:?}", r.violations);
        assert_eq!(r.min_phi_t, 1.0);
        assert_eq!(r.min_phi_s, 1.0);
        assert!(r.balance.unwrap().abs() < 1e-12);
    }

    #[test]
    fn sorted_matching_on_a_line() {
        let xs = vec![vec![0.9], vec![0.1], vec![0.5], vec![0.3]];
        let ys = vec![vec![1.4], vec![0.2], vec![1.0], vec![0.6]];
        let d = DiscreteDomainPair::new(xs.clone(), vec![1.0; 4], ys.clone(), vec![1.0; 4]).unwrap();
        let phi = OtConstraint { cost: SquaredDistance { k: 1.0 } };
        let obj = OtObjective { u_measure: 4.0, v_measure: 4.0 };
        let r = maximize_dual(
            &PotentialPair { u: vec![0.0; 4], v: vec![0.0; 4] },
            &obj,
            &phi,
            &d,
            &AscentParams::default(),
        )
        .unwrap();
        // The monotone matching pairs x_i with y_i; every one of its edges
        // must be tight, though a point may also touch a second target.
        let map = optimal_map(&r.pair, &phi, &d, 1e-6).unwrap();
        for i in 0..4 {
            assert!(phi.value(&xs[i], &ys[i], r.pair.u[i], r.pair.v[i]).abs() < 1e-8);
            assert!(phi.value(&xs[i], &ys[map[i]], r.pair.u[i], r.pair.v[map[i]]).abs() < 1e-6);
        }
        let want: f64 = (0..4).map(|i| (xs[i][0] - ys[i][0]).powi(2)).sum();
        assert!((r.value - want).abs() < 1e-9);
    }

    #[test]
    fn single_target_map_is_constant() {
        let d = DiscreteDomainPair::new(line(6, 0.0, 1.0), vec![1.0; 6], vec![vec![0.4]], vec![1.0]).unwrap();
        let phi = OtConstraint { cost: SquaredDistance { k: 1.0 } };
        let u = u_star(&[0.2], &phi, &d, &TransformParams::default()).unwrap();
        let map = optimal_map(&PotentialPair { u, v: vec![0.2] }, &phi, &d, 1e-12).unwrap();
        assert!(map.iter().all(|&j| j == 0));
    }

    #[test]
    fn dangling_point_detected() {
        let d = DiscreteDomainPair::new(line(2, 0.0, 1.0), vec![1.0; 2], line(2, 0.0, 1.0), vec![1.0; 2]).unwrap();
        let phi = OtConstraint { cost: SquaredDistance { k: 1.0 } };
        let pair = PotentialPair { u: vec![-5.0, -5.0], v: vec![0.0, 0.0] };
        assert!(matches!(optimal_map(&pair, &phi, &d, 1e-8), Err(Error::DanglingPoint(0))));
    }

    #[test]
    fn uniqueness_matrix_examples() {
        let zero = [0.0, 0.0];
        let neg_dot = OtConstraint { cost: Bilinear { a: -DMatrix::identity(2, 2) } };
        let (m, det) = uniqueness_matrix(&neg_dot, &[0.2, 0.1], &[0.4, -0.3], 0.0, 0.0, &zero, &zero);
        assert_eq!(m, DMatrix::identity(2, 2));
        assert_eq!(det, 1.0);
        let dot = OtConstraint { cost: Bilinear { a: DMatrix::identity(2, 2) } };
        let (_, det) = uniqueness_matrix(&dot, &[0.2, 0.1], &[0.4, -0.3], 0.0, 0.0, &zero, &zero);
        assert_eq!(det, 1.0);
        let dot3 = OtConstraint { cost: Bilinear { a: DMatrix::identity(3, 3) } };
        let (_, det3) = uniqueness_matrix(&dot3, &[0.2, 0.1, 0.0], &[0.4, -0.3, 0.1], 0.0, 0.0, &[0.0; 3], &[0.0; 3]);
        assert_eq!(det3, -1.0);
        let quad = OtConstraint { cost: SquaredDistance { k: 0.5 } };
        let (m, det) = uniqueness_matrix(&quad, &[0.2, 0.1], &[0.4, -0.3], 0.0, 0.0, &zero, &zero);
        assert_eq!(m, DMatrix::identity(2, 2));
        assert_eq!(det, 1.0);
        let degenerate = OtConstraint { cost: Bilinear { a: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]) } };
        let (_, det) = uniqueness_matrix(&degenerate, &[0.2, 0.1], &[0.4, -0.3], 0.0, 0.0, &zero, &zero);
        assert_eq!(det, 0.0);
    }

    #[test]
    fn ot_variation_is_minus_h() {
        let d = DiscreteDomainPair::new(line(8, 0.0, 1.0), vec![1.0; 8], line(3, 0.0, 1.0), vec![1.0; 3]).unwrap();
        let phi = OtConstraint { cost: SquaredDistance { k: 1.0 } };
        let obj = OtObjective { u_measure: 8.0, v_measure: 3.0 };
        let v = vec![0.1, 0.0, -0.1];
        let u = u_star(&v, &phi, &d, &TransformParams::default()).unwrap();
        let pair = PotentialPair { u, v };
        let h = vec![0.0, 1.0, 0.0];
        let r =
            variational_derivative_check(&pair, &obj, &phi, &d, &h, &[1e-3, 1e-4], 1e-12, &TransformParams::default())
                .unwrap();
        for row in &r.rows {
            assert!(row.max_error < 1e-9, "{row:?}");
        }
        let zero =
            variational_derivative_check(&pair, &obj, &phi, &d, &[0.0; 3], &[1e-3], 1e-12, &TransformParams::default())
                .unwrap();
        assert_eq!(zero.integral, 0.0);
        assert_eq!(zero.rows[0].max_error, 0.0);
    }

    #[test]
    fn lipschitz_bound_for_distance_cost() {
        let d = DiscreteDomainPair::new(line(30, 0.0, 1.0), vec![1.0; 30], line(7, -0.5, 1.5), vec![1.0; 7]).unwrap();
        let phi = OtConstraint { cost: Distance };
        let v: Vec<f64> = (0..7).map(|j| (j as f64).sin()).collect();
        let u = u_star(&v, &phi, &d, &TransformParams::default()).unwrap();
        let v = v_star(&u, &phi, &d, &TransformParams::default()).unwrap();
        let edges: Vec<(usize, usize)> = (0..29).map(|k| (k, k + 1)).collect();
        let r = lipschitz_bound_check(&PotentialPair { u, v }, &phi, &d, &edges, 1e-6);
        assert!((r.c3 - 1.0).abs() < 1e-6);
        assert!(r.worst_quotient <= 1.0 + 1e-9);
        assert!(r.passed());
    }
}
