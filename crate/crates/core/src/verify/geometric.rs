//! Chart geometry and single-ellipsoid invariants.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Bound, Check, Size, SuiteReport};
use crate::ellipsoid::{eccentricity_identity, Ellipsoid};
use crate::error::Result;
use crate::geometry::{
    embedding_hessian, gauss_formula, graph_tangents, lift, metric_data, n_matrix, surface_normal, tangent_basis,
    tangential_gradient, tangential_gradient_norm2, ChartPoint,
};
use crate::reflector::{t_rho, RayTarget};
use crate::vector::{dot, AmbientVector};

/// Chart point uniform in the ball `|x| < r_max` of dimension `dim`.
fn chart_point(rng: &mut ChaCha8Rng, dim: usize, r_max: f64) -> ChartPoint {
    loop {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-r_max..r_max)).collect();
        if dot(&x, &x) < r_max * r_max {
            return ChartPoint::new(x).expect("inside the unit ball");
        }
    }
}

/// Running maximum of one invariant.
struct Worst {
    name: &'static str,
    value: f64,
    bound: Bound,
}

impl Worst {
    fn at_most(name: &'static str, tol: f64) -> Self {
        Self { name, value: 0.0, bound: Bound::AtMost(tol) }
    }

    fn see(&mut self, v: f64) {
        // NaN sticks
        if v.is_nan() || v > self.value {
            self.value = if self.value.is_nan() { self.value } else { v };
        }
    }

    fn finish(self, suite: &'static str, samples: usize) -> Check {
        Check::new(suite, self.name, self.value, self.bound, samples)
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

pub(super) fn geometry_suite(rng: &mut ChaCha8Rng, size: Size) -> Result<SuiteReport> {
    let samples = size.pick(2_000, 10_000, 100_000);
    let mut unit = Worst::at_most("lift_is_unit", 1e-14);
    let mut ortho = Worst::at_most("tangent_orthogonal_to_position", 1e-14);
    let mut gram = Worst::at_most("metric_is_gram_matrix", 1e-12);
    let mut inverse = Worst::at_most("metric_times_inverse_is_identity", 1e-12);
    let mut nmat = Worst::at_most("n_matrix_equals_metric", 1e-12);
    let mut gauss = Worst::at_most("gauss_formula", 1e-12);
    let mut grad = Worst::at_most("tangential_gradient", 1e-12);
    let mut normal = Worst::at_most("normal_is_unit_and_orthogonal", 1e-12);

    for k in 0..samples {
        let dim = 1 + k % 3;
        let x = chart_point(rng, dim, 0.9);
        let big_x = lift(&x);
        let basis = tangent_basis(&x);
        let m = metric_data(&x);
        let scale = max_abs(&m.g);

        unit.see((big_x.norm() - 1.0).abs());
        for e in &basis {
            ortho.see(e.dot(&big_x).abs() / e.norm());
        }
        let g_gram = DMatrix::from_fn(dim, dim, |i, j| basis[i].dot(&basis[j]));
        gram.see(max_abs(&(&g_gram - &m.g)) / scale);
        inverse.see(max_abs(&(&m.g * &m.g_inv - DMatrix::identity(dim, dim))));
        nmat.see(max_abs(&(n_matrix(&x) - &m.g)) / scale);
        for i in 0..dim {
            for j in 0..dim {
                let lhs = embedding_hessian(&x, i, j);
                let rhs = gauss_formula(&x, i, j);
                gauss.see((&lhs - &rhs).norm() / (1.0 + lhs.norm()));
            }
        }

        let rho = rng.gen_range(0.1..10.0);
        let drho: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let tg = tangential_gradient(&x, &drho);
        let g2 = tangential_gradient_norm2(&x, &drho);
        let dscale = 1.0 + dot(&drho, &drho);
        grad.see((tg.dot(&big_x).abs() + (tg.norm().powi(2) - g2).abs()) / dscale);
        let gamma = surface_normal(&x, rho, &drho);
        normal.see((gamma.norm() - 1.0).abs());
        for tau in graph_tangents(&x, rho, &drho) {
            normal.see(gamma.dot(&tau).abs() / tau.norm());
        }
    }
    Ok(SuiteReport {
        checks: [unit, ortho, gram, inverse, nmat, gauss, grad, normal]
            .into_iter()
            .map(|w| w.finish("geometry", samples))
            .collect(),
        tables: Vec::new(),
    })
}

pub(super) fn ellipsoid_suite(rng: &mut ChaCha8Rng, size: Size) -> Result<SuiteReport> {
    let samples = size.pick(2_000, 10_000, 100_000);
    let mut focal = Worst::at_most("focal_sum", 1e-12);
    let mut closure = Worst::at_most("reflection_closure", 1e-7);
    let mut ident = Worst::at_most("eccentricity_identity", 1e-14);
    let mut through = Worst::at_most("through_point_round_trip", 1e-12);
    let mut derivs = Worst::at_most("radial_derivatives_match_differences", 1e-6);
    let h = 1e-5;

    for _ in 0..samples {
        // focus in the lower half space, away from the source
        let (az, z) = (rng.gen_range(0.0..TAU), rng.gen_range(-1.0..0.0f64));
        let r = (1.0 - z * z).sqrt();
        let dist = rng.gen_range(0.5..30.0);
        let focus = AmbientVector::new(vec![dist * r * az.cos(), dist * r * az.sin(), dist * z]);
        let p = rng.gen_range(0.2..5.0);
        let e = Ellipsoid::new(focus.clone(), p)?;
        let x = chart_point(rng, 2, 0.9);
        let big_x = lift(&x);
        let (rho, g, hess) = e.radial_derivatives(&x)?;

        let to_focus: Vec<f64> = focus.iter().zip(big_x.iter()).map(|(y, xv)| y - xv * rho).collect();
        focal.see((rho + dot(&to_focus, &to_focus).sqrt() - e.diameter()).abs() / e.diameter());

        let hit = t_rho(&x, rho, g.as_slice(), RayTarget::Points(std::slice::from_ref(&focus)))?;
        closure.see(hit.aim_error);

        let (lhs, rhs) = eccentricity_identity(1.0 / p, &big_x, &focus)?;
        ident.see((lhs - rhs).abs());

        let again = Ellipsoid::through_point(focus.clone(), &big_x, rho)?;
        through.see((again.p() - p).abs() / p);

        let mut fd_err = 0.0f64;
        for k in 0..2 {
            let mut xp = x.coords().to_vec();
            let mut xm = x.coords().to_vec();
            xp[k] += h;
            xm[k] -= h;
            let (rp, gp, _) = e.radial_derivatives(&ChartPoint::new(xp)?)?;
            let (rm, gm, _) = e.radial_derivatives(&ChartPoint::new(xm)?)?;
            fd_err = fd_err.max(((rp - rm) / (2.0 * h) - g[k]).abs() / (1.0 + g.norm()));
            for l in 0..2 {
                fd_err = fd_err.max(((gp[l] - gm[l]) / (2.0 * h) - hess[(l, k)]).abs() / (1.0 + max_abs(&hess)));
            }
        }
        derivs.see(fd_err);
    }
    Ok(SuiteReport {
        checks: [focal, closure, ident, through, derivs].into_iter().map(|w| w.finish("ellipsoid", samples)).collect(),
        tables: Vec::new(),
    })
}
