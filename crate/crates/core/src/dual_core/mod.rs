//! Generic duality framework: maximize `Σ γ_ij F(x_i, y_j, u_i, v_j)` over
//! potential pairs with `φ(x_i, y_j, u_i, v_j) <= 0`.
//!
//! The constraint `φ` must be strictly increasing in both scalar slots and
//! the objective `F` nondecreasing in both. Optimal transport is the case
//! `φ = t + s - c(x, y)`.

mod ascent;
mod diagnostics;
mod ot;
mod transforms;

pub use ascent::{maximize_dual, pin_min_u, shift_potentials, AscentParams, AscentResult};
pub use diagnostics::{
    check_conditions, lipschitz_bound_check, optimal_map, optimal_map_with_margin, stationarity_residual,
    uniqueness_matrix, variational_derivative_check, ConditionReport, LipschitzReport, ScalarBox, VariationalReport,
    VariationalRow,
};
pub use ot::{Bilinear, Cost, Distance, OtConstraint, OtObjective, SquaredDistance};
pub use transforms::{functional_i, is_feasible, max_violation, u_star, v_star, TransformParams};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::roots::bisect_increasing;

/// Step for first-order central differences of `φ`.
pub const FD_STEP_FIRST: f64 = 1e-6;
/// Step for second-order central differences of `φ`.
pub const FD_STEP_SECOND: f64 = 1e-4;

/// First and second partial derivatives of `φ` at one point.
///
/// Matrix conventions: `xy[(a, b)] = ∂²φ/∂x_a∂y_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partials {
    pub phi: f64,
    pub t: f64,
    pub s: f64,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub xx: DMatrix<f64>,
    pub xy: DMatrix<f64>,
    pub xt: DVector<f64>,
    pub xs: DVector<f64>,
    pub yt: DVector<f64>,
    pub ys: DVector<f64>,
    pub tt: f64,
    pub ts: f64,
    pub ss: f64,
}

/// Constraint function `φ(x, y, t, s)`.
///
/// `value` returns a non-finite number where `φ` is undefined. Derivatives
/// default to central differences; implementations override what they know
/// in closed form.
pub trait ConstraintPhi: Sync {
    fn value(&self, x: &[f64], y: &[f64], t: f64, s: f64) -> f64;

    fn phi_t(&self, x: &[f64], y: &[f64], t: f64, s: f64) -> f64 {
        let h = FD_STEP_FIRST;
        (self.value(x, y, t + h, s) - self.value(x, y, t - h, s)) / (2.0 * h)
    }

    fn phi_s(&self, x: &[f64], y: &[f64], t: f64, s: f64) -> f64 {
        let h = FD_STEP_FIRST;
        (self.value(x, y, t, s + h) - self.value(x, y, t, s - h)) / (2.0 * h)
    }

    fn phi_x(&self, x: &[f64], y: &[f64], t: f64, s: f64) -> Vec<f64> {
        fd_gradient(|z| self.value(z, y, t, s), x, FD_STEP_FIRST)
    }

    fn phi_y(&self, x: &[f64], y: &[f64], t: f64, s: f64) -> Vec<f64> {
        fd_gradient(|z| self.value(x, z, t, s), y, FD_STEP_FIRST)
    }

    fn partials(&self, x: &[f64], y: &[f64], t: f64, s: f64) -> Partials {
        fd_partials(self, x, y, t, s)
    }

    /// Root `t` of `φ(x, y, t, s) = 0`, returned on the feasible side.
    fn solve_t(&self, x: &[f64], y: &[f64], s: f64, range: (f64, f64), tol: f64) -> Result<f64> {
        bisect_root_t(self, x, y, s, range, tol)
    }

    /// Root `s` of `φ(x, y, t, s) = 0`, returned on the feasible side.
    fn solve_s(&self, x: &[f64], y: &[f64], t: f64, range: (f64, f64), tol: f64) -> Result<f64> {
        bisect_root_s(self, x, y, t, range, tol)
    }
}

/// Feasible-side bisection root of `t ↦ φ(x, y, t, s)`.
pub fn bisect_root_t<P: ConstraintPhi + ?Sized>(
    phi: &P,
    x: &[f64],
    y: &[f64],
    s: f64,
    range: (f64, f64),
    tol: f64,
) -> Result<f64> {
    bisect_increasing(|t| phi.value(x, y, t, s), range.0, range.1, tol).map(|b| b.lo)
}

/// Feasible-side bisection root of `s ↦ φ(x, y, t, s)`.
pub fn bisect_root_s<P: ConstraintPhi + ?Sized>(
    phi: &P,
    x: &[f64],
    y: &[f64],
    t: f64,
    range: (f64, f64),
    tol: f64,
) -> Result<f64> {
    bisect_increasing(|s| phi.value(x, y, t, s), range.0, range.1, tol).map(|b| b.lo)
}

/// Objective density `F(x, y, t, s)` with source and target densities
/// `f = f(x)`, `g = g(y)` passed alongside.
pub trait ObjectiveF: Sync {
    fn value(&self, x: &[f64], y: &[f64], f: f64, g: f64, t: f64, s: f64) -> f64;
    fn f_t(&self, x: &[f64], y: &[f64], f: f64, g: f64, t: f64, s: f64) -> f64;
    fn f_s(&self, x: &[f64], y: &[f64], f: f64, g: f64, t: f64, s: f64) -> f64;
}

/// Coupling weights `γ_ij`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    /// `γ_ij = μ_i ν_j`.
    Product,
    /// Explicit `|U| × |V|` weights.
    Dense(DMatrix<f64>),
}

/// Two discrete domains with weights, densities and a coupling.
#[derive(Debug, Clone)]
pub struct DiscreteDomainPair {
    pub u_points: Vec<Vec<f64>>,
    pub u_weights: Vec<f64>,
    pub f: Vec<f64>,
    pub v_points: Vec<Vec<f64>>,
    pub v_weights: Vec<f64>,
    pub g: Vec<f64>,
    pub coupling: Coupling,
}

impl DiscreteDomainPair {
    /// Product-coupled pair; densities default to one.
    pub fn new(
        u_points: Vec<Vec<f64>>,
        u_weights: Vec<f64>,
        v_points: Vec<Vec<f64>>,
        v_weights: Vec<f64>,
    ) -> Result<Self> {
        if u_points.len() != u_weights.len() {
            return Err(Error::DimensionMismatch { expected: u_points.len(), got: u_weights.len() });
        }
        if v_points.len() != v_weights.len() {
            return Err(Error::DimensionMismatch { expected: v_points.len(), got: v_weights.len() });
        }
        if u_points.is_empty() || v_points.is_empty() {
            return Err(Error::InvalidParameter("domains must be nonempty".into()));
        }
        if u_weights.iter().chain(&v_weights).any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("weights must be nonnegative".into()));
        }
        let nu = u_points.len();
        let nv = v_points.len();
        Ok(Self {
            u_points,
            u_weights,
            f: vec![1.0; nu],
            v_points,
            v_weights,
            g: vec![1.0; nv],
            coupling: Coupling::Product,
        })
    }

    pub fn with_densities(mut self, f: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if f.len() != self.u_points.len() {
            return Err(Error::DimensionMismatch { expected: self.u_points.len(), got: f.len() });
        }
        if g.len() != self.v_points.len() {
            return Err(Error::DimensionMismatch { expected: self.v_points.len(), got: g.len() });
        }
        self.f = f;
        self.g = g;
        Ok(self)
    }

    pub fn with_coupling(mut self, coupling: Coupling) -> Result<Self> {
        if let Coupling::Dense(m) = &coupling {
            if m.nrows() != self.u_points.len() || m.ncols() != self.v_points.len() {
                return Err(Error::InvalidParameter("coupling shape does not match domains".into()));
            }
        }
        self.coupling = coupling;
        Ok(self)
    }

    /// Rescales both weight vectors to unit total mass.
    pub fn normalized(mut self) -> Self {
        let su: f64 = self.u_weights.iter().sum();
        let sv: f64 = self.v_weights.iter().sum();
        self.u_weights.iter_mut().for_each(|w| *w /= su);
        self.v_weights.iter_mut().for_each(|w| *w /= sv);
        self
    }

    pub fn len_u(&self) -> usize {
        self.u_points.len()
    }

    pub fn len_v(&self) -> usize {
        self.v_points.len()
    }

    pub fn gamma(&self, i: usize, j: usize) -> f64 {
        match &self.coupling {
            Coupling::Product => self.u_weights[i] * self.v_weights[j],
            Coupling::Dense(m) => m[(i, j)],
        }
    }

    /// Largest deviation of the coupling's row and column sums from the
    /// domain weights.
    pub fn marginal_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.len_u() {
            let row: f64 = (0..self.len_v()).map(|j| self.gamma(i, j)).sum();
            worst = worst.max((row - self.u_weights[i]).abs());
        }
        for j in 0..self.len_v() {
            let col: f64 = (0..self.len_u()).map(|i| self.gamma(i, j)).sum();
            worst = worst.max((col - self.v_weights[j]).abs());
        }
        worst
    }

    /// `|Σ μ_i - Σ ν_j|`.
    pub fn mass_gap(&self) -> f64 {
        (self.u_weights.iter().sum::<f64>() - self.v_weights.iter().sum::<f64>()).abs()
    }
}

/// Potentials `u` on the source points and `v` on the target points.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialPair {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

pub(crate) fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, z: &[f64], h: f64) -> Vec<f64> {
    let mut w = z.to_vec();
    (0..z.len())
        .map(|k| {
            w[k] = z[k] + h;
            let p = f(&w);
            w[k] = z[k] - h;
            let m = f(&w);
            w[k] = z[k];
            (p - m) / (2.0 * h)
        })
        .collect()
}

pub(crate) fn fd_hessian<F: Fn(&[f64]) -> f64>(f: F, z: &[f64], h: f64) -> DMatrix<f64> {
    let n = z.len();
    let mut w = z.to_vec();
    let f0 = f(z);
    let mut out = DMatrix::zeros(n, n);
    for a in 0..n {
        w[a] = z[a] + h;
        let p = f(&w);
        w[a] = z[a] - h;
        let m = f(&w);
        w[a] = z[a];
        out[(a, a)] = (p - 2.0 * f0 + m) / (h * h);
        for b in 0..a {
            let mut eval = |da: f64, db: f64| {
                w[a] = z[a] + da;
                w[b] = z[b] + db;
                let v = f(&w);
                w[a] = z[a];
                w[b] = z[b];
                v
            };
            let v = (eval(h, h) - eval(h, -h) - eval(-h, h) + eval(-h, -h)) / (4.0 * h * h);
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    out
}

/// Central-difference partials of any constraint.
pub fn fd_partials<P: ConstraintPhi + ?Sized>(phi: &P, x: &[f64], y: &[f64], t: f64, s: f64) -> Partials {
    let n = x.len();
    let m = y.len();
    let mut z = Vec::with_capacity(n + m + 2);
    z.extend_from_slice(x);
    z.extend_from_slice(y);
    z.push(t);
    z.push(s);
    let eval = |w: &[f64]| phi.value(&w[..n], &w[n..n + m], w[n + m], w[n + m + 1]);
    let grad = fd_gradient(eval, &z, FD_STEP_FIRST);
    let hess = fd_hessian(eval, &z, FD_STEP_SECOND);
    let it = n + m;
    let is = n + m + 1;
    Partials {
        phi: phi.value(x, y, t, s),
        t: grad[it],
        s: grad[is],
        x: DVector::from_column_slice(&grad[..n]),
        y: DVector::from_column_slice(&grad[n..n + m]),
        xx: hess.view((0, 0), (n, n)).into_owned(),
        xy: hess.view((0, n), (n, m)).into_owned(),
        xt: DVector::from_fn(n, |a, _| hess[(a, it)]),
        xs: DVector::from_fn(n, |a, _| hess[(a, is)]),
        yt: DVector::from_fn(m, |b, _| hess[(n + b, it)]),
        ys: DVector::from_fn(m, |b, _| hess[(n + b, is)]),
        tt: hess[(it, it)],
        ts: hess[(it, is)],
        ss: hess[(is, is)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Smooth;
    impl ConstraintPhi for Smooth {
        fn value(&self, x: &[f64], y: &[f64], t: f64, s: f64) -> f64 {
            t + 2.0 * s + 0.1 * t * s + x[0] * x[0] * y[0] + (x[0] * t).sin() + y[0] * s * s
        }
    }

    #[test]
    fn finite_difference_partials_match_closed_form() {
        let (x, y, t, s) = ([0.3], [-0.7], 0.4, -0.2);
        let p = Smooth.partials(&x, &y, t, s);
        let c = (x[0] * t).cos();
        let sn = (x[0] * t).sin();
        let tol = 1e-6;
        assert!((p.t - (1.0 + 0.1 * s + x[0] * c)).abs() < tol);
        assert!((p.s - (2.0 + 0.1 * t + 2.0 * y[0] * s)).abs() < tol);
        assert!((p.x[0] - (2.0 * x[0] * y[0] + t * c)).abs() < tol);
        assert!((p.y[0] - (x[0] * x[0] + s * s)).abs() < tol);
        assert!((p.xx[(0, 0)] - (2.0 * y[0] - t * t * sn)).abs() < tol);
        assert!((p.xy[(0, 0)] - 2.0 * x[0]).abs() < tol);
        assert!((p.xt[0] - (c - x[0] * t * sn)).abs() < tol);
        assert!(p.xs[0].abs() < tol);
        assert!(p.yt[0].abs() < tol);
        assert!((p.ys[0] - 2.0 * s).abs() < tol);
        assert!((p.tt + x[0] * x[0] * sn).abs() < tol);
        assert!((p.ts - 0.1).abs() < tol);
        assert!((p.ss - 2.0 * y[0]).abs() < tol);
    }

    #[test]
    fn default_roots_are_feasible() {
        let r = Smooth.solve_s(&[0.3], &[0.2], 0.1, (-4.0, 4.0), 1e-13).unwrap();
        assert!(Smooth.value(&[0.3], &[0.2], 0.1, r) <= 0.0);
        assert!(Smooth.value(&[0.3], &[0.2], 0.1, r).abs() < 1e-12);
    }

    #[test]
    fn product_coupling_marginals() {
        let d = DiscreteDomainPair::new(
            vec![vec![0.0], vec![1.0]],
            vec![1.0, 3.0],
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![1.0, 1.0, 2.0],
        )
        .unwrap()
        .normalized();
        assert!(d.marginal_error() < 1e-15);
        assert!(d.mass_gap() < 1e-15);
        assert!(DiscreteDomainPair::new(vec![vec![0.0]], vec![], vec![vec![0.0]], vec![1.0]).is_err());
    }
}
