//! Optimal transport as the linear special case `φ = t + s - c(x, y)`.

use nalgebra::{DMatrix, DVector};

use super::{fd_gradient, fd_hessian, ConstraintPhi, ObjectiveF, Partials, FD_STEP_FIRST, FD_STEP_SECOND};
use crate::error::Result;
use crate::vector::dist;

/// Transport cost `c(x, y)`.
pub trait Cost: Sync {
    fn value(&self, x: &[f64], y: &[f64]) -> f64;

    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        fd_gradient(|z| self.value(z, y), x, FD_STEP_FIRST)
    }

    fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        fd_gradient(|z| self.value(x, z), y, FD_STEP_FIRST)
    }

    fn hess_xx(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        fd_hessian(|z| self.value(z, y), x, FD_STEP_SECOND)
    }

    /// `[∂²c/∂x_a∂y_b]`.
    fn hess_xy(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let m = y.len();
        let mut z: Vec<f64> = x.iter().chain(y).copied().collect();
        let h = FD_STEP_SECOND;
        DMatrix::from_fn(n, m, |a, b| {
            let mut eval = |da: f64, db: f64| {
                let (za, zb) = (z[a], z[n + b]);
                z[a] += da;
                z[n + b] += db;
                let v = self.value(&z[..n], &z[n..]);
                z[a] = za;
                z[n + b] = zb;
                v
            };
            (eval(h, h) - eval(h, -h) - eval(-h, h) + eval(-h, -h)) / (4.0 * h * h)
        })
    }
}

/// `c = k |x - y|^2`.
#[derive(Debug, Clone, Copy)]
pub struct SquaredDistance {
    pub k: f64,
}

impl Cost for SquaredDistance {
    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = dist(x, y);
        self.k * d * d
    }
    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        x.iter().zip(y).map(|(a, b)| 2.0 * self.k * (a - b)).collect()
    }
    fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        x.iter().zip(y).map(|(a, b)| 2.0 * self.k * (b - a)).collect()
    }
    fn hess_xx(&self, x: &[f64], _y: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(x.len(), x.len()) * (2.0 * self.k)
    }
    fn hess_xy(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(x.len(), y.len()) * (-2.0 * self.k)
    }
}

/// `c = xᵀ A y`.
#[derive(Debug, Clone)]
pub struct Bilinear {
    pub a: DMatrix<f64>,
}

impl Cost for Bilinear {
    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let yv = DVector::from_column_slice(y);
        xv.dot(&(&self.a * yv))
    }
    fn grad_x(&self, _x: &[f64], y: &[f64]) -> Vec<f64> {
        (&self.a * DVector::from_column_slice(y)).iter().copied().collect()
    }
    fn grad_y(&self, x: &[f64], _y: &[f64]) -> Vec<f64> {
        (self.a.transpose() * DVector::from_column_slice(x)).iter().copied().collect()
    }
    fn hess_xx(&self, x: &[f64], _y: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(x.len(), x.len())
    }
    fn hess_xy(&self, _x: &[f64], _y: &[f64]) -> DMatrix<f64> {
        self.a.clone()
    }
}

/// `c = |x - y|`, 1-Lipschitz in each argument.
#[derive(Debug, Clone, Copy)]
pub struct Distance;

impl Cost for Distance {
    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        dist(x, y)
    }
}

/// `φ(x, y, t, s) = t + s - c(x, y)`.
#[derive(Debug, Clone)]
pub struct OtConstraint<C> {
    pub cost: C,
}

impl<C: Cost> ConstraintPhi for OtConstraint<C> {
    fn value(&self, x: &[f64], y: &[f64], t: f64, s: f64) -> f64 {
        t + s - self.cost.value(x, y)
    }
    fn phi_t(&self, _x: &[f64], _y: &[f64], _t: f64, _s: f64) -> f64 {
        1.0
    }
    fn phi_s(&self, _x: &[f64], _y: &[f64], _t: f64, _s: f64) -> f64 {
        1.0
    }
    fn phi_x(&self, x: &[f64], y: &[f64], _t: f64, _s: f64) -> Vec<f64> {
        self.cost.grad_x(x, y).iter().map(|v| -v).collect()
    }
    fn phi_y(&self, x: &[f64], y: &[f64], _t: f64, _s: f64) -> Vec<f64> {
        self.cost.grad_y(x, y).iter().map(|v| -v).collect()
    }
    fn partials(&self, x: &[f64], y: &[f64], t: f64, s: f64) -> Partials {
        let n = x.len();
        let m = y.len();
        Partials {
            phi: self.value(x, y, t, s),
            t: 1.0,
            s: 1.0,
            x: -DVector::from_vec(self.cost.grad_x(x, y)),
            y: -DVector::from_vec(self.cost.grad_y(x, y)),
            xx: -self.cost.hess_xx(x, y),
            xy: -self.cost.hess_xy(x, y),
            xt: DVector::zeros(n),
            xs: DVector::zeros(n),
            yt: DVector::zeros(m),
            ys: DVector::zeros(m),
            tt: 0.0,
            ts: 0.0,
            ss: 0.0,
        }
    }
    fn solve_t(&self, x: &[f64], y: &[f64], s: f64, _range: (f64, f64), _tol: f64) -> Result<f64> {
        Ok(self.cost.value(x, y) - s)
    }
    fn solve_s(&self, x: &[f64], y: &[f64], t: f64, _range: (f64, f64), _tol: f64) -> Result<f64> {
        Ok(self.cost.value(x, y) - t)
    }
}

/// `F = f t / |V| + g s / |U|`; with `γ = dx dy` the functional is
/// `∫ f u dx + ∫ g v dy`.
#[derive(Debug, Clone, Copy)]
pub struct OtObjective {
    pub u_measure: f64,
    pub v_measure: f64,
}

impl ObjectiveF for OtObjective {
    fn value(&self, _x: &[f64], _y: &[f64], f: f64, g: f64, t: f64, s: f64) -> f64 {
        f * t / self.v_measure + g * s / self.u_measure
    }
    fn f_t(&self, _x: &[f64], _y: &[f64], f: f64, _g: f64, _t: f64, _s: f64) -> f64 {
        f / self.v_measure
    }
    fn f_s(&self, _x: &[f64], _y: &[f64], _f: f64, g: f64, _t: f64, _s: f64) -> f64 {
        g / self.u_measure
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual_core::fd_partials;

    #[test]
    fn analytic_partials_agree_with_differences() {
        let phi = OtConstraint { cost: SquaredDistance { k: 0.5 } };
        let (x, y) = ([0.2, -0.1], [0.7, 0.4]);
        let a = phi.partials(&x, &y, 0.3, -0.4);
        let b = fd_partials(&phi, &x, &y, 0.3, -0.4);
        assert!((&a.xy - &b.xy).abs().max() < 1e-7);
        assert!((&a.xx - &b.xx).abs().max() < 1e-7);
        assert!((&a.x - &b.x).abs().max() < 1e-8);
        assert!((a.t - b.t).abs() < 1e-8);
    }

    #[test]
    fn bilinear_cost_derivatives() {
        let c = Bilinear { a: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, -1.0]) };
        let (x, y) = ([0.5, 1.5], [-1.0, 2.0]);
        assert_eq!(c.value(&x, &y), 0.5 * (-1.0 + 4.0) + 1.5 * (-2.0));
        let fd = fd_gradient(|z| c.value(z, &y), &x, 1e-6);
        let an = c.grad_x(&x, &y);
        assert!((fd[0] - an[0]).abs() < 1e-8 && (fd[1] - an[1]).abs() < 1e-8);
    }
}
