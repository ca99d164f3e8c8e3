//! Ellipsoids of revolution with one focus at the origin.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{embedding_hessian, lift, tangent_basis, ChartPoint};
use crate::vector::{dist, dot, norm, AmbientVector};

/// Radial denominators below this are treated as degenerate directions.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-14;

/// Eccentricity of the ellipsoid with focal parameter `p` and foci a
/// distance `d` apart: `sqrt(1 + p^2/d^2) - p/d`.
///
/// Evaluated in the cancellation-free form `d / (p + sqrt(d^2 + p^2))`.
pub fn eccentricity(p: f64, d: f64) -> Result<f64> {
    if !(p > 0.0) || !(d > 0.0) || !p.is_finite() || !d.is_finite() {
        return Err(Error::InvalidParameter(format!("eccentricity needs p > 0 and d > 0, got p = {p}, d = {d}")));
    }
    Ok(d / (p + d.hypot(p)))
}

/// Ellipsoid `E(Y, p)` with foci at the origin and `Y`.
///
/// The eccentricity is always recomputed from `(p, |Y|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    focus: AmbientVector,
    p: f64,
}

impl Ellipsoid {
    pub fn new(focus: AmbientVector, p: f64) -> Result<Self> {
        if !(focus.norm() > 0.0) || !focus.is_finite() {
            return Err(Error::InvalidParameter("ellipsoid focus must be nonzero".into()));
        }
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("focal parameter must be positive, got {p}")));
        }
        Ok(Self { focus, p })
    }

    /// The ellipsoid with focus `Y` passing through the point `X ρ`.
    pub fn through_point(focus: AmbientVector, big_x: &[f64], rho: f64) -> Result<Self> {
        let point: Vec<f64> = big_x.iter().map(|v| v * rho).collect();
        let diam = rho + dist(&focus, &point);
        let d = focus.norm();
        let eps = d / diam;
        let theta = dot(big_x, &focus) / d;
        Self::new(focus, rho * (1.0 - eps * theta))
    }

    pub fn focus(&self) -> &AmbientVector {
        &self.focus
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn focus_distance(&self) -> f64 {
        self.focus.norm()
    }

    pub fn eccentricity(&self) -> f64 {
        let d = self.focus_distance();
        d / (self.p + d.hypot(self.p))
    }

    /// `|Y| / ε`, the constant focal sum `ρ(X) + |Y - X ρ(X)|`.
    pub fn diameter(&self) -> f64 {
        self.focus_distance() / self.eccentricity()
    }

    /// `ρ_e(X) = p / (1 - ε <X, Y/|Y|>)` for a unit direction `X`.
    pub fn radial(&self, big_x: &[f64]) -> Result<f64> {
        let theta = dot(big_x, &self.focus) / self.focus_distance();
        let den = 1.0 - self.eccentricity() * theta;
        if den <= DEGENERATE_DENOMINATOR {
            return Err(Error::DegenerateDirection(den));
        }
        Ok(self.p / den)
    }

    /// Radial value with chart gradient and Hessian at `x`.
    pub fn radial_derivatives(&self, x: &ChartPoint) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let n = x.dim();
        let ye: Vec<f64> = self.focus.scale(1.0 / self.focus_distance()).into_vec();
        let big_x = lift(x);
        let eps = self.eccentricity();
        let den = 1.0 - eps * dot(&big_x, &ye);
        if den <= DEGENERATE_DENOMINATOR {
            return Err(Error::DegenerateDirection(den));
        }
        let basis = tangent_basis(x);
        let th: Vec<f64> = basis.iter().map(|e| e.dot(&ye)).collect();
        let p = self.p;
        let rho = p / den;
        let grad = DVector::from_fn(n, |i, _| p * eps * th[i] / (den * den));
        let hess = DMatrix::from_fn(n, n, |i, j| {
            let thij = embedding_hessian(x, i, j).dot(&ye);
            p * eps * thij / (den * den) + 2.0 * p * eps * eps * th[i] * th[j] / (den * den * den)
        });
        Ok((rho, grad, hess))
    }
}

/// Both sides of `ε(1/η) <X, Y/|Y|> = <X, Y> / (1/η + sqrt(|Y|^2 + 1/η^2))`.
pub fn eccentricity_identity(eta: f64, big_x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let d = norm(y);
    let eps = eccentricity(1.0 / eta, d)?;
    let xy = dot(big_x, y);
    let lhs = eps * xy / d;
    let pinv = 1.0 / eta;
    let rhs = xy / (pinv + (d * d + pinv * pinv).sqrt());
    Ok((lhs, rhs))
}
