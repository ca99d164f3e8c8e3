//! The reflector constraint `φ` and objective `F` in the generic framework.
//!
//! Slots: `t = log ρ`, `s = log η` with `η = 1/p`. Writing `P = e^{-s}`,
//! `S = sqrt(|Y|^2 + P^2)` and `κ = <X, Y>/(P + S)`,
//!
//! ```text
//! φ(x, Y, t, s) = t + s + ln(1 - κ),
//! ```
//!
//! and `κ = ε(P) <X, Y/|Y|>`, so `φ = 0` exactly when `e^t` is the radial
//! function of `E(Y, P)` at `X`.

use crate::dual_core::{ConstraintPhi, ObjectiveF};
use crate::error::{Error, Result};
use crate::vector::{dot, norm};

/// How the generic `y` slot maps to a target point in `R^{n+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetEmbedding {
    /// `y` is the ambient point itself.
    Ambient,
    /// `y ∈ R^n` and `Y = (y, height)`.
    Plane { height: f64 },
}

impl TargetEmbedding {
    pub fn embed(&self, y: &[f64]) -> Vec<f64> {
        match self {
            TargetEmbedding::Ambient => y.to_vec(),
            TargetEmbedding::Plane { height } => {
                let mut v = y.to_vec();
                v.push(*height);
                v
            }
        }
    }

    pub fn project(&self, big_y: &[f64]) -> Vec<f64> {
        match self {
            TargetEmbedding::Ambient => big_y.to_vec(),
            TargetEmbedding::Plane { .. } => big_y[..big_y.len() - 1].to_vec(),
        }
    }
}

/// `X = (x, sqrt(1 - |x|^2))`, or `None` off the open unit ball.
fn lift_coords(x: &[f64]) -> Option<Vec<f64>> {
    let r2 = dot(x, x);
    if !(r2 < 1.0) {
        return None;
    }
    let mut v = x.to_vec();
    v.push((1.0 - r2).sqrt());
    Some(v)
}

/// `(κ, P + S, S)` for unit `X`.
fn kappa(big_x: &[f64], big_y: &[f64], s: f64) -> (f64, f64, f64) {
    let p = (-s).exp();
    let d = norm(big_y);
    let sq = d.hypot(p);
    (dot(big_x, big_y) / (p + sq), p + sq, sq)
}

/// `φ` on a unit direction `X` and an ambient target `Y`.
///
/// Fails when `1 - κ <= 0`, which cannot happen for `Y ≠ 0` but is kept as
/// a guard against non-unit input.
pub fn phi_reflector(big_x: &[f64], big_y: &[f64], t: f64, s: f64) -> Result<f64> {
    if !(norm(big_y) > 0.0) {
        return Err(Error::InvalidParameter("target point must be nonzero".into()));
    }
    let (k, _, _) = kappa(big_x, big_y, s);
    if !(1.0 - k > 0.0) {
        return Err(Error::InfeasibleGeometry(format!("log argument 1 - κ = {} is not positive", 1.0 - k)));
    }
    Ok(t + s + (1.0 - k).ln())
}

/// `φ_s = 1 - κ (P/S) / (1 - κ)`; positive because `<X, Y> < S`.
pub fn phi_reflector_s(big_x: &[f64], big_y: &[f64], s: f64) -> f64 {
    let (k, ps, sq) = kappa(big_x, big_y, s);
    let p = ps - sq;
    1.0 - k * (p / sq) / (1.0 - k)
}

/// The reflector constraint over chart coordinates `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectorConstraint {
    pub embedding: TargetEmbedding,
}

impl ReflectorConstraint {
    pub fn ambient() -> Self {
        Self { embedding: TargetEmbedding::Ambient }
    }

    pub fn plane(height: f64) -> Self {
        Self { embedding: TargetEmbedding::Plane { height } }
    }
}

impl ConstraintPhi for ReflectorConstraint {
    fn value(&self, x: &[f64], y: &[f64], t: f64, s: f64) -> f64 {
        let Some(big_x) = lift_coords(x) else { return f64::NAN };
        let big_y = self.embedding.embed(y);
        phi_reflector(&big_x, &big_y, t, s).unwrap_or(f64::NAN)
    }

    fn phi_t(&self, _x: &[f64], _y: &[f64], _t: f64, _s: f64) -> f64 {
        1.0
    }

    fn phi_s(&self, x: &[f64], y: &[f64], _t: f64, s: f64) -> f64 {
        let Some(big_x) = lift_coords(x) else { return f64::NAN };
        phi_reflector_s(&big_x, &self.embedding.embed(y), s)
    }

    fn phi_x(&self, x: &[f64], y: &[f64], _t: f64, s: f64) -> Vec<f64> {
        let Some(big_x) = lift_coords(x) else { return vec![f64::NAN; x.len()] };
        let big_y = self.embedding.embed(y);
        let (k, ps, _) = kappa(&big_x, &big_y, s);
        let n = x.len();
        let omega = big_x[n];
        // <e_a, Y> with e_a = (δ_a, -x_a/ω)
        (0..n)
            .map(|a| {
                let ea_y = big_y[a] - x[a] / omega * big_y[n];
                -(ea_y / ps) / (1.0 - k)
            })
            .collect()
    }

    fn phi_y(&self, x: &[f64], y: &[f64], _t: f64, s: f64) -> Vec<f64> {
        let Some(big_x) = lift_coords(x) else { return vec![f64::NAN; y.len()] };
        let big_y = self.embedding.embed(y);
        let (k, ps, sq) = kappa(&big_x, &big_y, s);
        let xy = dot(&big_x, &big_y);
        (0..y.len())
            .map(|b| {
                let dk = big_x[b] / ps - xy * big_y[b] / (ps * ps * sq);
                -dk / (1.0 - k)
            })
            .collect()
    }

    fn solve_t(&self, x: &[f64], y: &[f64], s: f64, _range: (f64, f64), _tol: f64) -> Result<f64> {
        let big_x = lift_coords(x).ok_or(Error::OutsideChart { norm: norm(x), limit: 1.0 })?;
        let big_y = self.embedding.embed(y);
        let (k, _, _) = kappa(&big_x, &big_y, s);
        if !(1.0 - k > 0.0) {
            return Err(Error::InfeasibleGeometry(format!("log argument 1 - κ = {} is not positive", 1.0 - k)));
        }
        Ok(feasible_side(|t| self.value(x, y, t, s), -s - (1.0 - k).ln()))
    }

    /// Closed form: the ellipsoid with focus `Y` through `X e^t` has
    /// `P = ρ(1 - ε <X, Y/|Y|>)` with `ε = |Y| / (ρ + |Y - Xρ|)`.
    fn solve_s(&self, x: &[f64], y: &[f64], t: f64, _range: (f64, f64), _tol: f64) -> Result<f64> {
        let big_x = lift_coords(x).ok_or(Error::OutsideChart { norm: norm(x), limit: 1.0 })?;
        let big_y = self.embedding.embed(y);
        let rho = t.exp();
        let d = norm(&big_y);
        let gap: f64 = big_y.iter().zip(&big_x).map(|(a, b)| (a - b * rho).powi(2)).sum::<f64>().sqrt();
        let eps = d / (rho + gap);
        let p = rho * (1.0 - eps * dot(&big_x, &big_y) / d);
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::InfeasibleGeometry(format!("no supporting ellipsoid through ρ = {rho}")));
        }
        Ok(feasible_side(|s| self.value(x, y, t, s), -p.ln()))
    }
}

/// Steps a closed-form root down by a few ulps until `f(root) <= 0`.
fn feasible_side(f: impl Fn(f64) -> f64, mut root: f64) -> f64 {
    for _ in 0..32 {
        if f(root) <= 0.0 {
            break;
        }
        root -= f64::EPSILON * (1.0 + root.abs());
    }
    root
}

/// `F = f t + g (s + ln(1 - κ))`; `F_t = f`, `F_s = g φ_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectorObjective {
    pub embedding: TargetEmbedding,
}

impl ReflectorObjective {
    pub fn ambient() -> Self {
        Self { embedding: TargetEmbedding::Ambient }
    }
}

impl ObjectiveF for ReflectorObjective {
    fn value(&self, x: &[f64], y: &[f64], f: f64, g: f64, t: f64, s: f64) -> f64 {
        let c = ReflectorConstraint { embedding: self.embedding };
        f * t + g * (c.value(x, y, 0.0, s))
    }

    fn f_t(&self, _x: &[f64], _y: &[f64], f: f64, _g: f64, _t: f64, _s: f64) -> f64 {
        f
    }

    fn f_s(&self, x: &[f64], y: &[f64], _f: f64, g: f64, t: f64, s: f64) -> f64 {
        g * ReflectorConstraint { embedding: self.embedding }.phi_s(x, y, t, s)
    }
}

/// Far-field constraint `φ = t + s + ln(1 - <X, Y>)` for unit directions `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FarFieldConstraint;

impl ConstraintPhi for FarFieldConstraint {
    fn value(&self, x: &[f64], y: &[f64], t: f64, s: f64) -> f64 {
        let Some(big_x) = lift_coords(x) else { return f64::NAN };
        let a = 1.0 - dot(&big_x, y);
        if a > 0.0 {
            t + s + a.ln()
        } else {
            f64::NAN
        }
    }

    fn phi_t(&self, _x: &[f64], _y: &[f64], _t: f64, _s: f64) -> f64 {
        1.0
    }

    fn phi_s(&self, _x: &[f64], _y: &[f64], _t: f64, _s: f64) -> f64 {
        1.0
    }

    fn solve_t(&self, x: &[f64], y: &[f64], s: f64, _range: (f64, f64), _tol: f64) -> Result<f64> {
        let base = self.value(x, y, 0.0, s);
        if !base.is_finite() {
            return Err(Error::InfeasibleGeometry("far-field direction overlaps the source".into()));
        }
        Ok(-base)
    }

    fn solve_s(&self, x: &[f64], y: &[f64], t: f64, _range: (f64, f64), _tol: f64) -> Result<f64> {
        let base = self.value(x, y, t, 0.0);
        if !base.is_finite() {
            return Err(Error::InfeasibleGeometry("far-field direction overlaps the source".into()));
        }
        Ok(-base)
    }
}

/// `F = f t + g (s + ln(1 - <X, Y>))`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FarFieldObjective;

impl ObjectiveF for FarFieldObjective {
    fn value(&self, x: &[f64], y: &[f64], f: f64, g: f64, t: f64, s: f64) -> f64 {
        f * t + g * FarFieldConstraint.value(x, y, 0.0, s)
    }

    fn f_t(&self, _x: &[f64], _y: &[f64], f: f64, _g: f64, _t: f64, _s: f64) -> f64 {
        f
    }

    fn f_s(&self, _x: &[f64], _y: &[f64], _f: f64, g: f64, _t: f64, _s: f64) -> f64 {
        g
    }
}
