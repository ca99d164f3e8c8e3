//! Pointwise Monge-Ampère quantities for a radial reflector `ρ` over the
//! chart, a level-set target `{ψ = 0}`, and their far-field limits.
//!
//! Only absolute values of determinants are compared. The matrix of `M(ρ)`
//! may differ by a global sign from other conventions in the literature.

mod catalog;
mod farfield;
mod general;
mod residual;

pub use catalog::{CatalogReflector, RadialJet};
pub use farfield::{farfield_limit_check, farfield_operator, FarFieldOperator, FarFieldReport, FarFieldRow};
pub use general::{general_ma_operator, reflector_route_check, GeneralMa, RouteCheck};
pub use residual::{
    intermediate_identities, jacobian_crosscheck, jacobian_fd, map_point, refinement_study, residual_field,
    IdentityCheck, JacobianCheck, RefinementRow, RefinementTable, ResidualField,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{lift, n_matrix, tangential_gradient_norm2, ChartPoint};
use crate::reflector::LevelSet;
use crate::vector::{dot, AmbientVector};

/// Relative floor on `|a|`: `a_min = A_MIN_REL (1 + |Dρ|² + ρ²)`.
pub const A_MIN_REL: f64 = 1e-8;
/// Floor on `|t|` and on `|(Y - Xρ)·∇ψ|` relative to its scale.
pub const T_MIN: f64 = 1e-10;

/// Why a frame cannot enter the equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degeneracy {
    /// `|a| < a_min`.
    Grazing,
    /// `|t| < t_min`, or the reflected ray is tangent to the target.
    TangentRay,
    /// The reflection map has (numerically) vanishing Jacobian.
    CollapsedMap,
}

/// Auxiliary quantities at one chart point.
#[derive(Debug, Clone, PartialEq)]
pub struct MAFrame {
    pub a: f64,
    pub b: f64,
    pub t: f64,
    pub beta: f64,
    /// Length of the reflected segment `|Y - Xρ|`.
    pub d: f64,
    pub n_matrix: DMatrix<f64>,
    pub omega: f64,
    pub grad_psi: AmbientVector,
    pub y: AmbientVector,
    pub rho: f64,
    /// `|∇ρ|²` (tangential gradient).
    pub grad_norm2: f64,
    pub degeneracy: Option<Degeneracy>,
}

impl MAFrame {
    pub fn dim(&self) -> usize {
        self.n_matrix.nrows()
    }

    pub fn y_last(&self) -> f64 {
        self.y[self.y.len() - 1]
    }

    fn require_regular(&self) -> Result<()> {
        match self.degeneracy {
            None => Ok(()),
            Some(k) => Err(Error::SingularFrame(format!("{k:?}: a = {:e}, t = {:e}", self.a, self.t))),
        }
    }
}

/// `a = |Dρ|² - (ρ + Dρ·x)²`.
pub fn aux_a(x: &ChartPoint, rho: f64, drho: &[f64]) -> f64 {
    let dx = dot(drho, x.coords());
    dot(drho, drho) - (rho + dx).powi(2)
}

/// `b = |Dρ|² + ρ² - (Dρ·x)²`.
pub fn aux_b(x: &ChartPoint, rho: f64, drho: &[f64]) -> f64 {
    let dx = dot(drho, x.coords());
    dot(drho, drho) + rho * rho - dx * dx
}

/// Builds the frame at `x` for the target point `y` on `level_set`.
/// Degenerate configurations are recorded in `degeneracy`, not clamped.
pub fn aux_frame(x: &ChartPoint, rho: f64, drho: &[f64], y: &AmbientVector, level_set: &LevelSet) -> Result<MAFrame> {
    let n = x.dim();
    if drho.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: drho.len() });
    }
    if y.len() != n + 1 {
        return Err(Error::DimensionMismatch { expected: n + 1, got: y.len() });
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    let omega = x.omega();
    let big_x = lift(x);
    let a = aux_a(x, rho, drho);
    let b = aux_b(x, rho, drho);
    let y_last = y[n];
    let t = (rho * omega - y_last) / (rho * omega);
    let grad_psi = level_set.gradient(y);
    let seg: Vec<f64> = y.iter().zip(big_x.iter()).map(|(yv, xv)| yv - xv * rho).collect();
    let d = dot(&seg, &seg).sqrt();
    let proj = dot(&seg, &grad_psi);
    let beta = t / proj;
    let a_min = A_MIN_REL * (1.0 + dot(drho, drho) + rho * rho);
    let degeneracy = if a.abs() < a_min {
        Some(Degeneracy::Grazing)
    } else if t.abs() < T_MIN || proj.abs() <= T_MIN * d * grad_psi.norm() {
        Some(Degeneracy::TangentRay)
    } else {
        None
    };
    Ok(MAFrame {
        a,
        b,
        t,
        beta,
        d,
        n_matrix: n_matrix(x),
        omega,
        grad_psi,
        y: y.clone(),
        rho,
        grad_norm2: tangential_gradient_norm2(x, drho),
        degeneracy,
    })
}

/// `D²ρ - (2/ρ) Dρ⊗Dρ - [a(1-t)/(2tρ)] 𝒩` and the absolute value of its
/// determinant.
pub fn ma_lhs(rho: f64, drho: &[f64], d2rho: &DMatrix<f64>, frame: &MAFrame) -> Result<(DMatrix<f64>, f64)> {
    frame.require_regular()?;
    let n = frame.dim();
    if d2rho.nrows() != n || d2rho.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: d2rho.nrows() });
    }
    let k = frame.a * (1.0 - frame.t) / (2.0 * frame.t * rho);
    let m = DMatrix::from_fn(n, n, |i, j| d2rho[(i, j)] - 2.0 / rho * drho[i] * drho[j] - k * frame.n_matrix[(i, j)]);
    let det = m.determinant().abs();
    Ok((m, det))
}

/// `|a^{n+1} / (tⁿ b β)| f / (2ⁿ ρ^{2n+1} ω² g |∇ψ|)`.
pub fn ma_rhs(frame: &MAFrame, f: f64, g: f64) -> Result<f64> {
    frame.require_regular()?;
    if !(g > 0.0) {
        return Err(Error::InvalidParameter(format!("target density must be positive, got {g}")));
    }
    let n = frame.dim() as i32;
    let gp = frame.grad_psi.norm();
    if !(gp > 0.0) {
        return Err(Error::SingularFrame("vanishing level-set gradient".into()));
    }
    let ratio = (frame.a.powi(n + 1) / (frame.t.powi(n) * frame.b * frame.beta)).abs();
    let rho = frame.rho;
    Ok(ratio * f / (2f64.powi(n) * rho.powi(2 * n + 1) * frame.omega.powi(2) * g * gp))
}

/// `|det DT_ρ|` predicted from `M(ρ)`:
/// `2ⁿ ρ^{2n+1} x_{n+1} |∇ψ| |tⁿ b β / a^{n+1}| M`.
pub fn jacobian_from_operator(frame: &MAFrame, m: f64) -> Result<f64> {
    frame.require_regular()?;
    let n = frame.dim() as i32;
    let rho = frame.rho;
    let ratio = (frame.t.powi(n) * frame.b * frame.beta / frame.a.powi(n + 1)).abs();
    Ok(2f64.powi(n) * rho.powi(2 * n + 1) * frame.omega * frame.grad_psi.norm() * ratio * m)
}

/// `d` recovered from the frame: `(y_{n+1}/x_{n+1} - ρ)(|∇ρ|² + ρ²)/a`.
pub fn reflected_length(frame: &MAFrame) -> f64 {
    (frame.y_last() / frame.omega - frame.rho) * (frame.grad_norm2 + frame.rho * frame.rho) / frame.a
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chart() -> impl Strategy<Value = ChartPoint> {
        (0.0..0.7f64, 0.0..std::f64::consts::TAU)
            .prop_map(|(r, a)| ChartPoint::new(vec![r * a.cos(), r * a.sin()]).unwrap())
    }

    #[test]
    fn unit_sphere_frame() {
        let x = ChartPoint::new(vec![0.0, 0.0]).unwrap();
        let y = AmbientVector::new(vec![0.0, 0.0, -2.0]);
        let fr = aux_frame(&x, 1.0, &[0.0, 0.0], &y, &LevelSet::Plane { height: -2.0 }).unwrap();
        assert_eq!(fr.a, -1.0);
        assert_eq!(fr.b, 1.0);
        assert_eq!(fr.t, 3.0);
        assert_eq!(fr.d, 3.0);
        assert!(fr.degeneracy.is_none());
    }

    #[test]
    fn equatorial_plane_gives_unit_t() {
        let x = ChartPoint::new(vec![0.2, 0.1]).unwrap();
        let y = AmbientVector::new(vec![3.0, -1.0, 0.0]);
        let fr = aux_frame(&x, 0.7, &[0.1, 0.3], &y, &LevelSet::Plane { height: 0.0 }).unwrap();
        assert_eq!(fr.t, 1.0);
    }

    #[test]
    fn constant_rho_radial_target() {
        // Y = -rX on the sphere of radius r: d = ρ + r = tρ = -tρb/a
        let x = ChartPoint::new(vec![0.3, -0.4]).unwrap();
        let (rho, r) = (0.8, 5.0);
        let y = lift(&x).scale(-r);
        let fr = aux_frame(&x, rho, &[0.0, 0.0], &y, &LevelSet::Sphere { center: vec![0.0; 3], radius: r }).unwrap();
        assert!((fr.a + rho * rho).abs() < 1e-15);
        assert!((fr.b - rho * rho).abs() < 1e-15);
        assert!((fr.d - fr.t * rho).abs() < 1e-12);
        assert!((fr.d + fr.t * rho * fr.b / fr.a).abs() < 1e-12);
    }

    #[test]
    fn grazing_and_tangent_frames_are_flagged() {
        let x = ChartPoint::new(vec![0.0, 0.0]).unwrap();
        // |Dρ| = ρ at the pole makes a = 0
        let y = AmbientVector::new(vec![0.0, 0.0, -1.0]);
        let fr = aux_frame(&x, 1.0, &[1.0, 0.0], &y, &LevelSet::Plane { height: -1.0 }).unwrap();
        assert_eq!(fr.degeneracy, Some(Degeneracy::Grazing));
        assert!(ma_lhs(1.0, &[1.0, 0.0], &DMatrix::zeros(2, 2), &fr).is_err());
        // target point on the cone ρ x_{n+1} = y_{n+1}
        let y = AmbientVector::new(vec![2.0, 0.0, 0.5]);
        let fr = aux_frame(&x, 0.5, &[0.0, 0.0], &y, &LevelSet::Plane { height: 0.5 }).unwrap();
        assert_eq!(fr.degeneracy, Some(Degeneracy::TangentRay));
        assert!(ma_rhs(&fr, 1.0, 1.0).is_err());
    }

    #[test]
    fn pole_with_unit_hessian() {
        let x = ChartPoint::new(vec![0.0, 0.0]).unwrap();
        let rho = 0.6;
        let y = AmbientVector::new(vec![0.4, 0.0, 0.0]);
        let fr = aux_frame(&x, rho, &[0.0, 0.0], &y, &LevelSet::Plane { height: 0.0 }).unwrap();
        let (m, det) = ma_lhs(rho, &[0.0, 0.0], &DMatrix::identity(2, 2), &fr).unwrap();
        assert_eq!(m, DMatrix::identity(2, 2));
        assert_eq!(det, 1.0);
    }

    #[test]
    fn rhs_is_inverse_in_g() {
        let x = ChartPoint::new(vec![0.1, 0.2]).unwrap();
        let y = AmbientVector::new(vec![0.5, 0.3, -3.0]);
        let fr = aux_frame(&x, 1.2, &[0.2, -0.1], &y, &LevelSet::Plane { height: -3.0 }).unwrap();
        let r1 = ma_rhs(&fr, 1.0, 1.0).unwrap();
        let r2 = ma_rhs(&fr, 1.0, 2.0).unwrap();
        assert!((r1 - 2.0 * r2).abs() < 1e-14 * r1);
    }

    #[test]
    fn one_dimensional_exponents() {
        // n = 1: |a² / (t b β)| f / (2 ρ³ ω² g |∇ψ|)
        let x = ChartPoint::new(vec![0.3]).unwrap();
        let (rho, dr) = (1.1, 0.25);
        let y = AmbientVector::new(vec![0.7, -2.0]);
        let fr = aux_frame(&x, rho, &[dr], &y, &LevelSet::Plane { height: -2.0 }).unwrap();
        let w = x.omega();
        let expect = (fr.a * fr.a / (fr.t * fr.b * fr.beta)).abs() / (2.0 * rho.powi(3) * w * w);
        assert!((ma_rhs(&fr, 1.0, 1.0).unwrap() - expect).abs() < 1e-14 * expect);
    }

    proptest! {
        #[test]
        fn b_is_nonnegative_and_matches_tangential_norm(x in chart(), rho in 0.1..3.0f64, g0 in -3.0..3.0f64, g1 in -3.0..3.0f64) {
            let drho = [g0, g1];
            let b = aux_b(&x, rho, &drho);
            prop_assert!(b >= 0.0);
            prop_assert!((b - tangential_gradient_norm2(&x, &drho) - rho * rho).abs() < 1e-12 * (1.0 + b));
            // b - a = ρ² + (ρ + Dρ·x)² - (Dρ·x)²
            let dx = dot(&drho, x.coords());
            let a = aux_a(&x, rho, &drho);
            prop_assert!(((b - a) - (rho * rho + (rho + dx).powi(2) - dx * dx)).abs() < 1e-11 * (1.0 + b.abs() + a.abs()));
        }

        #[test]
        fn matrix_is_symmetric(x in chart(), rho in 0.2..3.0f64, g0 in -1.0..1.0f64, g1 in -1.0..1.0f64, h in prop::array::uniform3(-2.0..2.0f64)) {
            let drho = [g0, g1];
            let d2 = DMatrix::from_row_slice(2, 2, &[h[0], h[1], h[1], h[2]]);
            let y = AmbientVector::new(vec![0.3, -0.2, -4.0]);
            let fr = aux_frame(&x, rho, &drho, &y, &LevelSet::Plane { height: -4.0 }).unwrap();
            prop_assume!(fr.degeneracy.is_none());
            let (m, _) = ma_lhs(rho, &drho, &d2, &fr).unwrap();
            prop_assert!((&m - m.transpose()).abs().max() < 1e-14 * (1.0 + m.abs().max()));
        }

        #[test]
        fn reciprocal_substitution_on_equatorial_plane(x in chart(), rho in 0.2..3.0f64, g0 in -1.0..1.0f64, g1 in -1.0..1.0f64, h in prop::array::uniform3(-2.0..2.0f64)) {
            // y_{n+1} = 0: matrix = D²ρ - (2/ρ)Dρ⊗Dρ and, with u = 1/ρ,
            // D²u = -(1/ρ²) matrix, so M = ρ^{2n} |det D²u|
            let drho = [g0, g1];
            let d2 = DMatrix::from_row_slice(2, 2, &[h[0], h[1], h[1], h[2]]);
            let y = AmbientVector::new(vec![1.0, 2.0, 0.0]);
            let fr = aux_frame(&x, rho, &drho, &y, &LevelSet::Plane { height: 0.0 }).unwrap();
            prop_assume!(fr.degeneracy.is_none());
            let (_, m) = ma_lhs(rho, &drho, &d2, &fr).unwrap();
            let d2u = DMatrix::from_fn(2, 2, |i, j| -d2[(i, j)] / (rho * rho) + 2.0 * drho[i] * drho[j] / rho.powi(3));
            let other = rho.powi(4) * d2u.determinant().abs();
            prop_assert!((m - other).abs() < 1e-10 * (1.0 + m));
        }
    }
}
