//! The Monge-Ampère type operator of the generic framework, obtained by
//! differentiating the stationarity condition `φ_x + φ_t Du = 0` along the
//! optimal map.

use nalgebra::DMatrix;

use super::{aux_frame, ma_lhs, ma_rhs, residual::jacobian_fd, residual::map_point, CatalogReflector};
use crate::dual_core::ConstraintPhi;
use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::geometry::{lift, ChartPoint};
use crate::reflector::{LevelSet, ReflectorConstraint};

/// Slopes below this are treated as vanishing.
const SLOPE_MIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralMa {
    /// `D²u + (φ_tt/φ_t) Du⊗Du + (1/φ_t)(φ_xt⊗Du + Du⊗φ_xt) + (1/φ_t) φ_xx`.
    pub lhs_matrix: DMatrix<f64>,
    pub lhs: f64,
    /// `φ_xy - φ_xs⊗φ_y/φ_s + Du⊗φ_yt - (φ_ts/φ_s) Du⊗φ_y`.
    pub rhs_matrix: DMatrix<f64>,
    /// `|φ_t|^{-n} |det rhs_matrix| |det DT|`.
    pub rhs: f64,
    /// `|φ_x + φ_t Du|`, zero when `y = T(x)`.
    pub stationarity: f64,
}

/// Both sides of the generic equation at `(x, y = T(x), u(x), v(y))`.
///
/// The mixed term is symmetrized: differentiating `φ_{x_a} + φ_t u_a`
/// in `x_b` yields `φ_{x_a t} u_b + u_a φ_{x_b t}`.
#[allow(clippy::too_many_arguments)]
pub fn general_ma_operator<P: ConstraintPhi + ?Sized>(
    phi: &P,
    x: &[f64],
    y: &[f64],
    t: f64,
    s: f64,
    du: &[f64],
    d2u: &DMatrix<f64>,
    det_dt: f64,
) -> Result<GeneralMa> {
    let n = x.len();
    if y.len() != n || du.len() != n || d2u.nrows() != n || d2u.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    let p = phi.partials(x, y, t, s);
    if !(p.t.abs() > SLOPE_MIN) {
        return Err(Error::SingularFrame(format!("φ_t = {:e}", p.t)));
    }
    if !(p.s.abs() > SLOPE_MIN) {
        return Err(Error::SingularFrame(format!("φ_s = {:e}", p.s)));
    }
    let lhs_matrix = DMatrix::from_fn(n, n, |a, b| {
        d2u[(a, b)] + p.tt / p.t * du[a] * du[b] + (p.xt[a] * du[b] + du[a] * p.xt[b]) / p.t + p.xx[(a, b)] / p.t
    });
    let rhs_matrix = DMatrix::from_fn(n, n, |a, c| {
        p.xy[(a, c)] - p.xs[a] * p.y[c] / p.s + du[a] * p.yt[c] - p.ts / p.s * du[a] * p.y[c]
    });
    let lhs = lhs_matrix.determinant().abs();
    let rhs = p.t.abs().powi(-(n as i32)) * rhs_matrix.determinant().abs() * det_dt.abs();
    let stationarity = (0..n).map(|a| (p.x[a] + p.t * du[a]).powi(2)).sum::<f64>().sqrt();
    Ok(GeneralMa { lhs_matrix, lhs, rhs_matrix, rhs, stationarity })
}

/// The specialized reflector equation against the generic operator with
/// slots `t = log ρ`, `s = log η`, both scaled to the `M(ρ)` normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteCheck {
    pub lhs_specialized: f64,
    pub lhs_general: f64,
    pub rhs_specialized: f64,
    pub rhs_general: f64,
    pub stationarity: f64,
    /// `φ` at the supporting ellipsoid; zero up to rounding.
    pub constraint: f64,
}

impl RouteCheck {
    /// Largest of the lhs and rhs gaps relative to `1 + magnitude`.
    pub fn max_rel_gap(&self) -> f64 {
        let l = (self.lhs_specialized - self.lhs_general).abs() / (1.0 + self.lhs_specialized);
        let r = (self.rhs_specialized - self.rhs_general).abs() / (1.0 + self.rhs_specialized);
        l.max(r)
    }
}

/// Evaluates both routes at `x` for the plane target `Z_{n+1} = height`,
/// with the target density induced by the traced map and unit source
/// density.
pub fn reflector_route_check(refl: &CatalogReflector, x: &ChartPoint, height: f64, h_fd: f64) -> Result<RouteCheck> {
    let n = x.dim();
    let level_set = LevelSet::Plane { height };
    let (jet, hit) = map_point(refl, x, &level_set)?;
    let frame = aux_frame(x, jet.rho, &jet.grad, &hit.y, &level_set)?;
    let (_, m) = ma_lhs(jet.rho, &jet.grad, &jet.hess, &frame)?;
    let det_dt = jacobian_fd(refl, x, &level_set, h_fd)?;
    let g = 1.0 / (frame.omega * det_dt);
    let rhs_specialized = ma_rhs(&frame, 1.0, g)?;

    let rho = jet.rho;
    let support = Ellipsoid::through_point(hit.y.clone(), &lift(x), rho)?;
    let (t, s) = (rho.ln(), -support.p().ln());
    let du: Vec<f64> = jet.grad.iter().map(|v| v / rho).collect();
    let d2u = DMatrix::from_fn(n, n, |a, b| jet.hess[(a, b)] / rho - jet.grad[a] * jet.grad[b] / (rho * rho));
    let phi = ReflectorConstraint::plane(height);
    let y = &hit.y.as_slice()[..n];
    let gen = general_ma_operator(&phi, x.coords(), y, t, s, &du, &d2u, det_dt)?;
    let scale = rho.powi(n as i32);
    Ok(RouteCheck {
        lhs_specialized: m,
        lhs_general: gen.lhs * scale,
        rhs_specialized,
        rhs_general: gen.rhs * scale,
        stationarity: gen.stationarity,
        constraint: phi.value(x.coords(), y, t, s),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual_core::{Bilinear, OtConstraint};
    use proptest::prelude::*;

    fn chart() -> impl Strategy<Value = ChartPoint> {
        (0.0..0.5f64, 0.0..std::f64::consts::TAU)
            .prop_map(|(r, a)| ChartPoint::new(vec![r * a.cos(), r * a.sin()]).unwrap())
    }

    #[test]
    fn optimal_transport_reduces_to_hessian_equation() {
        // φ = t + s - x·y, u = xᵀAx/2: T(x) = Ax, φ_xy = -I, so both sides are |det A|
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let phi = OtConstraint { cost: Bilinear { a: DMatrix::identity(2, 2) } };
        let x = [0.3, -0.7];
        let xv = nalgebra::DVector::from_column_slice(&x);
        let du: Vec<f64> = (&a * &xv).iter().copied().collect();
        let u = 0.5 * xv.dot(&(&a * &xv));
        let v = -u + xv.dot(&(&a * &xv));
        let r = general_ma_operator(&phi, &x, &du, u, v, &du, &a, a.determinant()).unwrap();
        assert!(r.stationarity < 1e-14);
        assert!((r.lhs - a.determinant()).abs() < 1e-12);
        assert!((r.rhs - r.lhs).abs() < 1e-12);
        assert_eq!(r.rhs_matrix, -DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn constant_map_is_flat() {
        // c = |x - y|²/2 with u = |x|²/2: stationarity forces T ≡ 0, and
        // D²u + φ_xx = I - I = 0 on the left, det DT = 0 on the right
        let phi = OtConstraint { cost: crate::dual_core::SquaredDistance { k: 0.5 } };
        let x = [0.2, 0.1];
        let r = general_ma_operator(&phi, &x, &[0.0, 0.0], 0.025, 0.0, &x, &DMatrix::identity(2, 2), 0.0).unwrap();
        assert!(r.stationarity < 1e-14);
        assert!(r.lhs < 1e-14);
        assert_eq!(r.rhs, 0.0);
    }

    #[test]
    fn vanishing_phi_s_is_an_error() {
        struct Flat;
        impl ConstraintPhi for Flat {
            fn value(&self, _x: &[f64], _y: &[f64], t: f64, _s: f64) -> f64 {
                t
            }
        }
        let e = general_ma_operator(&Flat, &[0.0], &[0.0], 0.0, 0.0, &[0.0], &DMatrix::zeros(1, 1), 1.0);
        assert!(matches!(e, Err(Error::SingularFrame(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn reflector_routes_agree(x in chart()) {
            let refl = CatalogReflector::from_id("bump-envelope", 2).unwrap();
            let c = reflector_route_check(&refl, &x, -3.0, 1e-4).unwrap();
            prop_assert!(c.constraint.abs() < 1e-12, "{c:?}");
            prop_assert!(c.stationarity < 1e-8, "{c:?}");
            prop_assert!(c.max_rel_gap() < 1e-5, "{c:?}");
        }
    }
}
