//! Residual of the reflector Monge-Ampère equation on analytic reflectors,
//! and the Jacobian formula it rests on.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{
    aux_frame, jacobian_from_operator, ma_lhs, ma_rhs, reflected_length, CatalogReflector, Degeneracy, MAFrame,
    RadialJet,
};
use crate::error::{Error, Result};
use crate::geometry::{embedding_hessian, lift, ChartPoint};
use crate::grid::ChartGrid;
use crate::reflector::{t_rho, LevelSet, RayHit, RayTarget};
use crate::vector::dot;

/// Longest reflected segment followed to the target.
const MAX_RANGE: f64 = 1e12;
/// Area Jacobians below this are treated as a collapsed map.
const COLLAPSE: f64 = 1e-8;

/// Radial jet at `x` and the hit of the reflected ray on `level_set`.
pub fn map_point(refl: &CatalogReflector, x: &ChartPoint, level_set: &LevelSet) -> Result<(RadialJet, RayHit)> {
    let jet = refl.eval(x)?;
    let hit = t_rho(x, jet.rho, &jet.grad, RayTarget::Surface { level_set, max_range: MAX_RANGE })?;
    Ok((jet, hit))
}

fn frame_at(refl: &CatalogReflector, x: &ChartPoint, level_set: &LevelSet) -> Result<(RadialJet, MAFrame)> {
    let (jet, hit) = map_point(refl, x, level_set)?;
    let frame = aux_frame(x, jet.rho, &jet.grad, &hit.y, level_set)?;
    Ok((jet, frame))
}

/// Area Jacobian `sqrt(det(JᵀJ))` of `x ↦ T_ρ(x)` with `J` from central
/// differences at step `h`.
pub fn jacobian_fd(refl: &CatalogReflector, x: &ChartPoint, level_set: &LevelSet, h: f64) -> Result<f64> {
    let n = x.dim();
    let mut jac = DMatrix::zeros(n + 1, n);
    for k in 0..n {
        let mut p = x.coords().to_vec();
        let mut m = x.coords().to_vec();
        p[k] += h;
        m[k] -= h;
        let (_, hp) = map_point(refl, &ChartPoint::new(p)?, level_set)?;
        let (_, hm) = map_point(refl, &ChartPoint::new(m)?, level_set)?;
        for r in 0..=n {
            jac[(r, k)] = (hp.y[r] - hm.y[r]) / (2.0 * h);
        }
    }
    Ok((jac.transpose() * &jac).determinant().max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianCheck {
    /// `|det DT_ρ|` from `M(ρ)` and the frame.
    pub lhs_route: f64,
    /// `|det DT_ρ|` from central differences.
    pub fd_route: f64,
    /// `|lhs - fd| / (1 + fd)`.
    pub rel_err: f64,
}

/// Compares the operator route for `|det DT_ρ|` with finite differences.
pub fn jacobian_crosscheck(
    refl: &CatalogReflector,
    x: &ChartPoint,
    level_set: &LevelSet,
    h_fd: f64,
) -> Result<JacobianCheck> {
    let (jet, frame) = frame_at(refl, x, level_set)?;
    let (_, m) = ma_lhs(jet.rho, &jet.grad, &jet.hess, &frame)?;
    let lhs_route = jacobian_from_operator(&frame, m)?;
    let fd_route = jacobian_fd(refl, x, level_set, h_fd)?;
    Ok(JacobianCheck { lhs_route, fd_route, rel_err: (lhs_route - fd_route).abs() / (1.0 + fd_route) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualField {
    /// `|M(ρ) - RHS| / (1 + RHS)` per grid node; `None` where degenerate.
    pub values: Vec<Option<f64>>,
    pub max_residual: f64,
    pub evaluated: usize,
    pub grazing: usize,
    pub tangent: usize,
    pub collapsed: usize,
    pub h: f64,
}

impl ResidualField {
    pub fn degenerate(&self) -> usize {
        self.grazing + self.tangent + self.collapsed
    }
}

/// Relative residual of the equation at every node of `grid`, with the
/// target density induced by `|det DT| = f / (ω g)` and `det DT` taken by
/// central differences at the grid spacing.
pub fn residual_field<F>(refl: &CatalogReflector, grid: &ChartGrid, level_set: &LevelSet, f: F) -> Result<ResidualField>
where
    F: Fn(&ChartPoint) -> f64 + Sync,
{
    let h = grid.spacing();
    let per_node: Vec<Result<std::result::Result<f64, Degeneracy>>> = grid
        .points()
        .par_iter()
        .map(|x| {
            let (jet, frame) = frame_at(refl, x, level_set)?;
            if let Some(k) = frame.degeneracy {
                return Ok(Err(k));
            }
            let jac = jacobian_fd(refl, x, level_set, h)?;
            if jac < COLLAPSE {
                return Ok(Err(Degeneracy::CollapsedMap));
            }
            let fx = f(x);
            let g = fx / (frame.omega * jac);
            let (_, m) = ma_lhs(jet.rho, &jet.grad, &jet.hess, &frame)?;
            let rhs = ma_rhs(&frame, fx, g)?;
            Ok(Ok((m - rhs).abs() / (1.0 + rhs)))
        })
        .collect();
    let mut field = ResidualField {
        values: Vec::with_capacity(grid.len()),
        max_residual: 0.0,
        evaluated: 0,
        grazing: 0,
        tangent: 0,
        collapsed: 0,
        h,
    };
    for r in per_node {
        match r? {
            Ok(v) => {
                field.max_residual = field.max_residual.max(v);
                field.evaluated += 1;
                field.values.push(Some(v));
            }
            Err(k) => {
                match k {
                    Degeneracy::Grazing => field.grazing += 1,
                    Degeneracy::TangentRay => field.tangent += 1,
                    Degeneracy::CollapsedMap => field.collapsed += 1,
                }
                field.values.push(None);
            }
        }
    }
    Ok(field)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementRow {
    pub cells: usize,
    pub h: f64,
    pub max_residual: f64,
    pub evaluated: usize,
    pub degenerate: usize,
    /// `log(r_prev / r) / log(h_prev / h)` against the previous row.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementTable {
    pub rows: Vec<RefinementRow>,
}

impl RefinementTable {
    /// True when no level had a single regular node.
    pub fn fully_degenerate(&self) -> bool {
        self.rows.iter().all(|r| r.evaluated == 0)
    }

    /// Observed order between the two finest levels.
    pub fn finest_order(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.order)
    }
}

/// Residual fields on disks of chart radius `radius` with `levels` cells per
/// axis and unit source density.
pub fn refinement_study(
    refl: &CatalogReflector,
    dim: usize,
    radius: f64,
    levels: &[usize],
    level_set: &LevelSet,
) -> Result<RefinementTable> {
    if levels.is_empty() {
        return Err(Error::InvalidParameter("at least one refinement level is required".into()));
    }
    let mut rows: Vec<RefinementRow> = Vec::with_capacity(levels.len());
    for &cells in levels {
        let grid = ChartGrid::disk(dim, cells, radius)?;
        let field = residual_field(refl, &grid, level_set, |_| 1.0)?;
        let order = rows.last().and_then(|prev| {
            (prev.evaluated > 0 && field.evaluated > 0 && prev.max_residual > 0.0 && field.max_residual > 0.0)
                .then(|| (prev.max_residual / field.max_residual).ln() / (prev.h / field.h).ln())
        });
        rows.push(RefinementRow {
            cells,
            h: field.h,
            max_residual: field.max_residual,
            evaluated: field.evaluated,
            degenerate: field.degenerate(),
            order,
        });
    }
    Ok(RefinementTable { rows })
}

/// Absolute errors of the three intermediate identities of the derivation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    /// `y_{n+1}` against `[d a/(|∇ρ|²+ρ²)] x_{n+1} + ρ x_{n+1}`.
    pub height: f64,
    /// Traced `d` against `(y_{n+1}/x_{n+1} - ρ)(|∇ρ|²+ρ²)/a`.
    pub length: f64,
    /// Max entry of the supporting-ellipsoid curvature term against
    /// `[a/(2ρ)] [y_{n+1}/(ρx_{n+1} - y_{n+1})] 𝒩`.
    pub curvature: f64,
}

pub fn intermediate_identities(refl: &CatalogReflector, x: &ChartPoint, level_set: &LevelSet) -> Result<IdentityCheck> {
    let (jet, frame) = frame_at(refl, x, level_set)?;
    if frame.degeneracy.is_some() {
        return Err(Error::SingularFrame(format!("{:?}", frame.degeneracy)));
    }
    let (rho, w, yl) = (jet.rho, frame.omega, frame.y_last());
    let k = frame.grad_norm2 + rho * rho;
    let height = (yl - (frame.d * frame.a / k * w + rho * w)).abs();
    let length = (frame.d - reflected_length(&frame)).abs();
    // supporting ellipsoid: focus Y, through Xρ
    let big_x = lift(x);
    let ynorm = frame.y.norm();
    let eps = ynorm / (rho + frame.d);
    let ye: Vec<f64> = frame.y.iter().map(|v| v / ynorm).collect();
    let den = 1.0 - eps * dot(&big_x, &ye);
    let scale = frame.a / (2.0 * rho) * yl / (rho * w - yl);
    let n = x.dim();
    let mut curvature = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let lhs = rho * eps * embedding_hessian(x, i, j).dot(&ye) / den;
            let rhs = scale * frame.n_matrix[(i, j)];
            curvature = curvature.max((lhs - rhs).abs());
        }
    }
    Ok(IdentityCheck { height, length, curvature })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chart() -> impl Strategy<Value = ChartPoint> {
        (0.0..0.55f64, 0.0..std::f64::consts::TAU)
            .prop_map(|(r, a)| ChartPoint::new(vec![r * a.cos(), r * a.sin()]).unwrap())
    }

    fn bump() -> CatalogReflector {
        CatalogReflector::from_id("bump-envelope", 2).unwrap()
    }

    #[test]
    fn single_ellipsoid_is_collapsed() {
        let refl = CatalogReflector::from_id("single-ellipsoid", 2).unwrap();
        let grid = ChartGrid::disk(2, 8, 0.4).unwrap();
        let field = residual_field(&refl, &grid, &refl.level_set(), |_| 1.0).unwrap();
        assert_eq!(field.evaluated, 0);
        assert_eq!(field.collapsed, grid.len());
    }

    #[test]
    fn bump_refinement_order() {
        let table = refinement_study(&bump(), 2, 0.5, &[16, 32, 64], &bump().level_set()).unwrap();
        for row in &table.rows[1..] {
            assert!(row.order.unwrap() > 1.5, "{table:?}");
        }
        assert_eq!(table.rows[2].degenerate, 0);
    }

    #[test]
    fn induced_density_closes_the_jacobian_identity() {
        let refl = bump();
        let ls = bump().level_set();
        let x = ChartPoint::new(vec![0.2, -0.1]).unwrap();
        let jac = jacobian_fd(&refl, &x, &ls, 1e-4).unwrap();
        let g = 2.0 / (x.omega() * jac);
        assert!((jac * x.omega() * g - 2.0).abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn operator_route_matches_differences(x in chart()) {
            let c = jacobian_crosscheck(&bump(), &x, &bump().level_set(), 1e-4).unwrap();
            prop_assert!(c.rel_err < 1e-5, "{c:?}");
        }

        #[test]
        fn sphere_target_jacobian(x in chart()) {
            let ls = LevelSet::Sphere { center: vec![0.0, 0.0, 0.0], radius: 4.0 };
            let c = jacobian_crosscheck(&bump(), &x, &ls, 1e-4).unwrap();
            prop_assert!(c.rel_err < 1e-5, "{c:?}");
        }

        #[test]
        fn intermediate_identities_hold(x in chart()) {
            let id = intermediate_identities(&bump(), &x, &bump().level_set()).unwrap();
            prop_assert!(id.height < 1e-10, "{id:?}");
            prop_assert!(id.length < 1e-8, "{id:?}");
            prop_assert!(id.curvature < 1e-8, "{id:?}");
        }
    }
}
