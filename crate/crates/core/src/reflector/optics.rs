//! Reflection law and the reflection map `T_ρ`.

use super::{LevelSet, Reflector, ReflectorProblem};
use crate::error::{Error, Result};
use crate::geometry::{lift, tangential_gradient, ChartPoint};
use crate::vector::{dot, norm, AmbientVector};

/// Reflected direction of the ray from the origin through `X`:
/// `Y_r = [2ρ∇ρ + (|∇ρ|² - ρ²) X] / (|∇ρ|² + ρ²)`, with `∇ρ` the
/// tangential gradient built from the chart gradient `drho`.
pub fn reflect_direction(x: &ChartPoint, rho: f64, drho: &[f64]) -> AmbientVector {
    let big_x = lift(x);
    let grad = tangential_gradient(x, drho);
    let g2 = grad.dot(&grad);
    let den = g2 + rho * rho;
    let k = (g2 - rho * rho) / den;
    AmbientVector::new(grad.iter().zip(big_x.iter()).map(|(g, xv)| (2.0 * rho * g + k * den * xv) / den).collect())
}

/// Where reflected rays are sent.
#[derive(Debug, Clone, Copy)]
pub enum RayTarget<'a> {
    /// Finitely many points; the ray is assigned to the point it aims at
    /// most closely.
    Points(&'a [AmbientVector]),
    /// A level set hit along the ray within `max_range`.
    Surface { level_set: &'a LevelSet, max_range: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayHit {
    pub y: AmbientVector,
    /// Length of the reflected segment `|Y - Xρ|`.
    pub d: f64,
    pub index: Option<usize>,
    /// Angle between the reflected ray and `Y - Xρ` (zero for surfaces).
    pub aim_error: f64,
}

/// `T_ρ(x) = Xρ + Y_r d`.
pub fn t_rho(x: &ChartPoint, rho: f64, drho: &[f64], target: RayTarget<'_>) -> Result<RayHit> {
    let yr = reflect_direction(x, rho, drho);
    let origin = lift(x).scale(rho);
    match target {
        RayTarget::Points(points) => {
            let mut best: Option<RayHit> = None;
            for (j, y) in points.iter().enumerate() {
                let seg = y - &origin;
                let d = seg.norm();
                let c = (dot(&seg, &yr) / d).clamp(-1.0, 1.0);
                let angle = c.acos();
                if best.as_ref().map_or(true, |b| angle < b.aim_error) {
                    best = Some(RayHit { y: y.clone(), d, index: Some(j), aim_error: angle });
                }
            }
            best.ok_or_else(|| Error::InvalidParameter("no target points".into()))
        }
        RayTarget::Surface { level_set, max_range } => {
            let sigma = level_set.intersect_ray(&origin, &yr, max_range)?;
            let y = AmbientVector::new(origin.iter().zip(yr.iter()).map(|(o, r)| o + sigma * r).collect());
            Ok(RayHit { y, d: sigma * norm(&yr), index: None, aim_error: 0.0 })
        }
    }
}

/// Chart gradient of `ρ` at node `i`: central differences, one-sided at the
/// mask boundary.
pub fn node_gradient(i: usize, rho: &[f64], problem: &ReflectorProblem) -> Vec<f64> {
    let grid = problem.grid();
    let h = grid.spacing();
    (0..grid.dim())
        .map(|a| match (grid.neighbor(i, a, 1), grid.neighbor(i, a, -1)) {
            (Some(p), Some(m)) => (rho[p] - rho[m]) / (2.0 * h),
            (Some(p), None) => (rho[p] - rho[i]) / h,
            (None, Some(m)) => (rho[i] - rho[m]) / h,
            (None, None) => 0.0,
        })
        .collect()
}

/// `T_ρ` at grid node `i` using the finite-difference gradient and the
/// problem's target points.
pub fn t_rho_at_node(i: usize, reflector: &Reflector, problem: &ReflectorProblem) -> Result<RayHit> {
    let drho = node_gradient(i, &reflector.rho, problem);
    let foci = problem.target().foci();
    t_rho(&problem.grid().points()[i], reflector.rho[i], &drho, RayTarget::Points(&foci))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipsoid::Ellipsoid;
    use crate::geometry::surface_normal;
    use proptest::prelude::*;

    fn chart() -> impl Strategy<Value = ChartPoint> {
        (0.0..0.7f64, 0.0..std::f64::consts::TAU)
            .prop_map(|(r, a)| ChartPoint::new(vec![r * a.cos(), r * a.sin()]).unwrap())
    }

    #[test]
    fn flat_gradient_reflects_back() {
        let x = ChartPoint::new(vec![0.3, -0.2]).unwrap();
        let yr = reflect_direction(&x, 2.0, &[0.0, 0.0]);
        let big_x = lift(&x);
        for (a, b) in yr.iter().zip(big_x.iter()) {
            assert!((a + b).abs() < 1e-15);
        }
    }

    #[test]
    fn sphere_with_synthetic_target() {
        let x = ChartPoint::new(vec![0.1, 0.4]).unwrap();
        let big_x = lift(&x);
        let (rho, d) = (1.5, 0.6);
        let level = LevelSet::Sphere { center: vec![0.0; 3], radius: rho - d };
        let hit = t_rho(&x, rho, &[0.0, 0.0], RayTarget::Surface { level_set: &level, max_range: 10.0 }).unwrap();
        assert!((hit.d - d).abs() < 1e-12);
        for (a, b) in hit.y.iter().zip(big_x.iter()) {
            assert!((a - b * (rho - d)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn equal_angle_law(x in chart(), rho in 0.2..3.0f64, g0 in -2.0..2.0f64, g1 in -2.0..2.0f64) {
            let drho = [g0, g1];
            let yr = reflect_direction(&x, rho, &drho);
            prop_assert!((yr.norm() - 1.0).abs() < 1e-12);
            // mirror of the incident direction about the tangent plane
            let gamma = surface_normal(&x, rho, &drho);
            let big_x = lift(&x);
            let k = 2.0 * dot(&big_x, &gamma);
            for (a, (xv, nv)) in yr.iter().zip(big_x.iter().zip(gamma.iter())) {
                prop_assert!((a - (xv - k * nv)).abs() < 1e-10);
            }
        }

        #[test]
        fn inner_product_identity(x in chart(), rho in 0.2..3.0f64, g0 in -2.0..2.0f64, g1 in -2.0..2.0f64, d in 0.1..20.0f64) {
            let drho = [g0, g1];
            let yr = reflect_direction(&x, rho, &drho);
            let big_x = lift(&x);
            let y: Vec<f64> = big_x.iter().zip(yr.iter()).map(|(a, b)| a * rho + b * d).collect();
            let g2 = tangential_gradient(&x, &drho).norm().powi(2);
            let rhs = d * (g2 - rho * rho) / (g2 + rho * rho) + rho;
            prop_assert!((dot(&big_x, &y) - rhs).abs() < 1e-10 * (1.0 + d));
        }

        #[test]
        fn ellipsoid_sends_every_ray_to_its_focus(x in chart(), fy in -3.0..3.0f64, fz in -6.0..-1.0f64, p in 0.2..3.0f64) {
            let focus = AmbientVector::new(vec![fy, 0.5, fz]);
            let e = Ellipsoid::new(focus.clone(), p).unwrap();
            let (rho, grad, _) = e.radial_derivatives(&x).unwrap();
            let hit = t_rho(&x, rho, grad.as_slice(), RayTarget::Points(std::slice::from_ref(&focus))).unwrap();
            prop_assert!(hit.aim_error < 1e-7);
            // focal sum and eccentricity from the hit
            prop_assert!((rho + hit.d - e.diameter()).abs() < 1e-10 * e.diameter());
            prop_assert!((focus.norm() / (rho + hit.d) - e.eccentricity()).abs() < 1e-10);
        }
    }
}
