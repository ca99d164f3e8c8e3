//! Monge-Ampère operator and far-field invariants on the analytic catalog.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Bound, Check, Size, SuiteReport};
use crate::error::Result;
use crate::geometry::ChartPoint;
use crate::mongeampere::{
    farfield_limit_check, farfield_operator, intermediate_identities, jacobian_crosscheck, refinement_study,
    reflector_route_check, CatalogReflector, FarFieldReport, RefinementTable,
};
use crate::reflector::LevelSet;

/// Radii of the far-field rate table.
pub const FARFIELD_RADII: [f64; 3] = [10.0, 100.0, 1000.0];
/// Radius at which the constant reflector is compared with its limits.
pub const FARFIELD_CONSTANT_RADIUS: f64 = 1e5;
/// Finite-difference step of the Jacobian cross-check.
pub const JACOBIAN_STEP: f64 = 1e-4;

fn sample_points(rng: &mut ChaCha8Rng, count: usize, r_max: f64) -> Vec<ChartPoint> {
    (0..count)
        .map(|_| {
            // uniform in the disk
            let r = r_max * rng.gen::<f64>().sqrt();
            let a = rng.gen_range(0.0..TAU);
            ChartPoint::new(vec![r * a.cos(), r * a.sin()]).expect("inside the chart")
        })
        .collect()
}

pub fn format_refinement(table: &RefinementTable) -> String {
    let mut s = String::from("cells,h,max_residual,evaluated,degenerate,order\n");
    for r in &table.rows {
        let order = r.order.map_or(String::from("-"), |o| format!("{o:.4}"));
        s += &format!("{},{:.6e},{:.6e},{},{},{}\n", r.cells, r.h, r.max_residual, r.evaluated, r.degenerate, order);
    }
    s
}

pub fn format_farfield(report: &FarFieldReport) -> String {
    let mut s = String::from("r,beta_gap,t_gap,matrix_gap,skipped\n");
    for r in &report.rows {
        s += &format!("{},{:.6e},{:.6e},{:.6e},{}\n", r.r, r.beta_gap, r.t_gap, r.matrix_gap, r.skipped);
    }
    s
}

/// The ratio furthest (in log scale) from the middle of `[lo, hi]`; NaN
/// when a ratio is missing.
fn worst_ratio(ratios: &[Option<f64>], lo: f64, hi: f64) -> f64 {
    let mid = (lo * hi).sqrt();
    let mut worst = (f64::NEG_INFINITY, f64::NAN);
    for q in ratios {
        let Some(q) = *q else { return f64::NAN };
        let dev = (q / mid).ln().abs();
        if dev > worst.0 {
            worst = (dev, q);
        }
    }
    worst.1
}

pub(super) fn ma_suite(rng: &mut ChaCha8Rng, size: Size) -> Result<SuiteReport> {
    let levels: &[usize] = size.pick(&[16, 32, 64], &[32, 64, 128], &[32, 64, 128, 256]);
    let samples = size.pick(200, 1000, 5000);
    let bump = CatalogReflector::from_id("bump-envelope", 2)?;
    let single = CatalogReflector::from_id("single-ellipsoid", 2)?;
    let mut checks = Vec::new();

    let table = refinement_study(&bump, 2, 0.5, levels, &bump.level_set())?;
    let order = table.finest_order().unwrap_or(f64::NAN);
    checks.push(Check::new("ma", "refinement_order", order, Bound::AtLeast(1.5), levels.len()));
    let flat = refinement_study(&single, 2, 0.5, &[16], &single.level_set())?;
    checks.push(Check::new(
        "ma",
        "single_ellipsoid_flagged_degenerate",
        flat.rows[0].evaluated as f64,
        Bound::AtMost(0.0),
        flat.rows[0].degenerate,
    ));

    let points = sample_points(rng, samples, 0.5);
    let sphere = LevelSet::Sphere { center: vec![0.0; 3], radius: 4.0 };
    for (name, ls) in [("jacobian_formula_plane", bump.level_set()), ("jacobian_formula_sphere", sphere)] {
        let (mut good, mut regular) = (0usize, 0usize);
        for x in &points {
            // degenerate frames are excluded, as in the residual field
            if let Ok(c) = jacobian_crosscheck(&bump, x, &ls, JACOBIAN_STEP) {
                regular += 1;
                if c.rel_err <= 1e-5 {
                    good += 1;
                }
            }
        }
        checks.push(Check::new("ma", name, good as f64 / regular.max(1) as f64, Bound::AtLeast(0.95), regular));
    }

    let (mut gap, mut stat, mut height, mut length, mut curvature) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let few = &points[..samples / 4];
    for x in few {
        let c = reflector_route_check(&bump, x, -3.0, JACOBIAN_STEP)?;
        gap = gap.max(c.max_rel_gap());
        stat = stat.max(c.stationarity).max(c.constraint.abs());
        let id = intermediate_identities(&bump, x, &bump.level_set())?;
        height = height.max(id.height);
        length = length.max(id.length);
        curvature = curvature.max(id.curvature);
    }
    checks.push(Check::new("ma", "route_equivalence", gap, Bound::AtMost(1e-5), few.len()));
    checks.push(Check::new("ma", "route_stationarity", stat, Bound::AtMost(1e-8), few.len()));
    checks.push(Check::new("ma", "target_height_identity", height, Bound::AtMost(1e-10), few.len()));
    checks.push(Check::new("ma", "reflected_length_identity", length, Bound::AtMost(1e-8), few.len()));
    checks.push(Check::new("ma", "curvature_identity", curvature, Bound::AtMost(1e-8), few.len()));

    Ok(SuiteReport { checks, tables: vec![format!("ma: bump-envelope refinement\n{}", format_refinement(&table))] })
}

pub(super) fn farfield_suite(rng: &mut ChaCha8Rng, size: Size) -> Result<SuiteReport> {
    let points = sample_points(rng, size.pick(24, 96, 384), 0.45);
    let bump = CatalogReflector::from_id("bump-envelope", 2)?;
    let report = farfield_limit_check(&bump, &points, &FARFIELD_RADII)?;
    let ratios = report.ratios();
    let column = |k: usize| -> Vec<Option<f64>> { ratios.iter().map(|r| r[k]).collect() };
    let n = points.len();
    let mut checks = vec![
        // first-order terms of the β gap cancel, so it decays like 1/r²
        Check::new("farfield", "beta_gap_rate", worst_ratio(&column(0), 50.0, 200.0), Bound::Within(50.0, 200.0), n),
        Check::new("farfield", "t_gap_rate", worst_ratio(&column(1), 5.0, 20.0), Bound::Within(5.0, 20.0), n),
        Check::new("farfield", "matrix_gap_rate", worst_ratio(&column(2), 5.0, 20.0), Bound::Within(5.0, 20.0), n),
    ];

    let constant = CatalogReflector::from_id("constant", 2)?;
    let far = farfield_limit_check(&constant, &points, &[FARFIELD_CONSTANT_RADIUS])?;
    let row = far.rows[0];
    let missing = if row.skipped > 0 { f64::NAN } else { 0.0 };
    checks.push(Check::new("farfield", "constant_beta_limit", row.beta_gap + missing, Bound::AtMost(1e-6), n));
    checks.push(Check::new("farfield", "constant_t_limit", row.t_gap + missing, Bound::AtMost(1e-6), n));

    let pole = ChartPoint::new(vec![0.0, 0.0])?;
    let op = farfield_operator(&pole, 1.0, &[0.0, 0.0], &DMatrix::zeros(2, 2), 1.0, 1.0)?;
    checks.push(Check::new(
        "farfield",
        "unit_sphere_balance",
        (op.m_ff - 0.25).abs() + (op.rhs_ff - 0.25).abs(),
        Bound::AtMost(1e-15),
        1,
    ));

    Ok(SuiteReport { checks, tables: vec![format!("farfield: bump-envelope gaps\n{}", format_farfield(&report))] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worst_ratio_picks_the_outlier() {
        assert_eq!(worst_ratio(&[Some(9.0), Some(19.0), Some(10.5)], 5.0, 20.0), 19.0);
        assert!(worst_ratio(&[Some(9.0), None], 5.0, 20.0).is_nan());
    }
}
