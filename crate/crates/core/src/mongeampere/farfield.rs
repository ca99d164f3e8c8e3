//! The far-field equation and the near-field to far-field limit along
//! spherical targets `ψ(Z) = r² - |Z|²`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{aux_a, aux_b, aux_frame, ma_lhs, residual::map_point, CatalogReflector};
use crate::error::{Error, Result};
use crate::geometry::{n_matrix, ChartPoint};
use crate::reflector::LevelSet;

#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldOperator {
    /// `D²ρ - (2/ρ) Dρ⊗Dρ + (a/2ρ) 𝒩`.
    pub matrix: DMatrix<f64>,
    pub m_ff: f64,
    /// `|b|ⁿ f / (2ⁿ ρⁿ ω² g)`.
    pub rhs_ff: f64,
}

pub fn farfield_operator(
    x: &ChartPoint,
    rho: f64,
    drho: &[f64],
    d2rho: &DMatrix<f64>,
    f: f64,
    g: f64,
) -> Result<FarFieldOperator> {
    let n = x.dim();
    if drho.len() != n || d2rho.nrows() != n || d2rho.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: drho.len() });
    }
    if !(rho > 0.0) || !(g > 0.0) {
        return Err(Error::InvalidParameter(format!("rho = {rho} and g = {g} must be positive")));
    }
    let a = aux_a(x, rho, drho);
    let b = aux_b(x, rho, drho);
    let nm = n_matrix(x);
    let k = a / (2.0 * rho);
    let matrix = DMatrix::from_fn(n, n, |i, j| d2rho[(i, j)] - 2.0 / rho * drho[i] * drho[j] + k * nm[(i, j)]);
    let m_ff = matrix.determinant().abs();
    let ni = n as i32;
    let rhs_ff = b.abs().powi(ni) * f / (2f64.powi(ni) * rho.powi(ni) * x.omega().powi(2) * g);
    Ok(FarFieldOperator { matrix, m_ff, rhs_ff })
}

/// Worst gaps over the sampled points at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarFieldRow {
    pub r: f64,
    /// `|β|∇ψ| - a/(ρb)|`.
    pub beta_gap: f64,
    /// `|r/t + ρb/a|`.
    pub t_gap: f64,
    /// Max entry of near-field matrix minus far-field matrix.
    pub matrix_gap: f64,
    /// Points whose near-field frame was degenerate.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldReport {
    pub rows: Vec<FarFieldRow>,
}

impl FarFieldReport {
    /// Ratios `gap(r_k) / gap(r_{k+1})` for the three gaps, in order
    /// `(beta, t, matrix)`. Zero gaps give `None`.
    pub fn ratios(&self) -> Vec<[Option<f64>; 3]> {
        let q = |a: f64, b: f64| (a > 0.0 && b > 0.0).then(|| a / b);
        self.rows
            .windows(2)
            .map(|w| [q(w[0].beta_gap, w[1].beta_gap), q(w[0].t_gap, w[1].t_gap), q(w[0].matrix_gap, w[1].matrix_gap)])
            .collect()
    }
}

/// Near-field frames on the spheres of radius `r` about the source for each
/// `r` in `r_list`, compared with their far-field limits.
pub fn farfield_limit_check(refl: &CatalogReflector, points: &[ChartPoint], r_list: &[f64]) -> Result<FarFieldReport> {
    if r_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("radii must be increasing".into()));
    }
    let mut rows = Vec::with_capacity(r_list.len());
    for &r in r_list {
        let level_set = LevelSet::Sphere { center: vec![0.0; points.first().map_or(1, |p| p.dim() + 1)], radius: r };
        let per_point: Vec<Result<Option<[f64; 3]>>> = points
            .par_iter()
            .map(|x| {
                let (jet, hit) = map_point(refl, x, &level_set)?;
                let frame = aux_frame(x, jet.rho, &jet.grad, &hit.y, &level_set)?;
                if frame.degeneracy.is_some() {
                    return Ok(None);
                }
                let rho = jet.rho;
                let beta_gap = (frame.beta * frame.grad_psi.norm() - frame.a / (rho * frame.b)).abs();
                let t_gap = (r / frame.t + rho * frame.b / frame.a).abs();
                let (near, _) = ma_lhs(rho, &jet.grad, &jet.hess, &frame)?;
                let far = farfield_operator(x, rho, &jet.grad, &jet.hess, 1.0, 1.0)?;
                let matrix_gap = (near - far.matrix).abs().max();
                Ok(Some([beta_gap, t_gap, matrix_gap]))
            })
            .collect();
        let mut row = FarFieldRow { r, beta_gap: 0.0, t_gap: 0.0, matrix_gap: 0.0, skipped: 0 };
        for p in per_point {
            match p? {
                Some([b, t, m]) => {
                    row.beta_gap = row.beta_gap.max(b);
                    row.t_gap = row.t_gap.max(t);
                    row.matrix_gap = row.matrix_gap.max(m);
                }
                None => row.skipped += 1,
            }
        }
        rows.push(row);
    }
    Ok(FarFieldReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples() -> Vec<ChartPoint> {
        (0..24)
            .map(|k| {
                let ang = k as f64 * 0.77;
                let r = 0.05 + 0.4 * (k as f64 / 24.0);
                ChartPoint::new(vec![r * ang.cos(), r * ang.sin()]).unwrap()
            })
            .collect()
    }

    #[test]
    fn unit_sphere_at_pole() {
        let x = ChartPoint::new(vec![0.0, 0.0]).unwrap();
        let op = farfield_operator(&x, 1.0, &[0.0, 0.0], &DMatrix::zeros(2, 2), 1.0, 1.0).unwrap();
        assert_eq!(op.matrix, DMatrix::identity(2, 2) * -0.5);
        assert_eq!(op.m_ff, 0.25);
        assert_eq!(op.rhs_ff, 0.25);
    }

    #[test]
    fn constant_reflector_limits() {
        let refl = CatalogReflector::from_id("constant", 2).unwrap();
        let rep = farfield_limit_check(&refl, &samples(), &[1e5]).unwrap();
        let row = rep.rows[0];
        assert_eq!(row.skipped, 0);
        assert!(row.beta_gap < 1e-6, "{row:?}");
        assert!(row.t_gap < 1e-6, "{row:?}");
    }

    #[test]
    fn gaps_decay_like_inverse_radius() {
        let refl = CatalogReflector::from_id("bump-envelope", 2).unwrap();
        let rep = farfield_limit_check(&refl, &samples(), &[10.0, 100.0, 1000.0]).unwrap();
        for [beta, t, matrix] in rep.ratios() {
            // the first-order terms of the β gap cancel, so it decays as 1/r²
            assert!(beta.unwrap() >= 5.0, "{rep:?}");
            for q in [t, matrix] {
                assert!((5.0..=20.0).contains(&q.unwrap()), "{rep:?}");
            }
        }
    }

    #[test]
    fn radii_must_increase() {
        let refl = CatalogReflector::from_id("constant", 2).unwrap();
        assert!(farfield_limit_check(&refl, &samples(), &[10.0, 5.0]).is_err());
    }
}
