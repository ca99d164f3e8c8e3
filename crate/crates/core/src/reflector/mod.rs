//! The near-field reflector instance.
//!
//! A reflector is stored by its focal data `η_j = 1/p_j`: the radial
//! function is the lower envelope of the ellipsoids `E(Y_j, 1/η_j)`, and
//! each source direction is assigned to the ellipsoid that supports it.

mod constraint;
mod envelope;
mod levelset;
mod optics;
mod residual;

pub use constraint::{
    phi_reflector, phi_reflector_s, FarFieldConstraint, FarFieldObjective, ReflectorConstraint, ReflectorObjective,
    TargetEmbedding,
};
pub use envelope::{
    contact_multiplicity, envelope_at, eta_from_rho, eta_from_rho_bracketed, focal_oracle, rho_from_eta, EnvelopePoint,
};
pub use levelset::LevelSet;
pub use optics::{node_gradient, reflect_direction, t_rho, t_rho_at_node, RayHit, RayTarget};
pub use residual::{functional_i_reflector, pushforward_residual, PushforwardResidual};

use crate::dual_core::{Coupling, DiscreteDomainPair};
use crate::error::{Error, Result};
use crate::grid::ChartGrid;
use crate::vector::{dot, AmbientVector};

/// Largest allowed relative mismatch of source and target flux.
pub const BALANCE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct TargetPoint {
    pub y: AmbientVector,
    pub g: f64,
}

/// Target points with weights, optionally sampled from a level set.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    pub points: Vec<TargetPoint>,
    pub level_set: Option<LevelSet>,
}

impl TargetSpec {
    pub fn new(points: Vec<TargetPoint>, level_set: Option<LevelSet>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("target needs at least one point".into()));
        }
        for (j, p) in points.iter().enumerate() {
            if !(p.y.norm() > 0.0) || !p.y.is_finite() {
                return Err(Error::InvalidParameter(format!("target point {j} must be nonzero and finite")));
            }
            if !(p.g > 0.0) || !p.g.is_finite() {
                return Err(Error::InvalidParameter(format!("target weight {j} must be positive")));
            }
            if let Some(ls) = &level_set {
                let psi = ls.value(&p.y);
                if psi.abs() > 1e-8 {
                    return Err(Error::InvalidParameter(format!(
                        "target point {j} is off the level set (ψ = {psi:e})"
                    )));
                }
                if !(ls.gradient(&p.y).norm() > 0.0) {
                    return Err(Error::InvalidParameter(format!("level set gradient vanishes at target point {j}")));
                }
            }
        }
        Ok(Self { points, level_set })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn foci(&self) -> Vec<AmbientVector> {
        self.points.iter().map(|p| p.y.clone()).collect()
    }
}

/// How target flux that disagrees with the source flux is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalancePolicy {
    /// Reject mismatches above [`BALANCE_TOLERANCE`]; rescale below it.
    Check,
    /// Always rescale the target weights.
    Rescale,
}

/// A discretized reflector design problem.
#[derive(Debug, Clone)]
pub struct ReflectorProblem {
    grid: ChartGrid,
    f: Vec<f64>,
    target: TargetSpec,
    c0: f64,
    source_mass: Vec<f64>,
    target_mass: Vec<f64>,
    flux_mismatch: f64,
    min_separation: f64,
    theta: Vec<f64>,
    focus_dist: Vec<f64>,
}

impl ReflectorProblem {
    pub fn new(grid: ChartGrid, f: Vec<f64>, target: TargetSpec, c0: f64, policy: BalancePolicy) -> Result<Self> {
        if f.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: f.len() });
        }
        if f.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("source density must be positive and finite".into()));
        }
        if !(c0 > 0.0) || !c0.is_finite() {
            return Err(Error::InvalidParameter(format!("c0 must be positive, got {c0}")));
        }
        let dim = grid.dim();
        for (j, p) in target.points.iter().enumerate() {
            if p.y.len() != dim + 1 {
                return Err(Error::InvalidParameter(format!(
                    "target point {j} has {} components, expected {}",
                    p.y.len(),
                    dim + 1
                )));
            }
        }
        let flux_f: f64 = f.iter().zip(grid.weights()).map(|(a, w)| a * w).sum();
        let flux_g: f64 = target.points.iter().map(|p| p.g).sum();
        let mismatch = (flux_f - flux_g).abs() / flux_f;
        if policy == BalancePolicy::Check && mismatch > BALANCE_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "source flux {flux_f:.6} and target flux {flux_g:.6} differ by {:.3}% (limit {:.1}%)",
                100.0 * mismatch,
                100.0 * BALANCE_TOLERANCE
            )));
        }
        let source_mass = f.iter().zip(grid.weights()).map(|(a, w)| a * w / flux_f).collect();
        let target_mass = target.points.iter().map(|p| p.g / flux_g).collect();

        let focus_dist: Vec<f64> = target.points.iter().map(|p| p.y.norm()).collect();
        let n_t = target.len();
        let mut theta = Vec::with_capacity(grid.len() * n_t);
        let mut max_cos = f64::NEG_INFINITY;
        for x in grid.lifted() {
            for (p, d) in target.points.iter().zip(&focus_dist) {
                let c = dot(x, &p.y) / d;
                max_cos = max_cos.max(c);
                theta.push(c);
            }
        }
        let min_separation = max_cos.clamp(-1.0, 1.0).acos();
        if !(min_separation > 1e-6) {
            return Err(Error::InfeasibleGeometry(format!(
                "source and target directions overlap (min angle {min_separation:e} rad)"
            )));
        }
        Ok(Self {
            grid,
            f,
            target,
            c0,
            source_mass,
            target_mass,
            flux_mismatch: mismatch,
            min_separation,
            theta,
            focus_dist,
        })
    }

    pub fn grid(&self) -> &ChartGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn target(&self) -> &TargetSpec {
        &self.target
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn with_c0(mut self, c0: f64) -> Result<Self> {
        if !(c0 > 0.0) {
            return Err(Error::InvalidParameter(format!("c0 must be positive, got {c0}")));
        }
        self.c0 = c0;
        Ok(self)
    }

    pub fn n_source(&self) -> usize {
        self.grid.len()
    }

    pub fn n_target(&self) -> usize {
        self.target.len()
    }

    /// Normalized source masses `f_i w_i / Σ f w`.
    pub fn source_mass(&self) -> &[f64] {
        &self.source_mass
    }

    /// Normalized target masses `g_j / Σ g`.
    pub fn target_mass(&self) -> &[f64] {
        &self.target_mass
    }

    /// Relative flux mismatch before rescaling.
    pub fn flux_mismatch(&self) -> f64 {
        self.flux_mismatch
    }

    /// Smallest angle between a source direction and a target direction.
    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }

    /// `<X_i, Y_j/|Y_j|>`.
    #[inline]
    pub fn theta(&self, i: usize, j: usize) -> f64 {
        self.theta[i * self.target.len() + j]
    }

    pub fn theta_row(&self, i: usize) -> &[f64] {
        let n = self.target.len();
        &self.theta[i * n..(i + 1) * n]
    }

    pub fn focus_dist(&self) -> &[f64] {
        &self.focus_dist
    }

    /// The problem as a discrete domain pair for the generic framework:
    /// source chart points and target points carry unit-mass weights and
    /// densities whose products are the normalized masses.
    pub fn domains(&self) -> DiscreteDomainPair {
        let wsum: f64 = self.grid.weights().iter().sum();
        let mu: Vec<f64> = self.grid.weights().iter().map(|w| w / wsum).collect();
        let n_t = self.n_target();
        let nu = vec![1.0 / n_t as f64; n_t];
        let f_hat = self.source_mass.iter().zip(&mu).map(|(m, w)| m / w).collect();
        let g_hat = self.target_mass.iter().map(|m| m * n_t as f64).collect();
        DiscreteDomainPair {
            u_points: self.grid.points().iter().map(|p| p.coords().to_vec()).collect(),
            u_weights: mu,
            f: f_hat,
            v_points: self.target.points.iter().map(|p| p.y.as_slice().to_vec()).collect(),
            v_weights: nu,
            g: g_hat,
            coupling: Coupling::Product,
        }
    }
}

/// A reflector: radial values on the grid, focal data on the targets and
/// the supporting-ellipsoid assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Reflector {
    pub rho: Vec<f64>,
    pub eta: Vec<f64>,
    pub contact: Vec<usize>,
}

impl Reflector {
    /// Builds the envelope reflector for the given focal data.
    pub fn from_eta(eta: Vec<f64>, problem: &ReflectorProblem) -> Result<Self> {
        let (rho, contact) = rho_from_eta(&eta, problem)?;
        Ok(Self { rho, eta, contact })
    }

    pub fn min_rho(&self) -> f64 {
        self.rho.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Focal parameters `p_j = 1/η_j`.
    pub fn p(&self) -> Vec<f64> {
        self.eta.iter().map(|e| 1.0 / e).collect()
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::random_problem;
    use super::*;

    #[test]
    fn masses_are_normalized() {
        let p = random_problem(16, 4, -5.0, 1);
        let s: f64 = p.source_mass().iter().sum();
        let t: f64 = p.target_mass().iter().sum();
        assert!((s - 1.0).abs() < 1e-14 && (t - 1.0).abs() < 1e-14);
        let d = p.domains();
        assert!(d.marginal_error() < 1e-15);
        for i in 0..p.n_source() {
            assert!((d.u_weights[i] * d.f[i] - p.source_mass()[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn balance_is_checked() {
        let grid = ChartGrid::disk(2, 8, 0.5).unwrap();
        let flux: f64 = grid.weights().iter().sum();
        let pt =
            |g| TargetSpec::new(vec![TargetPoint { y: AmbientVector::new(vec![0.0, 0.0, -3.0]), g }], None).unwrap();
        let f = vec![1.0; grid.len()];
        assert!(ReflectorProblem::new(grid.clone(), f.clone(), pt(flux * 1.005), 1.0, BalancePolicy::Check).is_ok());
        assert!(ReflectorProblem::new(grid.clone(), f.clone(), pt(flux * 1.05), 1.0, BalancePolicy::Check).is_err());
        assert!(ReflectorProblem::new(grid, f, pt(flux * 1.05), 1.0, BalancePolicy::Rescale).is_ok());
    }

    #[test]
    fn overlapping_directions_are_rejected() {
        let grid = ChartGrid::disk(2, 8, 0.5).unwrap();
        let f = vec![1.0; grid.len()];
        let flux: f64 = grid.weights().iter().sum();
        let x = grid.lifted()[0].scale(3.0);
        let t = TargetSpec::new(vec![TargetPoint { y: x, g: flux }], None).unwrap();
        assert!(matches!(
            ReflectorProblem::new(grid, f, t, 1.0, BalancePolicy::Check),
            Err(Error::InfeasibleGeometry(_))
        ));
    }

    #[test]
    fn level_set_membership_is_validated() {
        let off = TargetSpec::new(
            vec![TargetPoint { y: AmbientVector::new(vec![0.0, 0.0, -2.0]), g: 1.0 }],
            Some(LevelSet::Plane { height: -3.0 }),
        );
        assert!(off.is_err());
    }
}
