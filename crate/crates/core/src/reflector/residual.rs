//! Weak-solution residual and the functional `I` on reflectors.

use super::{Reflector, ReflectorProblem};
use crate::ellipsoid::eccentricity;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PushforwardResidual {
    /// Normalized source mass of each visibility cell.
    pub masses: Vec<f64>,
    /// `m_j - G_j`.
    pub residuals: Vec<f64>,
    pub max_abs: f64,
    /// Targets with positive weight whose cell is empty.
    pub empty: Vec<usize>,
}

/// Bins the normalized source mass by contact and compares with the
/// normalized target masses.
pub fn pushforward_residual(reflector: &Reflector, problem: &ReflectorProblem) -> Result<PushforwardResidual> {
    if reflector.contact.len() != problem.n_source() {
        return Err(Error::DimensionMismatch { expected: problem.n_source(), got: reflector.contact.len() });
    }
    let mut masses = vec![0.0; problem.n_target()];
    let mut count = vec![0usize; problem.n_target()];
    for (i, &j) in reflector.contact.iter().enumerate() {
        masses[j] += problem.source_mass()[i];
        count[j] += 1;
    }
    let residuals: Vec<f64> = masses.iter().zip(problem.target_mass()).map(|(m, g)| m - g).collect();
    let max_abs = residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let empty = (0..count.len()).filter(|&j| count[j] == 0 && problem.target_mass()[j] > 0.0).collect();
    Ok(PushforwardResidual { masses, residuals, max_abs, empty })
}

/// `I = Σ_i m_i log ρ_i + Σ_j G_j Σ_i μ_i [log η_j + ln(1 - κ_ij)]` with
/// `μ_i` the normalized quadrature weights and `κ_ij = ε_j θ_ij`.
pub fn functional_i_reflector(reflector: &Reflector, problem: &ReflectorProblem) -> Result<f64> {
    let wsum: f64 = problem.grid().weights().iter().sum();
    let eps: Vec<f64> = reflector
        .eta
        .iter()
        .zip(problem.focus_dist())
        .map(|(e, d)| eccentricity(1.0 / e, *d))
        .collect::<Result<_>>()?;
    let mut source = 0.0;
    for (i, r) in reflector.rho.iter().enumerate() {
        source += problem.source_mass()[i] * r.ln();
    }
    let mut target = 0.0;
    for (j, g) in problem.target_mass().iter().enumerate() {
        let mut acc = 0.0;
        for (i, w) in problem.grid().weights().iter().enumerate() {
            let a = 1.0 - eps[j] * problem.theta(i, j);
            if !(a > 0.0) {
                return Err(Error::InfeasibleGeometry(format!("log argument {a} at ({i}, {j})")));
            }
            acc += w / wsum * (reflector.eta[j].ln() + a.ln());
        }
        target += g * acc;
    }
    Ok(source + target)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::random_problem;
    use super::super::{BalancePolicy, LevelSet, ReflectorObjective, TargetPoint, TargetSpec};
    use super::*;
    use crate::dual_core::{functional_i, PotentialPair};
    use crate::grid::ChartGrid;
    use crate::vector::AmbientVector;

    #[test]
    fn single_target_has_zero_residual() {
        let p = random_problem(12, 1, -3.0, 2);
        let r = Reflector::from_eta(vec![1.3], &p).unwrap();
        let res = pushforward_residual(&r, &p).unwrap();
        assert!(res.max_abs < 1e-14);
        assert!(res.empty.is_empty());
    }

    #[test]
    fn mirror_symmetric_targets_have_equal_residuals() {
        let grid = ChartGrid::disk(2, 20, 0.5).unwrap();
        let flux: f64 = grid.weights().iter().sum();
        let pts = vec![
            TargetPoint { y: AmbientVector::new(vec![1.0, 0.3, -4.0]), g: 0.3 * flux },
            TargetPoint { y: AmbientVector::new(vec![-1.0, 0.3, -4.0]), g: 0.7 * flux },
        ];
        let t = TargetSpec::new(pts, Some(LevelSet::Plane { height: -4.0 })).unwrap();
        let f = vec![1.0; grid.len()];
        let p = ReflectorProblem::new(grid, f, t, 1.0, BalancePolicy::Check).unwrap();
        let r = Reflector::from_eta(vec![1.0, 1.0], &p).unwrap();
        let res = pushforward_residual(&r, &p).unwrap();
        assert!((res.residuals[0].abs() - res.residuals[1].abs()).abs() < 1e-14);
        assert!((res.residuals.iter().sum::<f64>()).abs() < 1e-14);
    }

    #[test]
    fn functional_matches_generic_quadrature() {
        let p = random_problem(16, 5, -4.0, 7);
        let r = Reflector::from_eta(vec![0.5, 0.9, 1.1, 0.7, 1.4], &p).unwrap();
        let a = functional_i_reflector(&r, &p).unwrap();
        let pair =
            PotentialPair { u: r.rho.iter().map(|v| v.ln()).collect(), v: r.eta.iter().map(|v| v.ln()).collect() };
        let b = functional_i(&pair, &ReflectorObjective::ambient(), &p.domains());
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}
