//! Seeded problem generators shared by the suites, the CLI and the benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::ChartGrid;
use crate::reflector::{BalancePolicy, LevelSet, ReflectorProblem, TargetPoint, TargetSpec};
use crate::vector::AmbientVector;

/// `count` points uniform in `[-spread, spread]²` on the plane `z = height`
/// (`n = 2`) with relative weights uniform in `[0.5, 1.5]`, normalized to
/// unit total.
pub fn random_plane_targets(count: usize, height: f64, spread: f64, seed: u64) -> Vec<(AmbientVector, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<(f64, f64, f64)> = (0..count)
        .map(|_| (rng.gen_range(-spread..spread), rng.gen_range(-spread..spread), rng.gen_range(0.5..1.5)))
        .collect();
    let total: f64 = raw.iter().map(|r| r.2).sum();
    raw.iter().map(|&(a, b, w)| (AmbientVector::new(vec![a, b, height]), w / total)).collect()
}

/// Uniform source on the chart disk of radius 0.5 and the targets of
/// [`random_plane_targets`], weighted to the source flux.
pub fn random_problem(cells: usize, n_targets: usize, height: f64, spread: f64, seed: u64) -> Result<ReflectorProblem> {
    let grid = ChartGrid::disk(2, cells, 0.5)?;
    let flux: f64 = grid.weights().iter().sum();
    let points = random_plane_targets(n_targets, height, spread, seed)
        .into_iter()
        .map(|(y, w)| TargetPoint { y, g: w * flux })
        .collect();
    let target = TargetSpec::new(points, Some(LevelSet::Plane { height }))?;
    let f = vec![1.0; grid.len()];
    ReflectorProblem::new(grid, f, target, 1.0, BalancePolicy::Check)
}

/// Two equal targets mirrored across the plane `x₁ = 0`.
pub fn symmetric_pair(cells: usize, height: f64, offset: f64) -> Result<ReflectorProblem> {
    let grid = ChartGrid::disk(2, cells, 0.4)?;
    let flux: f64 = grid.weights().iter().sum();
    let points = vec![
        TargetPoint { y: AmbientVector::new(vec![offset, 0.0, height]), g: 0.5 * flux },
        TargetPoint { y: AmbientVector::new(vec![-offset, 0.0, height]), g: 0.5 * flux },
    ];
    let target = TargetSpec::new(points, Some(LevelSet::Plane { height }))?;
    let f = vec![1.0; grid.len()];
    ReflectorProblem::new(grid, f, target, 1.0, BalancePolicy::Check)
}
