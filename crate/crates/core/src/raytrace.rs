//! Monte Carlo ray tracing of an ellipsoid-envelope reflector.
//!
//! Rays are stratified over the source grid: cell `i` receives a share of
//! the rays proportional to its mass (largest-remainder rounding), placed
//! uniformly inside the cell, and each ray carries `m_i / n_i`. Every ray
//! is reflected off the exact envelope and assigned to the target point it
//! aims at most closely.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::geometry::{lift, ChartPoint};
use crate::reflector::{t_rho, RayTarget, Reflector, ReflectorProblem};

/// Source cells per parallel chunk; chunk `k` draws from ChaCha8 stream `k`.
pub const CHUNK_CELLS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct RaytraceReport {
    pub rays: u64,
    /// Rays assigned to each target.
    pub counts: Vec<u64>,
    /// Normalized mass received by each target.
    pub histogram: Vec<f64>,
    /// Normalized target masses `G_j`.
    pub expected: Vec<f64>,
    /// `½ Σ |histogram_j - G_j|`.
    pub tv: f64,
    /// Largest angle between a reflected ray and its assigned target.
    pub max_aim_error: f64,
}

/// Rays per cell by largest-remainder rounding of `rays · m_i`.
fn allocate(masses: &[f64], rays: u64) -> Vec<u64> {
    let exact: Vec<f64> = masses.iter().map(|m| m * rays as f64).collect();
    let mut alloc: Vec<u64> = exact.iter().map(|e| e.floor() as u64).collect();
    let assigned: u64 = alloc.iter().sum();
    let mut order: Vec<usize> = (0..masses.len()).collect();
    // stable sort keeps ties in index order
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    for &i in order.iter().take(rays.saturating_sub(assigned) as usize) {
        alloc[i] += 1;
    }
    alloc
}

struct Tally {
    counts: Vec<u64>,
    mass: Vec<f64>,
    max_aim_error: f64,
}

/// Traces `rays` rays with the given seed. The result does not depend on
/// the number of threads.
pub fn raytrace(reflector: &Reflector, problem: &ReflectorProblem, rays: u64, seed: u64) -> Result<RaytraceReport> {
    if rays == 0 {
        return Err(Error::InvalidParameter("at least one ray is required".into()));
    }
    if reflector.eta.len() != problem.n_target() {
        return Err(Error::DimensionMismatch { expected: problem.n_target(), got: reflector.eta.len() });
    }
    let grid = problem.grid();
    let n_target = problem.n_target();
    let foci = problem.target().foci();
    let ellipsoids: Vec<Ellipsoid> =
        foci.iter().zip(&reflector.eta).map(|(y, e)| Ellipsoid::new(y.clone(), 1.0 / e)).collect::<Result<_>>()?;
    let alloc = allocate(problem.source_mass(), rays);
    let h = grid.spacing();
    let n_cells = grid.len();
    let chunks: Vec<usize> = (0..n_cells.div_ceil(CHUNK_CELLS)).collect();

    let tallies: Vec<Result<Tally>> = chunks
        .par_iter()
        .map(|&k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut tally = Tally { counts: vec![0; n_target], mass: vec![0.0; n_target], max_aim_error: 0.0 };
            for i in k * CHUNK_CELLS..((k + 1) * CHUNK_CELLS).min(n_cells) {
                let n_i = alloc[i];
                if n_i == 0 {
                    continue;
                }
                let w = problem.source_mass()[i] / n_i as f64;
                let centre = grid.points()[i].coords();
                for _ in 0..n_i {
                    let coords: Vec<f64> = centre.iter().map(|c| c + h * (rng.gen::<f64>() - 0.5)).collect();
                    let x = ChartPoint::new(coords).unwrap_or_else(|_| grid.points()[i].clone());
                    let big_x = lift(&x);
                    let mut best = (f64::INFINITY, 0);
                    for (j, e) in ellipsoids.iter().enumerate() {
                        let r = e.radial(&big_x)?;
                        if r < best.0 {
                            best = (r, j);
                        }
                    }
                    let (rho, grad, _) = ellipsoids[best.1].radial_derivatives(&x)?;
                    let hit = t_rho(&x, rho, grad.as_slice(), RayTarget::Points(&foci))?;
                    let j = hit.index.expect("point targets always assign an index");
                    tally.counts[j] += 1;
                    tally.mass[j] += w;
                    tally.max_aim_error = tally.max_aim_error.max(hit.aim_error);
                }
            }
            Ok(tally)
        })
        .collect();

    let mut counts = vec![0u64; n_target];
    let mut mass = vec![0.0; n_target];
    let mut max_aim_error = 0.0f64;
    for t in tallies {
        let t = t?;
        for j in 0..n_target {
            counts[j] += t.counts[j];
            mass[j] += t.mass[j];
        }
        max_aim_error = max_aim_error.max(t.max_aim_error);
    }
    let total: f64 = mass.iter().sum();
    let histogram: Vec<f64> = mass.iter().map(|m| m / total).collect();
    let expected = problem.target_mass().to_vec();
    let tv = 0.5 * histogram.iter().zip(&expected).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok(RaytraceReport { rays: counts.iter().sum(), counts, histogram, expected, tv, max_aim_error })
}
