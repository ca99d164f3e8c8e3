//! Projection-coordinate calculus on the upper unit hemisphere.
//!
//! A direction `X` in the open upper hemisphere of `S^n` is written
//! `X = (x, ω)` with `ω = sqrt(1 - |x|^2)`. All quantities below are in
//! these coordinates.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::vector::{dot, AmbientVector};

/// Default bound on `|x|` used when building source grids.
pub const DEFAULT_CHART_LIMIT: f64 = 0.95;

/// Projection coordinates `x` of a point on the upper hemisphere.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    x: Vec<f64>,
    omega: f64,
}

impl ChartPoint {
    /// Accepts any `x` strictly inside the unit ball.
    pub fn new(x: Vec<f64>) -> Result<Self> {
        Self::with_limit(x, 1.0)
    }

    /// Accepts `x` with `|x| < limit` (`limit <= 1`).
    pub fn with_limit(x: Vec<f64>, limit: f64) -> Result<Self> {
        let r2 = dot(&x, &x);
        let norm = r2.sqrt();
        if !(norm < limit.min(1.0)) || x.is_empty() {
            return Err(Error::OutsideChart { norm, limit });
        }
        Ok(Self { omega: (1.0 - r2).sqrt(), x })
    }

    pub fn coords(&self) -> &[f64] {
        &self.x
    }

    /// Height `x_{n+1} = ω` of the lifted point.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Metric, inverse metric, Christoffel symbols and second fundamental form.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricData {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// `christoffel[k][(i, j)] = Γ^k_ij`
    pub christoffel: Vec<DMatrix<f64>>,
    pub h: DMatrix<f64>,
}

/// `X = (x, ω)`.
pub fn lift(x: &ChartPoint) -> AmbientVector {
    let mut v = x.x.clone();
    v.push(x.omega);
    AmbientVector::new(v)
}

/// Coordinate tangent vectors `e_i = ∂X/∂x_i = (δ_i, -x_i/ω)`.
pub fn tangent_basis(x: &ChartPoint) -> Vec<AmbientVector> {
    let n = x.dim();
    (0..n)
        .map(|i| {
            let mut e = vec![0.0; n + 1];
            e[i] = 1.0;
            e[n] = -x.x[i] / x.omega;
            AmbientVector::new(e)
        })
        .collect()
}

/// Matrix `δ_ij + x_i x_j / (1 - |x|^2)`; it is the metric and also the
/// second fundamental form of the unit sphere in these coordinates.
pub fn n_matrix(x: &ChartPoint) -> DMatrix<f64> {
    let n = x.dim();
    let w2 = x.omega * x.omega;
    DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        d + x.x[i] * x.x[j] / w2
    })
}

pub fn metric_data(x: &ChartPoint) -> MetricData {
    let n = x.dim();
    let g = n_matrix(x);
    let g_inv = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        d - x.x[i] * x.x[j]
    });
    let christoffel = (0..n).map(|k| &g * x.x[k]).collect();
    MetricData { h: g.clone(), g, g_inv, christoffel }
}

/// Second derivatives of the embedding, `∂_j e_i = (0, -(δ_ij/ω + x_i x_j/ω^3))`.
pub fn embedding_hessian(x: &ChartPoint, i: usize, j: usize) -> AmbientVector {
    let n = x.dim();
    let w = x.omega;
    let d = if i == j { 1.0 } else { 0.0 };
    let mut v = vec![0.0; n + 1];
    v[n] = -(d / w + x.x[i] * x.x[j] / (w * w * w));
    AmbientVector::new(v)
}

/// Right-hand side of the Gauss formula, `Γ^k_ij e_k - g_ij X`.
pub fn gauss_formula(x: &ChartPoint, i: usize, j: usize) -> AmbientVector {
    let m = metric_data(x);
    let basis = tangent_basis(x);
    let big_x = lift(x);
    let mut out = big_x.scale(-m.g[(i, j)]);
    for (k, e) in basis.iter().enumerate() {
        out = &out + &e.scale(m.christoffel[k][(i, j)]);
    }
    out
}

/// Tangential gradient of a function with chart gradient `Dρ`:
/// `∇ρ = (Dρ, 0) - (Dρ·x) X`.
pub fn tangential_gradient(x: &ChartPoint, drho: &[f64]) -> AmbientVector {
    let n = x.dim();
    let dx = dot(drho, &x.x);
    let mut v = vec![0.0; n + 1];
    for i in 0..n {
        v[i] = drho[i] - dx * x.x[i];
    }
    v[n] = -dx * x.omega;
    AmbientVector::new(v)
}

/// `|∇ρ|^2 = |Dρ|^2 - (Dρ·x)^2`.
pub fn tangential_gradient_norm2(x: &ChartPoint, drho: &[f64]) -> f64 {
    let dx = dot(drho, &x.x);
    dot(drho, drho) - dx * dx
}

/// Unit normal of the radial graph `{X ρ(X)}`, pointing away from the
/// origin side: `γ = (∇ρ - ρX) / sqrt(ρ^2 + |∇ρ|^2)`.
pub fn surface_normal(x: &ChartPoint, rho: f64, drho: &[f64]) -> AmbientVector {
    let grad = tangential_gradient(x, drho);
    let big_x = lift(x);
    let g2 = tangential_gradient_norm2(x, drho);
    let v = &grad - &big_x.scale(rho);
    v.scale(1.0 / (rho * rho + g2).sqrt())
}

/// Tangent vectors of the radial graph, `τ_i = ρ e_i + (∂_i ρ) X`.
pub fn graph_tangents(x: &ChartPoint, rho: f64, drho: &[f64]) -> Vec<AmbientVector> {
    let big_x = lift(x);
    tangent_basis(x).iter().zip(drho).map(|(e, d)| &e.scale(rho) + &big_x.scale(*d)).collect()
}
