//! Cell-centred source grids on the projection chart.

use crate::error::{Error, Result};
use crate::geometry::{lift, ChartPoint};
use crate::vector::{dot, AmbientVector};

/// Regular cell-centred grid over `[-R, R]^n`, restricted to a mask.
///
/// Active nodes carry the quadrature weight `h^n / ω`, i.e. `dμ = dx / ω`.
#[derive(Debug, Clone)]
pub struct ChartGrid {
    dim: usize,
    cells: usize,
    half_width: f64,
    points: Vec<ChartPoint>,
    lifted: Vec<AmbientVector>,
    weights: Vec<f64>,
    multi: Vec<Vec<usize>>,
    lookup: Vec<Option<usize>>,
}

impl ChartGrid {
    /// Grid of `cells^n` nodes over `[-half_width, half_width]^n`, keeping
    /// nodes whose coordinates satisfy `keep`.
    pub fn new<F>(dim: usize, cells: usize, half_width: f64, keep: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> bool,
    {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {dim}")));
        }
        if cells < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2 cells per axis".into()));
        }
        if !(half_width > 0.0 && half_width < 1.0) {
            return Err(Error::InvalidParameter(format!("grid half width must lie in (0, 1), got {half_width}")));
        }
        let h = 2.0 * half_width / cells as f64;
        let total = cells.pow(dim as u32);
        let mut lookup = vec![None; total];
        let mut points = Vec::new();
        let mut multi = Vec::new();
        for flat in 0..total {
            let idx = unflatten(flat, cells, dim);
            let x: Vec<f64> = idx.iter().map(|&k| -half_width + (k as f64 + 0.5) * h).collect();
            if !keep(&x) {
                continue;
            }
            let Ok(cp) = ChartPoint::new(x) else { continue };
            lookup[flat] = Some(points.len());
            points.push(cp);
            multi.push(idx);
        }
        if points.is_empty() {
            return Err(Error::InvalidParameter("grid mask keeps no nodes".into()));
        }
        let lifted = points.iter().map(lift).collect();
        let hn = h.powi(dim as i32);
        let weights = points.iter().map(|p| hn / p.omega()).collect();
        Ok(Self { dim, cells, half_width, points, lifted, weights, multi, lookup })
    }

    /// Nodes with `|x| <= radius`.
    pub fn disk(dim: usize, cells: usize, radius: f64) -> Result<Self> {
        let r2 = radius * radius;
        Self::new(dim, cells, radius, |x| dot(x, x) <= r2)
    }

    /// Nodes whose lifted direction lies within `angle` of the unit vector
    /// `center` (which must point into the upper hemisphere) and inside the
    /// chart limit.
    pub fn cap(dim: usize, cells: usize, center: &[f64], angle: f64, chart_limit: f64) -> Result<Self> {
        if center.len() != dim + 1 {
            return Err(Error::DimensionMismatch { expected: dim + 1, got: center.len() });
        }
        let c = AmbientVector::new(center.to_vec())
            .normalized()
            .ok_or_else(|| Error::InvalidParameter("cap center must be nonzero".into()))?;
        if !(angle > 0.0) {
            return Err(Error::InvalidParameter("cap angle must be positive".into()));
        }
        let tilt = c[dim].clamp(-1.0, 1.0).acos();
        let reach = (tilt + angle).min(std::f64::consts::FRAC_PI_2).sin().min(chart_limit);
        let cos_a = angle.cos();
        let lim2 = chart_limit * chart_limit;
        Self::new(dim, cells, reach, |x| {
            let r2 = dot(x, x);
            if r2 > lim2 || r2 >= 1.0 {
                return false;
            }
            let w = (1.0 - r2).sqrt();
            dot(x, &c.as_slice()[..dim]) + w * c[dim] >= cos_a
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.cells as f64
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[ChartPoint] {
        &self.points
    }

    pub fn lifted(&self) -> &[AmbientVector] {
        &self.lifted
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn multi_index(&self, i: usize) -> &[usize] {
        &self.multi[i]
    }

    /// Active node at a full-grid multi-index, if any.
    pub fn at(&self, idx: &[usize]) -> Option<usize> {
        if idx.iter().any(|&k| k >= self.cells) {
            return None;
        }
        self.lookup[flatten(idx, self.cells)]
    }

    /// Neighbour of node `i` one step along `axis` in direction `dir`.
    pub fn neighbor(&self, i: usize, axis: usize, dir: i64) -> Option<usize> {
        let mut idx = self.multi[i].clone();
        let k = idx[axis] as i64 + dir;
        if k < 0 {
            return None;
        }
        idx[axis] = k as usize;
        self.at(&idx)
    }

    /// Unordered neighbour pairs along every axis.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            for axis in 0..self.dim {
                if let Some(j) = self.neighbor(i, axis, 1) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Whether both axis neighbours of `i` are active.
    pub fn is_interior(&self, i: usize) -> bool {
        (0..self.dim).all(|a| self.neighbor(i, a, 1).is_some() && self.neighbor(i, a, -1).is_some())
    }

    /// Chart gradient of nodal values: central differences, one-sided where
    /// a neighbour is missing, zero along an axis with no neighbours.
    pub fn gradient(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let h = self.spacing();
        (0..self.len())
            .map(|i| {
                (0..self.dim)
                    .map(|a| match (self.neighbor(i, a, 1), self.neighbor(i, a, -1)) {
                        (Some(p), Some(m)) => (values[p] - values[m]) / (2.0 * h),
                        (Some(p), None) => (values[p] - values[i]) / h,
                        (None, Some(m)) => (values[i] - values[m]) / h,
                        (None, None) => 0.0,
                    })
                    .collect()
            })
            .collect()
    }
}

fn unflatten(mut flat: usize, cells: usize, dim: usize) -> Vec<usize> {
    let mut idx = vec![0; dim];
    for slot in idx.iter_mut() {
        *slot = flat % cells;
        flat /= cells;
    }
    idx
}

fn flatten(idx: &[usize], cells: usize) -> usize {
    idx.iter().rev().fold(0, |acc, &k| acc * cells + k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_counts_and_weights() {
        let g = ChartGrid::disk(2, 32, 0.5).unwrap();
        let h = g.spacing();
        assert!((h - 1.0 / 32.0).abs() < 1e-15);
        // area of the cap in dμ is 2π(1 - cos α) with sin α = 0.5
        let cap = 2.0 * std::f64::consts::PI * (1.0 - (0.75f64).sqrt());
        let mass: f64 = g.weights().iter().sum();
        assert!((mass - cap).abs() / cap < 0.02, "{mass} vs {cap}");
        for i in 0..g.len() {
            assert_eq!(g.at(g.multi_index(i)), Some(i));
        }
    }

    #[test]
    fn polar_cap_matches_disk() {
        let a = ChartGrid::disk(2, 16, 0.5).unwrap();
        let b = ChartGrid::cap(2, 16, &[0.0, 0.0, 1.0], 0.5f64.asin(), 0.95).unwrap();
        assert_eq!(a.len(), b.len());
    }

    #[test]
    fn gradient_is_exact_for_linear_data() {
        let g = ChartGrid::disk(2, 12, 0.5).unwrap();
        let v: Vec<f64> = g.points().iter().map(|p| 2.0 * p.coords()[0] - 3.0 * p.coords()[1]).collect();
        for d in g.gradient(&v) {
            assert!((d[0] - 2.0).abs() < 1e-12 && (d[1] + 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_dimensional_grid() {
        let g = ChartGrid::disk(1, 10, 0.4).unwrap();
        assert_eq!(g.len(), 10);
        assert_eq!(g.edges().len(), 9);
        assert!(!g.is_interior(0) && g.is_interior(5));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ChartGrid::disk(3, 8, 0.5).is_err());
        assert!(ChartGrid::disk(2, 1, 0.5).is_err());
        assert!(ChartGrid::disk(2, 8, 1.5).is_err());
    }
}
