//! Target surfaces `{Z : ψ(Z) = 0}`.

use crate::error::{Error, Result};
use crate::roots::bisect_increasing;
use crate::vector::{dot, AmbientVector};

#[derive(Debug, Clone, PartialEq)]
pub enum LevelSet {
    /// `ψ(Z) = Z_{n+1} - height`.
    Plane { height: f64 },
    /// `ψ(Z) = r^2 - |Z - c|^2`.
    Sphere { center: Vec<f64>, radius: f64 },
}

impl LevelSet {
    pub fn value(&self, z: &[f64]) -> f64 {
        match self {
            LevelSet::Plane { height } => z[z.len() - 1] - height,
            LevelSet::Sphere { center, radius } => {
                let d2: f64 = z.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                radius * radius - d2
            }
        }
    }

    pub fn gradient(&self, z: &[f64]) -> AmbientVector {
        match self {
            LevelSet::Plane { .. } => {
                let mut g = vec![0.0; z.len()];
                g[z.len() - 1] = 1.0;
                AmbientVector::new(g)
            }
            LevelSet::Sphere { center, .. } => {
                AmbientVector::new(z.iter().zip(center).map(|(a, b)| -2.0 * (a - b)).collect())
            }
        }
    }

    /// First `σ > 0` with `ψ(origin + σ dir) = 0`, in closed form.
    pub fn intersect_ray(&self, origin: &[f64], dir: &[f64], max_range: f64) -> Result<f64> {
        let sigma = match self {
            LevelSet::Plane { height } => {
                let k = origin.len() - 1;
                if dir[k] == 0.0 {
                    return Err(Error::RayMiss(max_range));
                }
                (height - origin[k]) / dir[k]
            }
            LevelSet::Sphere { center, radius } => {
                let oc: Vec<f64> = origin.iter().zip(center).map(|(a, b)| a - b).collect();
                let a = dot(dir, dir);
                let b = dot(&oc, dir);
                let c = dot(&oc, &oc) - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return Err(Error::RayMiss(max_range));
                }
                let sq = disc.sqrt();
                // stable roots of a σ^2 + 2 b σ + c
                let q = -(b + b.signum() * sq);
                let (r1, r2) = if q != 0.0 { (q / a, c / q) } else { (0.0, 0.0) };
                let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
                if lo > 0.0 {
                    lo
                } else {
                    hi
                }
            }
        };
        if !(sigma > 0.0) || sigma > max_range {
            return Err(Error::RayMiss(max_range));
        }
        Ok(sigma)
    }

    /// Root of `ψ` along the ray by marching and bisection, independent of
    /// the closed forms.
    pub fn intersect_ray_marching(&self, origin: &[f64], dir: &[f64], max_range: f64, steps: usize) -> Result<f64> {
        let at = |s: f64| {
            let p: Vec<f64> = origin.iter().zip(dir).map(|(o, d)| o + s * d).collect();
            self.value(&p)
        };
        let f0 = at(0.0);
        let ds = max_range / steps as f64;
        let mut prev = 0.0;
        for k in 1..=steps {
            let s = k as f64 * ds;
            let fs = at(s);
            if fs == 0.0 {
                return Ok(s);
            }
            if fs.signum() != f0.signum() {
                let sign = fs.signum();
                let b = bisect_increasing(|z| sign * at(z), prev, s, 1e-15)?;
                return Ok(b.mid());
            }
            prev = s;
        }
        Err(Error::RayMiss(max_range))
    }
}
