//! Analytic radial functions with exact first and second chart derivatives.

use nalgebra::{DMatrix, DVector};

use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::geometry::ChartPoint;
use crate::reflector::LevelSet;
use crate::vector::AmbientVector;

/// `ρ`, `Dρ` and `D²ρ` at one chart point.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialJet {
    pub rho: f64,
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CatalogReflector {
    /// One ellipsoid: every ray goes to its focus.
    SingleEllipsoid(Ellipsoid),
    /// `ρ_E(x) exp(a|x|² + b x₁x₂ + c sin 2x₁)`; the `b` term needs `n >= 2`.
    BumpEnvelope { base: Ellipsoid, a: f64, b: f64, c: f64 },
    /// A sphere about the source.
    Constant(f64),
}

impl CatalogReflector {
    pub const IDS: [&'static str; 3] = ["single-ellipsoid", "bump-envelope", "constant"];

    /// Built-in instance for `id` in dimension `dim`.
    pub fn from_id(id: &str, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let focus = |shift: f64| {
            let mut f = vec![0.0; dim + 1];
            f[0] = shift;
            f[dim] = -5.0;
            AmbientVector::new(f)
        };
        match id {
            "single-ellipsoid" => Ok(Self::SingleEllipsoid(Ellipsoid::new(focus(0.0), 1.0)?)),
            "bump-envelope" => {
                Ok(Self::BumpEnvelope { base: Ellipsoid::new(focus(0.4), 1.0)?, a: 0.15, b: 0.1, c: 0.05 })
            }
            "constant" => Ok(Self::Constant(0.25)),
            other => {
                Err(Error::InvalidParameter(format!("unknown catalog reflector '{other}' (known: {:?})", Self::IDS)))
            }
        }
    }

    /// Target plane paired with the instance. The single ellipsoid gets the
    /// plane through its focus, where the reflection map collapses to a
    /// point; the others get a plane between reflector and focus, where it
    /// is regular.
    pub fn level_set(&self) -> LevelSet {
        match self {
            Self::SingleEllipsoid(e) => LevelSet::Plane { height: e.focus()[e.focus().len() - 1] },
            _ => LevelSet::Plane { height: -3.0 },
        }
    }

    pub fn eval(&self, x: &ChartPoint) -> Result<RadialJet> {
        let n = x.dim();
        match self {
            Self::Constant(r) => Ok(RadialJet { rho: *r, grad: vec![0.0; n], hess: DMatrix::zeros(n, n) }),
            Self::SingleEllipsoid(e) => {
                let (rho, g, h) = e.radial_derivatives(x)?;
                Ok(RadialJet { rho, grad: g.iter().copied().collect(), hess: h })
            }
            Self::BumpEnvelope { base, a, b, c } => {
                let (r0, g0, h0) = base.radial_derivatives(x)?;
                let xs = x.coords();
                let mut q = a * xs.iter().map(|v| v * v).sum::<f64>() + c * (2.0 * xs[0]).sin();
                let mut dq = DVector::from_fn(n, |k, _| 2.0 * a * xs[k]);
                dq[0] += 2.0 * c * (2.0 * xs[0]).cos();
                let mut d2q = DMatrix::from_diagonal_element(n, n, 2.0 * a);
                d2q[(0, 0)] -= 4.0 * c * (2.0 * xs[0]).sin();
                if n >= 2 {
                    q += b * xs[0] * xs[1];
                    dq[0] += b * xs[1];
                    dq[1] += b * xs[0];
                    d2q[(0, 1)] += b;
                    d2q[(1, 0)] += b;
                }
                let eq = q.exp();
                let rho = r0 * eq;
                let grad = (&g0 + &dq * r0) * eq;
                let hess =
                    (&h0 + &g0 * dq.transpose() + &dq * g0.transpose() + (&d2q + &dq * dq.transpose()) * r0) * eq;
                Ok(RadialJet { rho, grad: grad.iter().copied().collect(), hess })
            }
        }
    }
}
