//! Near-field reflector design as nonlinear optimization.
//!
//! A point source at the origin illuminates a reflector `{X ρ(X)}` over a
//! set of directions on the upper hemisphere; the reflector is built as the
//! envelope of confocal ellipsoids so that the reflected energy matches a
//! prescribed target distribution.

pub mod dual_core;
pub mod ellipsoid;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod mongeampere;
pub mod raytrace;
pub mod reflector;
pub mod roots;
pub mod solver;
pub mod vector;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::ChartPoint;
pub use vector::AmbientVector;
