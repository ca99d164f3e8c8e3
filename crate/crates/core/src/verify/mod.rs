//! Seeded invariant suites over every module.
//!
//! Each suite draws its samples from a ChaCha8 stream derived from the
//! seed and reports one [`Check`] per invariant: the worst value observed
//! and the bound it must satisfy.

mod duality;
mod geometric;
mod instances;
mod operators;
mod reflect;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use duality::{brute_force_assignment, cell_boundary_nodes};
pub use instances::{random_plane_targets, random_problem, symmetric_pair};
pub use operators::{format_farfield, format_refinement, FARFIELD_CONSTANT_RADIUS, FARFIELD_RADII, JACOBIAN_STEP};
pub use reflect::{
    map_agreement, solution_checks, AgreementReport, SUITE_CELLS, SUITE_RESIDUAL_TOL, SUITE_TARGETS, VARIATION_BASIS,
    VARIATION_EPS,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    Within(f64, f64),
}

impl Bound {
    pub fn admits(&self, v: f64) -> bool {
        match *self {
            Bound::AtMost(b) => v <= b,
            Bound::AtLeast(b) => v >= b,
            Bound::Within(lo, hi) => v >= lo && v <= hi,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::AtMost(b) => write!(f, "<= {b:e}"),
            Bound::AtLeast(b) => write!(f, ">= {b}"),
            Bound::Within(lo, hi) => write!(f, "in [{lo}, {hi}]"),
        }
    }
}

/// One invariant: the worst observed value against its bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub observed: f64,
    pub bound: Bound,
    pub samples: usize,
    pub passed: bool,
}

impl Check {
    pub fn new(suite: &'static str, name: impl Into<String>, observed: f64, bound: Bound, samples: usize) -> Self {
        // NaN never passes
        let passed = bound.admits(observed);
        Self { suite, name: name.into(), observed, bound, samples, passed }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}/{}: observed {:.3e}, bound {} ({} samples)",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.observed,
            self.bound,
            self.samples
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
    /// Preformatted tables (rate tables, refinement tables).
    pub tables: Vec<String>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn extend(&mut self, other: SuiteReport) {
        self.checks.extend(other.checks);
        self.tables.extend(other.tables);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Geometry,
    Ellipsoid,
    Dual,
    Reflector,
    Ma,
    Farfield,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 7] = ["geometry", "ellipsoid", "dual", "reflector", "ma", "farfield", "all"];

    fn stream(self) -> u64 {
        self as u64
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "geometry" => Suite::Geometry,
            "ellipsoid" => Suite::Ellipsoid,
            "dual" => Suite::Dual,
            "reflector" => Suite::Reflector,
            "ma" => Suite::Ma,
            "farfield" => Suite::Farfield,
            "all" => Suite::All,
            other => {
                return Err(Error::InvalidParameter(format!("unknown suite '{other}' (known: {:?})", Self::NAMES)))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Size {
    Tiny,
    #[default]
    Small,
    Full,
}

impl Size {
    fn pick<T>(self, tiny: T, small: T, full: T) -> T {
        match self {
            Size::Tiny => tiny,
            Size::Small => small,
            Size::Full => full,
        }
    }
}

impl FromStr for Size {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tiny" => Ok(Size::Tiny),
            "small" => Ok(Size::Small),
            "full" => Ok(Size::Full),
            other => Err(Error::InvalidParameter(format!("unknown size '{other}' (known: tiny, small, full)"))),
        }
    }
}

fn rng_for(suite: Suite, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(suite.stream());
    rng
}

/// Runs `suite` (every suite for [`Suite::All`]).
pub fn run_suite(suite: Suite, seed: u64, size: Size) -> Result<SuiteReport> {
    let mut rng = rng_for(suite, seed);
    match suite {
        Suite::Geometry => geometric::geometry_suite(&mut rng, size),
        Suite::Ellipsoid => geometric::ellipsoid_suite(&mut rng, size),
        Suite::Dual => duality::dual_suite(&mut rng, size),
        Suite::Reflector => reflect::reflector_suite(seed, size),
        Suite::Ma => operators::ma_suite(&mut rng, size),
        Suite::Farfield => operators::farfield_suite(&mut rng, size),
        Suite::All => {
            let mut out = SuiteReport::default();
            for s in [Suite::Geometry, Suite::Ellipsoid, Suite::Dual, Suite::Reflector, Suite::Ma, Suite::Farfield] {
                out.extend(run_suite(s, seed, size)?);
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        assert!(Bound::AtMost(1.0).admits(1.0));
        assert!(!Bound::AtMost(1.0).admits(f64::NAN));
        assert!(Bound::AtLeast(0.99).admits(0.995));
        assert!(!Bound::Within(5.0, 20.0).admits(4.0));
    }

    #[test]
    fn names_parse() {
        for n in Suite::NAMES {
            assert!(n.parse::<Suite>().is_ok());
        }
        assert!("optics".parse::<Suite>().is_err());
        assert!("huge".parse::<Size>().is_err());
    }

    #[test]
    fn empty_report_does_not_pass() {
        assert!(!SuiteReport::default().all_passed());
    }
}
