//! Problem configuration, JSON schema version 1.

use std::path::Path;

use serde::{Deserialize, Serialize};

use lumen::geometry::DEFAULT_CHART_LIMIT;
use lumen::grid::ChartGrid;
use lumen::reflector::{BalancePolicy, LevelSet, ReflectorProblem, TargetPoint, TargetSpec, BALANCE_TOLERANCE};
use lumen::solver::SolverParams;
use lumen::verify::random_plane_targets;
use lumen::AmbientVector;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Target positions with normalized weights.
type WeightedPoints = Vec<(AmbientVector, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub schema: u32,
    pub dimension: usize,
    pub source: SourceConfig,
    pub target: TargetConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub balance: Balance,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// Unit direction (n + 1 components) at the centre of the source cap.
    pub center: Vec<f64>,
    /// Angular radius of the cap in radians.
    pub angular_radius: f64,
    /// Grid cells per chart axis.
    pub cells: usize,
    #[serde(default = "default_chart_limit")]
    pub chart_limit: f64,
    #[serde(default)]
    pub density: Density,
}

fn default_chart_limit() -> f64 {
    DEFAULT_CHART_LIMIT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Density {
    #[default]
    Uniform,
    /// `exp(-|x - center|² / (2 sigma²))` in chart coordinates.
    Gaussian { center: Vec<f64>, sigma: f64 },
    /// One value per active grid node, in grid order.
    Table { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    Points {
        points: Vec<PointConfig>,
        #[serde(default)]
        level_set: Option<Surface>,
    },
    LevelSet {
        surface: Surface,
        samples: Samples,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub position: Vec<f64>,
    /// Fraction of the total flux; weights sum to one.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Surface {
    Plane { height: f64 },
    Sphere { center: Vec<f64>, radius: f64 },
}

impl Surface {
    fn level_set(&self) -> LevelSet {
        match self {
            Surface::Plane { height } => LevelSet::Plane { height: *height },
            Surface::Sphere { center, radius } => LevelSet::Sphere { center: center.clone(), radius: *radius },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Samples {
    Explicit {
        points: Vec<PointConfig>,
    },
    /// Seeded points in `[-spread, spread]²` on a plane, `n = 2` only.
    Random {
        count: usize,
        spread: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub residual_tol: f64,
    pub max_outer: usize,
    pub damping: f64,
    pub min_damping: f64,
    /// Normalization `min ρ = c0`.
    pub c0: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = SolverParams::default();
        Self {
            residual_tol: p.residual_tol,
            max_outer: p.max_outer,
            damping: p.damping,
            min_damping: p.min_damping,
            c0: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Balance {
    /// Weights must sum to one within the balance tolerance.
    #[default]
    Check,
    /// Weights are rescaled to unit total.
    Rescale,
}

fn field(name: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::input(format!("{name}: {msg}"))
}

impl ProblemConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::input(format!("{}: {}", path.display(), e.message)))
    }

    /// Parses and validates; serde diagnostics carry line and column.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::input(e.to_string()))?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(field("schema", format!("unsupported version {} (expected {SCHEMA_VERSION})", cfg.schema)));
        }
        Ok(cfg)
    }

    pub fn solver_params(&self) -> Result<SolverParams, CliError> {
        let s = &self.solver;
        let p = SolverParams {
            residual_tol: s.residual_tol,
            max_outer: s.max_outer,
            damping: s.damping,
            min_damping: s.min_damping,
            c0: None,
            ..SolverParams::default()
        };
        p.validate().map_err(|e| field("solver", e))?;
        Ok(p)
    }

    fn grid(&self) -> Result<ChartGrid, CliError> {
        let n = self.dimension;
        if !(1..=2).contains(&n) {
            return Err(field("dimension", format!("must be 1 or 2, got {n}")));
        }
        let s = &self.source;
        if s.center.len() != n + 1 {
            return Err(field("source.center", format!("needs {} components, got {}", n + 1, s.center.len())));
        }
        if !(s.angular_radius > 0.0 && s.angular_radius <= std::f64::consts::FRAC_PI_2) {
            return Err(field("source.angular_radius", format!("must lie in (0, π/2], got {}", s.angular_radius)));
        }
        if s.cells < 2 {
            return Err(field("source.cells", format!("must be at least 2, got {}", s.cells)));
        }
        if !(s.chart_limit > 0.0 && s.chart_limit < 1.0) {
            return Err(field("source.chart_limit", format!("must lie in (0, 1), got {}", s.chart_limit)));
        }
        ChartGrid::cap(n, s.cells, &s.center, s.angular_radius, s.chart_limit).map_err(|e| field("source", e))
    }

    fn density(&self, grid: &ChartGrid) -> Result<Vec<f64>, CliError> {
        match &self.source.density {
            Density::Uniform => Ok(vec![1.0; grid.len()]),
            Density::Gaussian { center, sigma } => {
                if center.len() != self.dimension {
                    return Err(field("source.density.center", format!("needs {} components", self.dimension)));
                }
                if !(*sigma > 0.0) {
                    return Err(field("source.density.sigma", "must be positive"));
                }
                Ok(grid
                    .points()
                    .iter()
                    .map(|p| {
                        let r2: f64 = p.coords().iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                        (-r2 / (2.0 * sigma * sigma)).exp()
                    })
                    .collect())
            }
            Density::Table { values } => {
                if values.len() != grid.len() {
                    return Err(field(
                        "source.density.values",
                        format!("expected {} values (one per active node), got {}", grid.len(), values.len()),
                    ));
                }
                Ok(values.clone())
            }
        }
    }

    /// Target points with weights summing to one, and the level set.
    fn targets(&self) -> Result<(WeightedPoints, Option<LevelSet>), CliError> {
        let n = self.dimension;
        let explicit = |pts: &[PointConfig], path: &str| -> Result<WeightedPoints, CliError> {
            if pts.is_empty() {
                return Err(field(path, "needs at least one point"));
            }
            pts.iter()
                .enumerate()
                .map(|(j, p)| {
                    if p.position.len() != n + 1 {
                        return Err(field(&format!("{path}[{j}].position"), format!("needs {} components", n + 1)));
                    }
                    if !(p.weight > 0.0) || !p.weight.is_finite() {
                        return Err(field(&format!("{path}[{j}].weight"), "must be positive"));
                    }
                    Ok((AmbientVector::new(p.position.clone()), p.weight))
                })
                .collect()
        };
        let (points, level_set, drawn) = match &self.target {
            TargetConfig::Points { points, level_set } => {
                (explicit(points, "target.points")?, level_set.as_ref().map(Surface::level_set), false)
            }
            TargetConfig::LevelSet { surface, samples } => match samples {
                Samples::Explicit { points } => {
                    (explicit(points, "target.samples.points")?, Some(surface.level_set()), false)
                }
                Samples::Random { count, spread } => {
                    let Surface::Plane { height } = surface else {
                        return Err(field("target.samples", "random samples need a plane surface"));
                    };
                    if n != 2 {
                        return Err(field("target.samples", "random samples need dimension 2"));
                    }
                    if *count == 0 || !(*spread > 0.0) {
                        return Err(field("target.samples", "count and spread must be positive"));
                    }
                    (random_plane_targets(*count, *height, *spread, self.seed), Some(surface.level_set()), true)
                }
            },
        };
        let total: f64 = points.iter().map(|p| p.1).sum();
        if !drawn && self.balance == Balance::Check && (total - 1.0).abs() > BALANCE_TOLERANCE {
            return Err(field(
                "target",
                format!("weights sum to {total}; they must sum to 1 within {BALANCE_TOLERANCE} (or set \"balance\": \"rescale\")"),
            ));
        }
        Ok((points.into_iter().map(|(y, w)| (y, w / total)).collect(), level_set))
    }

    pub fn build(&self) -> Result<ReflectorProblem, CliError> {
        let grid = self.grid()?;
        let f = self.density(&grid)?;
        if f.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(field("source.density", "values must be positive and finite"));
        }
        let flux: f64 = f.iter().zip(grid.weights()).map(|(a, w)| a * w).sum();
        let (points, level_set) = self.targets()?;
        let points = points.into_iter().map(|(y, w)| TargetPoint { y, g: w * flux }).collect();
        let target = TargetSpec::new(points, level_set).map_err(|e| field("target", e))?;
        if !(self.solver.c0 > 0.0) {
            return Err(field("solver.c0", "must be positive"));
        }
        ReflectorProblem::new(grid, f, target, self.solver.c0, BalancePolicy::Check).map_err(|e| field("problem", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema": 1,
        "dimension": 2,
        "source": { "center": [0, 0, 1], "angular_radius": 0.4, "cells": 16 },
        "target": { "kind": "points", "points": [ { "position": [0.5, 0.2, -4], "weight": 1.0 } ] }
    }"#;

    #[test]
    fn minimal_config_builds() {
        let cfg = ProblemConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.source.density, Density::Uniform);
        assert_eq!(cfg.balance, Balance::Check);
        let p = cfg.build().unwrap();
        assert_eq!(p.n_target(), 1);
        assert!(p.n_source() > 100);
    }

    #[test]
    fn unknown_field_is_named() {
        let text = MINIMAL.replace("\"cells\": 16", "\"cells\": 16, \"cels\": 3");
        let e = ProblemConfig::parse(&text).unwrap_err();
        assert!(e.message.contains("cels"), "{}", e.message);
        assert!(e.message.contains("line"), "{}", e.message);
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let e = ProblemConfig::parse(&MINIMAL.replace("\"schema\": 1", "\"schema\": 2")).unwrap_err();
        assert!(e.message.starts_with("schema:"));
    }

    #[test]
    fn unbalanced_weights_need_rescale() {
        let text = MINIMAL.replace("\"weight\": 1.0", "\"weight\": 3.0");
        let e = ProblemConfig::parse(&text).unwrap().build().unwrap_err();
        assert!(e.message.starts_with("target:"), "{}", e.message);
        let ok = text.replace("\"schema\": 1,", "\"schema\": 1, \"balance\": \"rescale\",");
        assert!(ProblemConfig::parse(&ok).unwrap().build().is_ok());
    }

    #[test]
    fn table_density_length_is_checked() {
        let text =
            MINIMAL.replace("\"cells\": 16", "\"cells\": 16, \"density\": { \"kind\": \"table\", \"values\": [1, 2] }");
        let e = ProblemConfig::parse(&text).unwrap().build().unwrap_err();
        assert!(e.message.starts_with("source.density.values"), "{}", e.message);
    }

    #[test]
    fn bad_position_names_the_index() {
        let text = MINIMAL.replace("[0.5, 0.2, -4]", "[0.5, -4]");
        let e = ProblemConfig::parse(&text).unwrap().build().unwrap_err();
        assert!(e.message.starts_with("target.points[0].position"), "{}", e.message);
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = ProblemConfig::parse(MINIMAL).unwrap();
        let again = ProblemConfig::parse(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
