//! Run configuration: one file describes the model, the integrator, and
//! the per-command sections. TOML or JSON, selected by extension.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use liftlab_core::catalog::{self, ModelSpec};
use liftlab_core::dynamics::{IntegratorConfig, Stencil};
use liftlab_core::models::{Connection, Lagrangian, Metric};
use liftlab_core::semispray::Semispray;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for every sampled point set in this run.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub geodesic: Option<GeodesicSection>,
    #[serde(default)]
    pub jacobi: Option<JacobiSection>,
    #[serde(default)]
    pub lift: Option<LiftSection>,
    #[serde(default)]
    pub check: Option<CheckSection>,
    #[serde(default)]
    pub output: Option<OutputSection>,
}

/// Exactly one model kind. Expressions use the coordinate names of the
/// object's level: x1..xn (and y1..yn for phase-dependent inputs).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// A compiled-in model by name.
    Builtin { name: String },
    /// Level-1 semispray with n coefficient expressions in x1..xn, y1..yn.
    Semispray { n: usize, coeffs: Vec<String> },
    /// Metric with n*n entry expressions in x1..xn, row-major.
    Metric { n: usize, entries: Vec<String> },
    /// Regular Lagrangian expression in x1..xn, y1..yn.
    Lagrangian { n: usize, source: String },
    /// Affine connection with n*n*n coefficient expressions in x1..xn.
    Connection { n: usize, gamma: Vec<String> },
}

impl ModelConfig {
    pub fn build(&self) -> liftlab_core::Result<ModelSpec> {
        match self {
            ModelConfig::Builtin { name } => catalog::builtin(name),
            ModelConfig::Semispray { n, coeffs } => {
                let refs: Vec<&str> = coeffs.iter().map(String::as_str).collect();
                Ok(ModelSpec::Semispray(Semispray::from_sources(1, *n, &refs)?))
            }
            ModelConfig::Metric { n, entries } => {
                let refs: Vec<&str> = entries.iter().map(String::as_str).collect();
                Ok(ModelSpec::Metric(Metric::from_sources(*n, &refs)?))
            }
            ModelConfig::Lagrangian { n, source } => {
                Ok(ModelSpec::Lagrangian(Lagrangian::from_source(*n, source)?))
            }
            ModelConfig::Connection { n, gamma } => {
                let refs: Vec<&str> = gamma.iter().map(String::as_str).collect();
                Ok(ModelSpec::Connection(Connection::from_sources(*n, &refs)?))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSection {
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
}

fn default_s_offset() -> f64 {
    1e-4
}

fn default_stencil() -> Stencil {
    Stencil::Central2
}

fn default_route_tol() -> f64 {
    1e-7
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JacobiSection {
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    pub j0: Vec<f64>,
    pub jdot0: Vec<f64>,
    /// Displacement for the variation route.
    #[serde(default = "default_s_offset")]
    pub s_offset: f64,
    #[serde(default = "default_stencil")]
    pub stencil: Stencil,
    /// Agreement tolerance for the `both` route.
    #[serde(default = "default_route_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftSection {
    /// Explicit evaluation points, coordinate lists at the lifted level.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    /// Number of seeded sample points, used when `points` is empty.
    #[serde(default)]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
    /// Expected fiber degree for the homogeneity check.
    #[serde(default)]
    pub degree: Option<f64>,
    /// Base vector field components (level-0 expressions in x1..xn).
    #[serde(default)]
    pub field: Option<Vec<String>>,
    /// Candidate conserved quantity (level-1 expression).
    #[serde(default)]
    pub function: Option<String>,
    /// Level-1 initial condition for the flow-pushforward check.
    #[serde(default)]
    pub xi: Option<Vec<f64>>,
    /// Flow time for the flow-pushforward check.
    #[serde(default)]
    pub t: Option<f64>,
    /// Second model for the projective check.
    #[serde(default)]
    pub other: Option<ModelConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub json: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let cfg: RunConfig = match ext {
            "toml" => toml::from_str(&text)
                .with_context(|| format!("parsing TOML config {}", path.display()))?,
            "json" => serde_json::from_str(&text)
                .with_context(|| format!("parsing JSON config {}", path.display()))?,
            other => bail!(
                "config {} has unsupported extension `{other}` (expected .toml or .json)",
                path.display()
            ),
        };
        Ok(cfg)
    }

    pub fn model(&self) -> Result<&ModelConfig> {
        self.model
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("config needs a [model] section"))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}
