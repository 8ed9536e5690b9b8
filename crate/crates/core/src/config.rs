//! JSON run configuration.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "example": "example1",
//!   "phi": { "kind": "constant", "value": [0.2, 0.15] },
//!   "horizon": 20.0,
//!   "step": 0.001,
//!   "seed": 7
//! }
//! ```
//!
//! Instead of `"example"` a config may give `"system"` with `orders`, a
//! field spec `f` and a list of `delays`, each `{ "field", "tau", "bound" }`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    builtin_example, example1_f, example1_g, example2_f, example2_g, BuiltinId, Delay, DelayTerm, InitialCondition,
    ModelError, Orders, SystemSpec, VectorField,
};
use crate::solver::SolverConfig;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 20_240_917;
pub const DEFAULT_SEARCH_BUDGET: usize = 20_000;
pub const DEFAULT_SAMPLES: usize = 500;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version {0} (expected {SCHEMA_VERSION})")]
    Schema(u32),
    #[error("config must name exactly one system source (\"example\" or \"system\")")]
    SystemSource,
    #[error("unknown field {0:?}")]
    UnknownField(String),
    #[error("config has no \"phi\"")]
    MissingPhi,
    #[error("invalid system: {0}")]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    /// One of `example1.f`, `example1.g`, `example2.f`, `example2.g`.
    Builtin { name: String },
    Linear { matrix: Vec<Vec<f64>> },
    HomogeneousLinear { matrix: Vec<Vec<f64>>, degree: f64 },
    Zero { dim: usize, degree: f64 },
    Identity { dim: usize },
}

impl FieldConfig {
    pub fn build(&self) -> Result<VectorField, ConfigError> {
        Ok(match self {
            FieldConfig::Builtin { name } => match name.as_str() {
                "example1.f" => example1_f(),
                "example1.g" => example1_g(),
                "example2.f" => example2_f(),
                "example2.g" => example2_g(),
                other => return Err(ConfigError::UnknownField(other.to_string())),
            },
            FieldConfig::Linear { matrix } => VectorField::linear("linear", matrix.clone())?,
            FieldConfig::HomogeneousLinear { matrix, degree } => {
                VectorField::homogeneous_linear("homogeneous_linear", matrix.clone(), *degree)?
            }
            FieldConfig::Zero { dim, degree } => VectorField::zero(*dim, *degree)?,
            FieldConfig::Identity { dim } => VectorField::identity(*dim)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayConfig {
    Constant { value: f64 },
    Sinusoid { mean: f64, amplitude: f64, omega: f64 },
    Example1,
    Example2,
}

impl DelayConfig {
    fn build(&self) -> Delay {
        match *self {
            DelayConfig::Constant { value } => Delay::Constant(value),
            DelayConfig::Sinusoid { mean, amplitude, omega } => Delay::Sinusoid { mean, amplitude, omega },
            DelayConfig::Example1 => Delay::Example1,
            DelayConfig::Example2 => Delay::Example2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayTermConfig {
    pub field: FieldConfig,
    pub tau: DelayConfig,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub orders: Vec<f64>,
    pub f: FieldConfig,
    #[serde(default)]
    pub delays: Vec<DelayTermConfig>,
}

impl SystemConfig {
    pub fn build(&self) -> Result<SystemSpec, ConfigError> {
        let orders = Orders::new(self.orders.clone())?;
        let f = self.f.build()?;
        let delays = self
            .delays
            .iter()
            .map(|d| Ok(DelayTerm::new(d.field.build()?, d.tau.build(), d.bound)?))
            .collect::<Result<Vec<_>, ConfigError>>()?;
        Ok(SystemSpec::new(orders, f, delays)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiConfig {
    Constant { value: Vec<f64> },
    /// Uniform samples over `[−r, 0]`, first row at `−r`.
    Samples { r: f64, values: Vec<Vec<f64>> },
}

impl PhiConfig {
    pub fn build(&self) -> Result<InitialCondition, ModelError> {
        match self {
            PhiConfig::Constant { value } => InitialCondition::constant(value.clone()),
            PhiConfig::Samples { r, values } => InitialCondition::samples(*r, values.clone()),
        }
    }
}

fn default_horizon() -> f64 {
    20.0
}

fn default_step() -> f64 {
    1e-3
}

fn default_iterations() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    #[serde(default)]
    pub example: Option<String>,
    #[serde(default)]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub phi: Option<PhiConfig>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_iterations")]
    pub corrector_iterations: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Candidate certificate vector tried before searching.
    #[serde(default)]
    pub v: Option<Vec<f64>>,
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub system: SystemSpec,
    pub phi: Option<InitialCondition>,
    pub solver: SolverConfig,
    pub seed: u64,
    pub candidate_v: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(ConfigError::Schema(cfg.schema));
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let system = match (&self.example, &self.system) {
            (Some(id), None) => builtin_example(id.parse::<BuiltinId>()?).system,
            (None, Some(sys)) => sys.build()?,
            _ => return Err(ConfigError::SystemSource),
        };
        let phi = match &self.phi {
            Some(p) => {
                let phi = p.build()?;
                if phi.dim() != system.dim() {
                    return Err(ModelError::DimensionMismatch { expected: system.dim(), got: phi.dim() }.into());
                }
                Some(phi)
            }
            None => None,
        };
        if let Some(v) = &self.v {
            if v.len() != system.dim() {
                return Err(ModelError::DimensionMismatch { expected: system.dim(), got: v.len() }.into());
            }
        }
        let solver = SolverConfig { step: self.step, horizon: self.horizon, corrector_iterations: self.corrector_iterations };
        Ok(Resolved {
            system,
            phi,
            solver,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            candidate_v: self.v.clone(),
        })
    }
}
