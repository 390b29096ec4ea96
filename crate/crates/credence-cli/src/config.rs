//! Run configuration: a single JSON file with per-command sections;
//! command-line flags override file values.

use std::path::{Path, PathBuf};

use credence::credence::TrainingConfig;
use credence::dgp::{Dgp, QuadraticParams};
use credence::estimators::{EstimatorConfig, Method};
use credence::{Error, Result};
use serde::{Deserialize, Serialize};

fn default_treatment_col() -> String {
    "z".to_string()
}

fn default_outcome_col() -> String {
    "y".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    #[serde(default = "default_treatment_col")]
    pub treatment_col: String,
    #[serde(default = "default_outcome_col")]
    pub outcome_col: String,
    #[serde(default)]
    pub binary_columns: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSection {
    pub name: String,
    /// Quadratic-DGP parameter overrides; ignored for other generators.
    #[serde(default)]
    pub params: Option<QuadraticParams>,
}

impl DgpSection {
    pub fn build(&self) -> Result<Dgp> {
        match (self.name.as_str(), &self.params) {
            ("quadratic", Some(params)) => Ok(Dgp::Quadratic { params: params.clone() }),
            _ => credence::dgp::dgp_by_name(&self.name),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EstimatorsSection {
    /// Method ids; omitted means the full default suite.
    #[serde(default)]
    pub methods: Option<Vec<String>>,
    #[serde(default)]
    pub config: EstimatorConfig,
}

impl EstimatorsSection {
    pub fn resolve_methods(&self) -> Result<Vec<Method>> {
        match &self.methods {
            None => Ok(Method::default_suite()),
            Some(ids) => {
                if ids.is_empty() {
                    return Err(Error::config("estimators.methods must not be empty"));
                }
                ids.iter().map(|id| Method::parse(id)).collect()
            }
        }
    }
}

fn default_replicates() -> usize {
    50
}

fn default_benchmark_n() -> usize {
    2500
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSection {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_benchmark_n")]
    pub n: usize,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        BenchmarkSection { replicates: default_replicates(), n: default_benchmark_n() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: Option<DataSection>,
    #[serde(default)]
    pub credence: Option<TrainingConfig>,
    #[serde(default)]
    pub dgp: Option<DgpSection>,
    #[serde(default)]
    pub estimators: Option<EstimatorsSection>,
    #[serde(default)]
    pub benchmark: Option<BenchmarkSection>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("invalid run config {}: {e}", path.display())))?;
        if let Some(data) = &config.data {
            if !data.path.exists() {
                return Err(Error::FileNotFound(data.path.clone()));
            }
        }
        Ok(config)
    }
}
