//! ATE estimator suite with shared base learners (ridge regression, logistic
//! regression, gradient-boosted trees).

mod gbt;
mod linalg;
mod logistic;
mod ridge;
mod suite;

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::ObservationalSample;

pub use gbt::{fit_gbt, GbtConfig, GbtModel};
pub use logistic::{fit_logistic, sigmoid, LogisticModel};
pub use ridge::{fit_ridge, RidgeModel};
pub use suite::{
    aipw_ate, aipw_from_nuisances, diff_means, dml_ate, ipw_ate, ipw_ate_with_propensities,
    metalearner_ate, psm_ate, tmle_ate, MetaKind,
};

/// One estimator's output: point estimate, optional standard error, and
/// free-form numeric diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AteEstimate {
    pub method: String,
    pub ate: f64,
    pub se: Option<f64>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl AteEstimate {
    fn new(method: &str, ate: f64, se: Option<f64>) -> Self {
        AteEstimate {
            method: method.to_string(),
            ate,
            se,
            diagnostics: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseLearner {
    Ridge,
    Gbt,
}

fn default_ridge_lambda() -> f64 {
    1.0
}
fn default_folds() -> usize {
    2
}
fn default_clip() -> f64 {
    0.01
}
fn default_propensity_ridge() -> f64 {
    1e-6
}
fn default_base_learner() -> BaseLearner {
    BaseLearner::Gbt
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Base learner for methods that do not pin one in their name.
    #[serde(default = "default_base_learner")]
    pub base_learner: BaseLearner,
    /// Ridge penalty, applied on internally scale-standardized features.
    #[serde(default = "default_ridge_lambda")]
    pub ridge_lambda: f64,
    #[serde(default)]
    pub gbt: GbtConfig,
    /// Cross-fitting folds for DML.
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Propensity clip bound: fitted propensities are clamped to
    /// `[clip, 1 - clip]`.
    #[serde(default = "default_clip")]
    pub clip: f64,
    /// L2 penalty for the logistic propensity model.
    #[serde(default = "default_propensity_ridge")]
    pub propensity_ridge: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            base_learner: default_base_learner(),
            ridge_lambda: default_ridge_lambda(),
            gbt: GbtConfig::default(),
            folds: default_folds(),
            clip: default_clip(),
            propensity_ridge: default_propensity_ridge(),
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ridge_lambda < 0.0 {
            return Err(Error::config("ridge penalty must be >= 0"));
        }
        if self.gbt.n_trees == 0 {
            return Err(Error::config("gbt needs at least one tree"));
        }
        if !(self.clip > 0.0 && self.clip < 0.5) {
            return Err(Error::config("clip bound must be in (0, 0.5)"));
        }
        if self.folds < 2 {
            return Err(Error::config("cross-fitting needs at least 2 folds"));
        }
        Ok(())
    }
}

/// A fitted regression base learner.
pub(crate) enum Regressor {
    Ridge { model: RidgeModel, scales: Array1<f64> },
    Gbt(GbtModel),
}

impl Regressor {
    pub(crate) fn predict(&self, x: &Array2<f64>) -> Array1<f64> {
        match self {
            Regressor::Ridge { model, scales } => {
                let scaled = x / scales;
                model.predict(&scaled)
            }
            Regressor::Gbt(model) => model.predict(x),
        }
    }
}

/// Fits the configured base learner. Ridge features are scaled to unit sd
/// first so the penalty is comparable across covariates.
pub(crate) fn fit_regressor(
    kind: BaseLearner,
    x: &Array2<f64>,
    y: &Array1<f64>,
    config: &EstimatorConfig,
) -> Result<Regressor> {
    match kind {
        BaseLearner::Ridge => {
            let p = x.ncols();
            let n = x.nrows() as f64;
            let mut scales = Array1::ones(p);
            for j in 0..p {
                let col = x.column(j);
                let mean = col.mean().unwrap();
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                if var.sqrt() > 1e-12 {
                    scales[j] = var.sqrt();
                }
            }
            let scaled = x / &scales;
            let model = fit_ridge(&scaled, y, config.ridge_lambda)?;
            Ok(Regressor::Ridge { model, scales })
        }
        BaseLearner::Gbt => Ok(Regressor::Gbt(fit_gbt(x, y, &config.gbt)?)),
    }
}

fn require_both_arms(sample: &ObservationalSample) -> Result<()> {
    if sample.n_treated() == 0 {
        return Err(Error::EmptyArm("no treated units"));
    }
    if sample.n_control() == 0 {
        return Err(Error::EmptyArm("no control units"));
    }
    Ok(())
}

/// Estimator identifiers accepted by the CLI and benchmark harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DiffMeans,
    Psm,
    Ipw,
    Aipw,
    SLearnerLinear,
    SLearnerGbt,
    TLearnerLinear,
    TLearnerGbt,
    XLearnerLinear,
    XLearnerGbt,
    DmlLinear,
    DmlGbt,
    Tmle,
}

impl Method {
    pub const ALL: [Method; 13] = [
        Method::DiffMeans,
        Method::Psm,
        Method::Ipw,
        Method::Aipw,
        Method::SLearnerLinear,
        Method::SLearnerGbt,
        Method::TLearnerLinear,
        Method::TLearnerGbt,
        Method::XLearnerLinear,
        Method::XLearnerGbt,
        Method::DmlLinear,
        Method::DmlGbt,
        Method::Tmle,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Method::DiffMeans => "diff_means",
            Method::Psm => "psm",
            Method::Ipw => "ipw",
            Method::Aipw => "aipw",
            Method::SLearnerLinear => "s_learner_linear",
            Method::SLearnerGbt => "s_learner_gbt",
            Method::TLearnerLinear => "t_learner_linear",
            Method::TLearnerGbt => "t_learner_gbt",
            Method::XLearnerLinear => "x_learner_linear",
            Method::XLearnerGbt => "x_learner_gbt",
            Method::DmlLinear => "dml_linear",
            Method::DmlGbt => "dml_gbt",
            Method::Tmle => "tmle",
        }
    }

    pub fn parse(id: &str) -> Result<Method> {
        Method::ALL
            .iter()
            .find(|m| m.id() == id)
            .copied()
            .ok_or_else(|| {
                let valid: Vec<&str> = Method::ALL.iter().map(|m| m.id()).collect();
                Error::config(format!(
                    "unknown method '{id}' (valid: {})",
                    valid.join(", ")
                ))
            })
    }

    /// The full default suite, in id order.
    pub fn default_suite() -> Vec<Method> {
        Method::ALL.to_vec()
    }

    pub fn estimate(
        &self,
        sample: &ObservationalSample,
        config: &EstimatorConfig,
    ) -> Result<AteEstimate> {
        config.validate()?;
        match self {
            Method::DiffMeans => diff_means(sample),
            Method::Psm => psm_ate(sample, config),
            Method::Ipw => ipw_ate(sample, config),
            Method::Aipw => aipw_ate(sample, config),
            Method::SLearnerLinear => {
                metalearner_ate(sample, MetaKind::S, BaseLearner::Ridge, config)
            }
            Method::SLearnerGbt => metalearner_ate(sample, MetaKind::S, BaseLearner::Gbt, config),
            Method::TLearnerLinear => {
                metalearner_ate(sample, MetaKind::T, BaseLearner::Ridge, config)
            }
            Method::TLearnerGbt => metalearner_ate(sample, MetaKind::T, BaseLearner::Gbt, config),
            Method::XLearnerLinear => {
                metalearner_ate(sample, MetaKind::X, BaseLearner::Ridge, config)
            }
            Method::XLearnerGbt => metalearner_ate(sample, MetaKind::X, BaseLearner::Gbt, config),
            Method::DmlLinear => dml_ate(sample, BaseLearner::Ridge, config),
            Method::DmlGbt => dml_ate(sample, BaseLearner::Gbt, config),
            Method::Tmle => tmle_ate(sample, config),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}
