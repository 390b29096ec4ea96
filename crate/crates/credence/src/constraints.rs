//! User-specified treatment-effect function `f(x)` and confounding-bias
//! function `g(x, z)`, as a closed family of presets declared in the run
//! configuration. Custom functions are an extension point, not a config
//! option.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Treatment-effect function `f(x) = E[Y(1) - Y(0) | X = x]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffectSpec {
    Zero,
    Constant { value: f64 },
    Linear { weights: Vec<f64>, intercept: f64 },
    /// `a*(1^T x)^2 + w^T x + b`
    Quadratic { scale: f64, weights: Vec<f64>, intercept: f64 },
    /// `x3 * cos(pi * x1 * x2)`, 1-indexed over the first three covariates.
    FriedmanCosine,
}

/// Confounding-bias function
/// `g(x, z) = E[Y(z)|X=x,Z=z] - E[Y(z)|X=x,Z=1-z]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BiasSpec {
    Zero,
    /// `kappa * (2z - 1)`
    TreatmentStep { kappa: f64 },
    Linear { weights: Vec<f64>, intercept: f64 },
}

fn check_dim(len: usize, p: usize, context: &'static str) -> Result<()> {
    if len != p {
        return Err(Error::Dimension { expected: len, got: p, context });
    }
    Ok(())
}

impl EffectSpec {
    /// Validates the spec against covariate dimension `p`.
    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            EffectSpec::Zero | EffectSpec::Constant { .. } => Ok(()),
            EffectSpec::Linear { weights, .. } => {
                check_dim(weights.len(), p, "effect linear weights")
            }
            EffectSpec::Quadratic { weights, .. } => {
                check_dim(weights.len(), p, "effect quadratic weights")
            }
            EffectSpec::FriedmanCosine => {
                if p < 3 {
                    Err(Error::config("friedman_cosine effect requires p >= 3"))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn eval(&self, x: ArrayView1<f64>) -> Result<f64> {
        self.validate(x.len())?;
        Ok(match self {
            EffectSpec::Zero => 0.0,
            EffectSpec::Constant { value } => *value,
            EffectSpec::Linear { weights, intercept } => {
                dot(weights, x) + intercept
            }
            EffectSpec::Quadratic { scale, weights, intercept } => {
                let s: f64 = x.sum();
                scale * s * s + dot(weights, x) + intercept
            }
            EffectSpec::FriedmanCosine => {
                x[2] * (std::f64::consts::PI * x[0] * x[1]).cos()
            }
        })
    }
}

impl BiasSpec {
    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            BiasSpec::Zero | BiasSpec::TreatmentStep { .. } => Ok(()),
            BiasSpec::Linear { weights, .. } => {
                check_dim(weights.len(), p, "bias linear weights")
            }
        }
    }

    pub fn eval(&self, x: ArrayView1<f64>, z: f64) -> Result<f64> {
        if z != 0.0 && z != 1.0 {
            return Err(Error::data(format!("treatment must be 0 or 1, got {z}")));
        }
        self.validate(x.len())?;
        Ok(match self {
            BiasSpec::Zero => 0.0,
            BiasSpec::TreatmentStep { kappa } => kappa * (2.0 * z - 1.0),
            BiasSpec::Linear { weights, intercept } => dot(weights, x) + intercept,
        })
    }
}

fn dot(w: &[f64], x: ArrayView1<f64>) -> f64 {
    w.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
}
