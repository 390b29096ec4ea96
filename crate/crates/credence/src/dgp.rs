//! Ground-truth synthetic data-generating processes (quadratic and
//! Friedman-style) plus Monte Carlo oracles for their true ATEs.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::stream_rng;
use crate::tabular::GeneratedSample;

fn expit(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Parameters of the quadratic DGP:
/// `X ~ N(mu, sigma)`, `Y(0) = beta'X + e0`, `Y(1) = Y(0)^2 + alpha'X + e1`,
/// `pi = expit(gamma * 1'X)`, `Z ~ Bernoulli(pi)` with `e0, e1 ~ N(0,1)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadraticParams {
    pub p: usize,
    pub mu: Vec<f64>,
    /// Covariance matrix, row-major `p x p`; must be symmetric PSD.
    pub sigma: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub alpha_vec: Vec<f64>,
    pub gamma: f64,
    /// Disables the treatment effect entirely: `Y(1) = Y(0)`.
    #[serde(default)]
    pub null_effect: bool,
}

impl Default for QuadraticParams {
    /// p=10, mu=0, sigma=I, beta=e1, alpha=0, gamma=0.1.
    fn default() -> Self {
        let p = 10;
        let mut beta = vec![0.0; p];
        beta[0] = 1.0;
        let sigma = (0..p)
            .map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        QuadraticParams {
            p,
            mu: vec![0.0; p],
            sigma,
            beta,
            alpha_vec: vec![0.0; p],
            gamma: 0.1,
            null_effect: false,
        }
    }
}

impl QuadraticParams {
    fn validate(&self) -> Result<()> {
        let p = self.p;
        if p == 0 {
            return Err(Error::config("quadratic dgp needs p >= 1"));
        }
        for (name, len) in [
            ("mu", self.mu.len()),
            ("beta", self.beta.len()),
            ("alpha_vec", self.alpha_vec.len()),
            ("sigma rows", self.sigma.len()),
        ] {
            if len != p {
                return Err(Error::config(format!("{name} must have length {p}, got {len}")));
            }
        }
        if self.sigma.iter().any(|r| r.len() != p) {
            return Err(Error::config("sigma must be square"));
        }
        for i in 0..p {
            for j in 0..p {
                if (self.sigma[i][j] - self.sigma[j][i]).abs() > 1e-10 {
                    return Err(Error::config("sigma must be symmetric"));
                }
            }
        }
        Ok(())
    }
}

/// Lower-triangular Cholesky factor of a symmetric PSD matrix.
/// Pivots below -1e-10 are rejected; small negatives are clamped to zero.
fn cholesky_psd(a: &[Vec<f64>]) -> Result<Array2<f64>> {
    let p = a.len();
    let mut l = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d < -1e-10 {
            return Err(Error::numerical("sigma is not positive semi-definite"));
        }
        let pivot = d.max(0.0).sqrt();
        l[[j, j]] = pivot;
        for i in (j + 1)..p {
            if pivot == 0.0 {
                continue;
            }
            let mut v = a[i][j];
            for k in 0..j {
                v -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = v / pivot;
        }
    }
    Ok(l)
}

fn covariate_names(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("x{i}")).collect()
}

/// Samples `n` units from the quadratic DGP. Deterministic given seed.
pub fn gen_quadratic(params: &QuadraticParams, n: usize, seed: u64) -> Result<GeneratedSample> {
    if n == 0 {
        return Err(Error::data("n must be >= 1"));
    }
    params.validate()?;
    let p = params.p;
    let chol = cholesky_psd(&params.sigma)?;
    let mut rng = stream_rng(seed, "dgp-quadratic");

    let mut x = Array2::<f64>::zeros((n, p));
    let mut y0 = Array1::<f64>::zeros(n);
    let mut y1 = Array1::<f64>::zeros(n);
    let mut z = Array1::<f64>::zeros(n);
    let mut raw = Array1::<f64>::zeros(p);
    for i in 0..n {
        for v in raw.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        for j in 0..p {
            let mut v = params.mu[j];
            for k in 0..=j {
                v += chol[[j, k]] * raw[k];
            }
            x[[i, j]] = v;
        }
        let bx: f64 = (0..p).map(|j| params.beta[j] * x[[i, j]]).sum();
        let ax: f64 = (0..p).map(|j| params.alpha_vec[j] * x[[i, j]]).sum();
        let e0: f64 = StandardNormal.sample(&mut rng);
        let e1: f64 = StandardNormal.sample(&mut rng);
        y0[i] = bx + e0;
        y1[i] = if params.null_effect { y0[i] } else { y0[i] * y0[i] + ax + e1 };
        let pi = expit(params.gamma * x.row(i).sum());
        z[i] = if rng.random::<f64>() < pi { 1.0 } else { 0.0 };
    }
    GeneratedSample::new(x, z, y0, y1, covariate_names(p), BTreeSet::new())
}

/// Friedman's DGP augmented with a treatment effect. Ten uniform(0,1)
/// covariates stored zero-indexed; the formula's 1-indexed `X_1..X_5` map to
/// columns 0..4, so selection (columns 0 and 1) and outcome share covariates
/// and selection is confounded with the outcome.
pub fn gen_friedman(n: usize, seed: u64) -> Result<GeneratedSample> {
    if n == 0 {
        return Err(Error::data("n must be >= 1"));
    }
    let p = 10;
    let mut rng = stream_rng(seed, "dgp-friedman");
    let mut x = Array2::<f64>::zeros((n, p));
    let mut y0 = Array1::<f64>::zeros(n);
    let mut y1 = Array1::<f64>::zeros(n);
    let mut z = Array1::<f64>::zeros(n);
    for i in 0..n {
        for j in 0..p {
            x[[i, j]] = rng.random::<f64>();
        }
        let eps: f64 = StandardNormal.sample(&mut rng);
        let angle = std::f64::consts::PI * x[[i, 0]] * x[[i, 1]];
        y0[i] = 10.0 * angle.sin()
            + 20.0 * (x[[i, 2]] - 0.5).powi(2)
            + 10.0 * x[[i, 3]]
            + 5.0 * x[[i, 4]]
            + eps;
        y1[i] = y0[i] + x[[i, 2]] * angle.cos();
        let pi = expit(x[[i, 0]] + x[[i, 1]] - 0.5);
        z[i] = if rng.random::<f64>() < pi { 1.0 } else { 0.0 };
    }
    GeneratedSample::new(x, z, y0, y1, covariate_names(p), BTreeSet::new())
}

/// DGP selector shared by the CLI and the benchmark harness.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Dgp {
    Quadratic {
        #[serde(default)]
        params: QuadraticParams,
    },
    Friedman,
}

impl Dgp {
    pub fn generate(&self, n: usize, seed: u64) -> Result<GeneratedSample> {
        match self {
            Dgp::Quadratic { params } => gen_quadratic(params, n, seed),
            Dgp::Friedman => gen_friedman(n, seed),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Dgp::Quadratic { .. } => "dgp:quadratic".to_string(),
            Dgp::Friedman => "dgp:friedman".to_string(),
        }
    }
}

/// Parses `quadratic` / `friedman` into a DGP with default parameters.
pub fn dgp_by_name(name: &str) -> Result<Dgp> {
    match name {
        "quadratic" => Ok(Dgp::Quadratic { params: QuadraticParams::default() }),
        "friedman" => Ok(Dgp::Friedman),
        other => Err(Error::config(format!(
            "unknown dgp '{other}' (expected 'quadratic' or 'friedman')"
        ))),
    }
}

/// Monte Carlo estimate of the named DGP's true ATE with its standard error.
pub fn oracle_ate(dgp: &Dgp, n_mc: usize, seed: u64) -> Result<(f64, f64)> {
    if n_mc < 10_000 {
        return Err(Error::config("oracle_ate needs n_mc >= 10^4"));
    }
    let sample = dgp.generate(n_mc, seed)?;
    let effects: Vec<f64> = sample
        .y1
        .iter()
        .zip(sample.y0.iter())
        .map(|(a, b)| a - b)
        .collect();
    let mean = effects.iter().sum::<f64>() / n_mc as f64;
    let var = effects.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_mc as f64 - 1.0);
    Ok((mean, (var / n_mc as f64).sqrt()))
}
