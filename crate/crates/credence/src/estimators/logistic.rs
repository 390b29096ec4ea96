//! L2-regularized logistic regression fit by iteratively reweighted least
//! squares; used as the propensity model.

use ndarray::{Array1, Array2};

use super::linalg::solve_spd;
use crate::error::{Error, Result};

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub weights: Array1<f64>,
    pub intercept: f64,
}

impl LogisticModel {
    pub fn predict_proba(&self, x: &Array2<f64>) -> Array1<f64> {
        (x.dot(&self.weights) + self.intercept).mapv(sigmoid)
    }
}

/// Maximizes the penalized log-likelihood `ll - (lambda/2)*||w||^2`
/// (intercept unpenalized). Converged when the max coefficient change drops
/// below 1e-8; errors after 100 iterations (perfect-separation symptom).
pub fn fit_logistic(x: &Array2<f64>, z: &Array1<f64>, lambda: f64) -> Result<LogisticModel> {
    let n = x.nrows();
    if n == 0 || z.len() != n {
        return Err(Error::data("fit_logistic needs matching nonempty x and z"));
    }
    let n_pos = z.iter().filter(|&&v| v == 1.0).count();
    if n_pos == 0 || n_pos == n {
        return Err(Error::EmptyArm("logistic regression requires both classes"));
    }
    let p = x.ncols();
    // coefficients [intercept, w...]
    let mut coef = Array1::<f64>::zeros(p + 1);
    for iter in 0..100 {
        let eta = x.dot(&coef.slice(ndarray::s![1..]).to_owned()) + coef[0];
        let probs = eta.mapv(sigmoid);
        // Hessian X_aug' W X_aug + lambda*diag(0,1,..), gradient X_aug'(z-p) - lambda*[0;w]
        let mut h = Array2::<f64>::zeros((p + 1, p + 1));
        let mut g = Array1::<f64>::zeros(p + 1);
        for i in 0..n {
            let w = (probs[i] * (1.0 - probs[i])).max(1e-10);
            let r = z[i] - probs[i];
            g[0] += r;
            h[[0, 0]] += w;
            for a in 0..p {
                let xa = x[[i, a]];
                g[a + 1] += r * xa;
                h[[0, a + 1]] += w * xa;
                for b in a..p {
                    h[[a + 1, b + 1]] += w * xa * x[[i, b]];
                }
            }
        }
        for a in 0..p {
            h[[a + 1, 0]] = h[[0, a + 1]];
            for b in (a + 1)..p {
                h[[b + 1, a + 1]] = h[[a + 1, b + 1]];
            }
            h[[a + 1, a + 1]] += lambda;
            g[a + 1] -= lambda * coef[a + 1];
        }
        let step = solve_spd(&h, &g)
            .map_err(|_| Error::numerical(format!("IRLS hessian singular at iteration {iter}")))?;
        let max_change = step.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        coef += &step;
        if max_change < 1e-8 {
            return Ok(LogisticModel {
                weights: coef.slice(ndarray::s![1..]).to_owned(),
                intercept: coef[0],
            });
        }
    }
    Err(Error::numerical(
        "logistic regression failed to converge in 100 iterations (possible perfect separation)",
    ))
}
