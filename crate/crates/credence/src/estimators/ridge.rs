//! Ridge regression with unpenalized intercept, solved via normal equations.

use ndarray::{Array1, Array2, Axis};

use super::linalg::solve_spd;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct RidgeModel {
    pub weights: Array1<f64>,
    pub intercept: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: &Array2<f64>) -> Array1<f64> {
        x.dot(&self.weights) + self.intercept
    }
}

/// Minimizes `||y - Xw - b||^2 + lambda*||w||^2`. Centering covariates and
/// outcome leaves the intercept unpenalized.
pub fn fit_ridge(x: &Array2<f64>, y: &Array1<f64>, lambda: f64) -> Result<RidgeModel> {
    let n = x.nrows();
    if n == 0 || y.len() != n {
        return Err(Error::data("fit_ridge needs matching nonempty x and y"));
    }
    if lambda < 0.0 {
        return Err(Error::config("ridge penalty must be >= 0"));
    }
    let p = x.ncols();
    if p == 0 {
        return Ok(RidgeModel {
            weights: Array1::zeros(0),
            intercept: y.mean().unwrap(),
        });
    }
    let x_mean = x.mean_axis(Axis(0)).unwrap();
    let y_mean = y.mean().unwrap();
    let xc = x - &x_mean;
    let yc = y - y_mean;
    let mut a = xc.t().dot(&xc);
    for j in 0..p {
        a[[j, j]] += lambda;
    }
    let b = xc.t().dot(&yc);
    let weights = solve_spd(&a, &b)?;
    let intercept = y_mean - weights.dot(&x_mean);
    Ok(RidgeModel { weights, intercept })
}
