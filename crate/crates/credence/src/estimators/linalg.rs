//! Small dense symmetric solves used by the base learners.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Solves `A x = b` for symmetric positive-definite `A` via Cholesky.
pub fn solve_spd(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let p = a.nrows();
    if a.ncols() != p || b.len() != p {
        return Err(Error::Dimension {
            expected: p,
            got: b.len(),
            context: "solve_spd shapes",
        });
    }
    let mut l = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d <= 1e-12 {
            return Err(Error::numerical(
                "singular system in normal equations; use a positive ridge penalty",
            ));
        }
        l[[j, j]] = d.sqrt();
        for i in (j + 1)..p {
            let mut v = a[[i, j]];
            for k in 0..j {
                v -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = v / l[[j, j]];
        }
    }
    // forward then backward substitution
    let mut y = Array1::<f64>::zeros(p);
    for i in 0..p {
        let mut v = b[i];
        for k in 0..i {
            v -= l[[i, k]] * y[k];
        }
        y[i] = v / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(p);
    for i in (0..p).rev() {
        let mut v = y[i];
        for k in (i + 1)..p {
            v -= l[[k, i]] * x[k];
        }
        x[i] = v / l[[i, i]];
    }
    Ok(x)
}
