//! Minimal differentiable-network core: multilayer perceptrons with
//! hand-derived reverse-mode gradients, diagonal-Gaussian latent heads,
//! reparameterized sampling, the closed-form KL term, and Adam.
//!
//! Everything operates on `f64` batches (rows are units). No external
//! autodiff; each operation returns exact gradients alongside its value.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(&self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Identity => v,
        }
    }

    /// Derivative expressed through the activated value `a = act(s)`.
    fn derivative_from_output(&self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

/// One affine layer: `a = act(input @ W^T + b)`, weight is `out x in`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

/// MLP parameters: tanh hidden layers, linear output layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Per-layer parameter gradients, shaped like [`Mlp`].
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

/// Activations recorded during a forward pass, consumed by `backward`.
pub struct ForwardCache {
    /// `outputs[0]` is the input batch; `outputs[l+1]` is layer `l`'s output.
    outputs: Vec<Array2<f64>>,
}

impl Mlp {
    /// Glorot-uniform weights (`±sqrt(6/(fan_in+fan_out))`), zero biases.
    /// Hidden layers use tanh; the final layer is linear.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weight = Array2::from_shape_fn((fan_out, fan_in), |_| {
                    rng.random_range(-bound..bound)
                });
                let activation = if l + 2 == sizes.len() {
                    Activation::Identity
                } else {
                    Activation::Tanh
                };
                Layer { weight, bias: Array1::zeros(fan_out), activation }
            })
            .collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.nrows()
    }

    /// Batched forward pass; input rows are units.
    pub fn forward(&self, input: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(input)?.0)
    }

    pub fn forward_cached(&self, input: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        if input.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: input.ncols(),
                context: "mlp input width",
            });
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite mlp input"));
        }
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(input.clone());
        for layer in &self.layers {
            let prev = outputs.last().unwrap();
            let mut a = prev.dot(&layer.weight.t());
            a += &layer.bias;
            a.mapv_inplace(|v| layer.activation.apply(v));
            outputs.push(a);
        }
        Ok((outputs.last().unwrap().clone(), ForwardCache { outputs }))
    }

    /// Reverse-mode gradients of the forward map. Returns parameter gradients
    /// and the gradient with respect to the input batch.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_gradient: &Array2<f64>,
    ) -> Result<(MlpGrads, Array2<f64>)> {
        if output_gradient.dim() != cache.outputs.last().unwrap().dim() {
            return Err(Error::Dimension {
                expected: cache.outputs.last().unwrap().ncols(),
                got: output_gradient.ncols(),
                context: "mlp output gradient shape",
            });
        }
        let mut grads: Vec<(Array2<f64>, Array1<f64>)> = self
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.weight.dim()), Array1::zeros(l.bias.dim())))
            .collect();
        let mut upstream = output_gradient.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let a = &cache.outputs[l + 1];
            // ds = da * act'(s), with act' expressed via the output
            let ds = {
                let mut ds = upstream;
                ds.zip_mut_with(a, |g, &av| {
                    *g *= layer.activation.derivative_from_output(av)
                });
                ds
            };
            let prev = &cache.outputs[l];
            grads[l].0 = ds.t().dot(prev);
            grads[l].1 = ds.sum_axis(Axis(0));
            upstream = ds.dot(&layer.weight);
        }
        Ok((MlpGrads { layers: grads }, upstream))
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weight.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite())
        })
    }
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        MlpGrads {
            layers: mlp
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weight.dim()), Array1::zeros(l.bias.dim())))
                .collect(),
        }
    }

    pub fn add(&mut self, other: &MlpGrads) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(other.layers.iter()) {
            *w += ow;
            *b += ob;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|(w, b)| {
            w.iter().all(|v| v.is_finite()) && b.iter().all(|v| v.is_finite())
        })
    }
}

/// Diagonal Gaussian in latent space, variance kept in log space.
#[derive(Debug, Clone)]
pub struct GaussianLatent {
    pub mu: Array1<f64>,
    pub log_var: Array1<f64>,
}

/// Closed-form KL(N(mu, diag(exp(log_var))) || N(0, I)):
/// `0.5 * sum(mu^2 + exp(log_var) - log_var - 1)`.
///
/// Returns the value and gradients with respect to `mu` and `log_var`.
pub fn kl_diag_gaussian(latent: &GaussianLatent) -> (f64, Array1<f64>, Array1<f64>) {
    let var = latent.log_var.mapv(f64::exp);
    let value = 0.5
        * latent
            .mu
            .iter()
            .zip(latent.log_var.iter().zip(var.iter()))
            .map(|(&m, (&lv, &v))| m * m + v - lv - 1.0)
            .sum::<f64>();
    let d_mu = latent.mu.clone();
    let d_log_var = var.mapv(|v| 0.5 * (v - 1.0));
    (value, d_mu, d_log_var)
}

/// Batched KL with mean-over-batch reduction. `mu` and `log_var` are `n x k`;
/// gradients are of the mean.
pub fn kl_diag_gaussian_batch(
    mu: &Array2<f64>,
    log_var: &Array2<f64>,
) -> (f64, Array2<f64>, Array2<f64>) {
    let n = mu.nrows() as f64;
    let var = log_var.mapv(f64::exp);
    let value = 0.5
        * mu.iter()
            .zip(log_var.iter().zip(var.iter()))
            .map(|(&m, (&lv, &v))| m * m + v - lv - 1.0)
            .sum::<f64>()
        / n;
    let d_mu = mu.mapv(|m| m / n);
    let d_log_var = var.mapv(|v| 0.5 * (v - 1.0) / n);
    (value, d_mu, d_log_var)
}

/// `mu + exp(0.5*log_var) ⊙ noise`.
pub fn reparameterize(latent: &GaussianLatent, noise: &Array1<f64>) -> Result<Array1<f64>> {
    if noise.len() != latent.mu.len() || latent.log_var.len() != latent.mu.len() {
        return Err(Error::Dimension {
            expected: latent.mu.len(),
            got: noise.len(),
            context: "reparameterize noise length",
        });
    }
    Ok(&latent.mu + &(latent.log_var.mapv(|lv| (0.5 * lv).exp()) * noise))
}

/// Batched reparameterization: `mu + exp(0.5*log_var) ⊙ noise`, all `n x k`.
pub fn reparameterize_batch(
    mu: &Array2<f64>,
    log_var: &Array2<f64>,
    noise: &Array2<f64>,
) -> Array2<f64> {
    mu + &(log_var.mapv(|lv| (0.5 * lv).exp()) * noise)
}

/// Splits an encoder output batch of width `2k` into `(mu, log_var)`.
pub fn split_latent(encoded: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let k = encoded.ncols() / 2;
    (
        encoded.slice(s![.., ..k]).to_owned(),
        encoded.slice(s![.., k..]).to_owned(),
    )
}

/// Adam optimizer state for one [`Mlp`].
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<(Array2<f64>, Array1<f64>)>,
    v: Vec<(Array2<f64>, Array1<f64>)>,
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(mlp: &Mlp, learning_rate: f64) -> Self {
        let zeros = |m: &Mlp| {
            m.layers
                .iter()
                .map(|l| (Array2::zeros(l.weight.dim()), Array1::zeros(l.bias.dim())))
                .collect::<Vec<_>>()
        };
        AdamState {
            m: zeros(mlp),
            v: zeros(mlp),
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update in place. Errors on non-finite gradients so
/// a diverging training run aborts with a diagnostic instead of poisoning the
/// parameters.
pub fn adam_step(state: &mut AdamState, params: &mut Mlp, grads: &MlpGrads) -> Result<()> {
    if !grads.all_finite() {
        return Err(Error::numerical("non-finite gradient in adam_step"));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    for (l, layer) in params.layers.iter_mut().enumerate() {
        let (gw, gb) = &grads.layers[l];
        let (mw, mb) = &mut state.m[l];
        let (vw, vb) = &mut state.v[l];
        mw.zip_mut_with(gw, |m, &g| *m = b1 * *m + (1.0 - b1) * g);
        mb.zip_mut_with(gb, |m, &g| *m = b1 * *m + (1.0 - b1) * g);
        vw.zip_mut_with(gw, |v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
        vb.zip_mut_with(gb, |v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
        for ((p, &m), &v) in layer.weight.iter_mut().zip(mw.iter()).zip(vw.iter()) {
            *p -= state.learning_rate * (m / bc1) / ((v / bc2).sqrt() + state.epsilon);
        }
        for ((p, &m), &v) in layer.bias.iter_mut().zip(mb.iter()).zip(vb.iter()) {
            *p -= state.learning_rate * (m / bc1) / ((v / bc2).sqrt() + state.epsilon);
        }
    }
    Ok(())
}
