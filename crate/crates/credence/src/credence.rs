//! The constrained generative model: marginal treatment probability, two
//! conditional VAEs, the four-term outcome loss, bootstrap-universe training,
//! and sampling of datasets with known potential outcomes.
//!
//! The X|Z VAE learns `P(X|Z)`; the Y|X,Z VAE learns the joint law of both
//! potential outcomes given `(X, Z)` under user-specified treatment-effect
//! (`f`) and confounding-bias (`g`) constraints weighted by the rigidness
//! parameters `alpha` and `beta`.

use std::collections::BTreeSet;

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constraints::{BiasSpec, EffectSpec};
use crate::error::{Error, Result};
use crate::nnet::{
    adam_step, kl_diag_gaussian_batch, reparameterize_batch, split_latent, AdamState, Mlp,
    MlpGrads,
};
use crate::seed::{stream_rng, stream_rng_indexed};
use crate::tabular::{
    destandardize, standardize, GeneratedSample, ObservationalSample, StandardizationStats,
};

fn default_alpha() -> f64 {
    0.0
}
fn default_latent_y() -> usize {
    2
}
fn default_hidden_width() -> usize {
    64
}
fn default_hidden_depth() -> usize {
    2
}
fn default_epochs() -> usize {
    500
}
fn default_batch_size() -> usize {
    128
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_bootstrap_replicates() -> usize {
    50
}
fn default_round_binary() -> bool {
    true
}

/// Training configuration. `f` and `g` are interpreted in original outcome
/// units; they are rescaled internally before entering the loss.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Effect rigidness (penalty weight on the `f` constraint).
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Bias rigidness (penalty weight on the `g` constraint).
    #[serde(default = "default_alpha")]
    pub beta: f64,
    #[serde(default = "EffectSpec::default")]
    pub effect_spec: EffectSpec,
    #[serde(default = "BiasSpec::default")]
    pub bias_spec: BiasSpec,
    /// Latent dimension of the X|Z VAE; defaults to `max(2, p)`. A smaller
    /// latent confines generated covariates to a lower-dimensional manifold
    /// and distorts their correlation structure.
    #[serde(default)]
    pub latent_dim_x: Option<usize>,
    #[serde(default = "default_latent_y")]
    pub latent_dim_y: usize,
    #[serde(default = "default_hidden_width")]
    pub hidden_width: usize,
    #[serde(default = "default_hidden_depth")]
    pub hidden_depth: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Number of distinct bootstrap replicates cycled over epochs.
    #[serde(default = "default_bootstrap_replicates")]
    pub bootstrap_replicates: usize,
    /// Threshold binary-flagged covariates at 0.5 when generating.
    #[serde(default = "default_round_binary")]
    pub round_binary: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for EffectSpec {
    fn default() -> Self {
        EffectSpec::Zero
    }
}

impl Default for BiasSpec {
    fn default() -> Self {
        BiasSpec::Zero
    }
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            alpha: 0.0,
            beta: 0.0,
            effect_spec: EffectSpec::Zero,
            bias_spec: BiasSpec::Zero,
            latent_dim_x: None,
            latent_dim_y: default_latent_y(),
            hidden_width: default_hidden_width(),
            hidden_depth: default_hidden_depth(),
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            bootstrap_replicates: default_bootstrap_replicates(),
            round_binary: default_round_binary(),
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::config("rigidness parameters must be >= 0"));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.bootstrap_replicates == 0 {
            return Err(Error::config("epochs, batch_size and bootstrap_replicates must be >= 1"));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::config("learning rate must be > 0"));
        }
        if self.latent_dim_y == 0 || self.latent_dim_x == Some(0) {
            return Err(Error::config("latent dimensions must be >= 1"));
        }
        self.effect_spec.validate(p)?;
        self.bias_spec.validate(p)?;
        Ok(())
    }

    pub fn resolved_latent_dim_x(&self, p: usize) -> usize {
        self.latent_dim_x.unwrap_or_else(|| 2.max(p))
    }
}

/// Fitted generative model. Immutable after training; safe for concurrent
/// generation with distinct seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CredenceModel {
    pub p_z: f64,
    pub encoder_x: Mlp,
    pub decoder_x: Mlp,
    pub encoder_y: Mlp,
    pub decoder_y: Mlp,
    pub stats: StandardizationStats,
    pub config: TrainingConfig,
    pub p: usize,
    pub column_names: Vec<String>,
    pub binary_columns: BTreeSet<usize>,
}

/// Per-epoch loss components, logged by [`train`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub loss_x: f64,
    pub loss_y: f64,
    pub y_recon: f64,
    pub y_kl: f64,
    pub y_effect: f64,
    pub y_bias: f64,
}

/// Trained model plus its training history.
pub struct TrainOutcome {
    pub model: CredenceModel,
    pub history: Vec<EpochLoss>,
}

/// Sample proportion of treated units, the Bernoulli MLE of `P(Z=1)`.
pub fn estimate_pz(sample: &ObservationalSample) -> f64 {
    sample.z.sum() / sample.n() as f64
}

pub struct LossXParts {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

pub struct LossYParts {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
    pub effect: f64,
    pub bias: f64,
}

fn check_finite(v: f64, what: &str) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::numerical(format!("non-finite {what} during training")));
    }
    Ok(())
}

/// ELBO loss for the X|Z VAE on one batch:
/// mean over units of `||x - x'||_2^2 + KL`, with `x'` decoded from the
/// reparameterized latent draw and `z`. Returns loss parts and gradients for
/// encoder and decoder.
pub fn loss_x_given_z(
    encoder: &Mlp,
    decoder: &Mlp,
    x: &Array2<f64>,
    z: &Array1<f64>,
    noise: &Array2<f64>,
) -> Result<(LossXParts, MlpGrads, MlpGrads)> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::data("empty batch"));
    }
    let k = noise.ncols();
    let (encoded, enc_cache) = encoder.forward_cached(x)?;
    let (mu, log_var) = split_latent(&encoded);
    if mu.ncols() != k {
        return Err(Error::Dimension {
            expected: mu.ncols(),
            got: k,
            context: "noise width vs latent dim",
        });
    }
    let r = reparameterize_batch(&mu, &log_var, noise);
    let zcol = z.view().insert_axis(Axis(1)).to_owned();
    let dec_in = concatenate![Axis(1), r, zcol];
    let (x_prime, dec_cache) = decoder.forward_cached(&dec_in)?;

    let nf = n as f64;
    let resid = &x_prime - x;
    let recon = resid.iter().map(|v| v * v).sum::<f64>() / nf;
    let (kl, mut d_mu, mut d_log_var) = kl_diag_gaussian_batch(&mu, &log_var);
    let total = recon + kl;
    check_finite(total, "X|Z loss")?;

    // d/dx' of mean ||x - x'||^2
    let d_xp = resid.mapv(|v| 2.0 * v / nf);
    let (dec_grads, d_dec_in) = decoder.backward(&dec_cache, &d_xp)?;
    let d_r = d_dec_in.slice(s![.., ..k]);
    // through reparameterization: dr/dmu = 1, dr/dlogvar = 0.5*sigma*noise
    d_mu += &d_r;
    let sigma_noise = log_var.mapv(|lv| (0.5 * lv).exp()) * noise;
    d_log_var += &(&d_r * &sigma_noise.mapv(|v| 0.5 * v));
    let d_encoded = concatenate![Axis(1), d_mu, d_log_var];
    let (enc_grads, _) = encoder.backward(&enc_cache, &d_encoded)?;

    Ok((LossXParts { total, recon, kl }, enc_grads, dec_grads))
}

/// Per-row constraint targets in standardized outcome units.
pub struct ConstraintTargets {
    pub effect: Array1<f64>,
    pub bias: Array1<f64>,
}

/// Evaluates `f` and `g` at the original-unit covariates and rescales by
/// `y_scale` so the targets live in standardized outcome units.
pub fn constraint_targets(
    sample: &ObservationalSample,
    config: &TrainingConfig,
    y_scale: f64,
) -> Result<ConstraintTargets> {
    let n = sample.n();
    let mut effect = Array1::zeros(n);
    let mut bias = Array1::zeros(n);
    for i in 0..n {
        let row = sample.x.row(i);
        effect[i] = config.effect_spec.eval(row)? / y_scale;
        bias[i] = config.bias_spec.eval(row, sample.z[i])? / y_scale;
    }
    Ok(ConstraintTargets { effect, bias })
}

/// Four-term loss for the Y|X,Z VAE on one batch (all mean-over-batch):
///
/// 1. squared reconstruction residual of the observed arm,
/// 2. KL of the latent,
/// 3. `alpha * (y'(1) - y'(0) - f)^2`,
/// 4. `beta * (y'(1-z) - y''(1-z) - g)^2`,
///
/// where `(y'(1), y'(0))` decodes from `(R, x, z)` and `(y''(1), y''(0))`
/// from `(R, x, 1-z)` with the same latent draw `R`. Targets `f` and `g` are
/// already rescaled to standardized units.
#[allow(clippy::too_many_arguments)]
pub fn loss_y_given_xz(
    encoder: &Mlp,
    decoder: &Mlp,
    y: &Array1<f64>,
    x: &Array2<f64>,
    z: &Array1<f64>,
    noise: &Array2<f64>,
    alpha: f64,
    beta: f64,
    effect_target: &Array1<f64>,
    bias_target: &Array1<f64>,
) -> Result<(LossYParts, MlpGrads, MlpGrads)> {
    let n = y.len();
    if n == 0 {
        return Err(Error::data("empty batch"));
    }
    let k = noise.ncols();
    let ycol = y.view().insert_axis(Axis(1)).to_owned();
    let (encoded, enc_cache) = encoder.forward_cached(&ycol)?;
    let (mu, log_var) = split_latent(&encoded);
    let r = reparameterize_batch(&mu, &log_var, noise);
    let zcol = z.view().insert_axis(Axis(1)).to_owned();
    let zflip = zcol.mapv(|v| 1.0 - v);
    let dec_in1 = concatenate![Axis(1), r, x.clone(), zcol];
    let dec_in2 = concatenate![Axis(1), r, x.clone(), zflip];
    let (out1, cache1) = decoder.forward_cached(&dec_in1)?;
    let (out2, cache2) = decoder.forward_cached(&dec_in2)?;
    if out1.ncols() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: out1.ncols(),
            context: "Y decoder output width",
        });
    }

    let nf = n as f64;
    let y1p = out1.column(0);
    let y0p = out1.column(1);
    let y1pp = out2.column(0);
    let y0pp = out2.column(1);

    let mut recon = 0.0;
    let mut effect_term = 0.0;
    let mut bias_term = 0.0;
    let mut d_out1 = Array2::<f64>::zeros(out1.dim());
    let mut d_out2 = Array2::<f64>::zeros(out2.dim());
    for i in 0..n {
        let zi = z[i];
        // observed-arm reconstruction residual
        let u = y[i] - (zi * y1p[i] + (1.0 - zi) * y0p[i]);
        recon += u * u / nf;
        d_out1[[i, 0]] += -2.0 * zi * u / nf;
        d_out1[[i, 1]] += -2.0 * (1.0 - zi) * u / nf;
        // effect constraint on the first decoding
        let e = y1p[i] - y0p[i] - effect_target[i];
        effect_term += alpha * e * e / nf;
        d_out1[[i, 0]] += 2.0 * alpha * e / nf;
        d_out1[[i, 1]] += -2.0 * alpha * e / nf;
        // counterfactual-arm bias constraint across the two decodings
        let (col, a, b) = if zi == 1.0 {
            (1, y0p[i], y0pp[i]) // counterfactual arm is z=0
        } else {
            (0, y1p[i], y1pp[i])
        };
        let v = a - b - bias_target[i];
        bias_term += beta * v * v / nf;
        d_out1[[i, col]] += 2.0 * beta * v / nf;
        d_out2[[i, col]] += -2.0 * beta * v / nf;
    }
    let (kl, mut d_mu, mut d_log_var) = kl_diag_gaussian_batch(&mu, &log_var);
    let total = recon + kl + effect_term + bias_term;
    check_finite(total, "Y|X,Z loss")?;

    let (dec_grads1, d_dec_in1) = decoder.backward(&cache1, &d_out1)?;
    let (dec_grads2, d_dec_in2) = decoder.backward(&cache2, &d_out2)?;
    let mut dec_grads = dec_grads1;
    dec_grads.add(&dec_grads2);
    // both passes share the latent draw R
    let d_r = &d_dec_in1.slice(s![.., ..k]) + &d_dec_in2.slice(s![.., ..k]);
    d_mu += &d_r;
    let sigma_noise = log_var.mapv(|lv| (0.5 * lv).exp()) * noise;
    d_log_var += &(&d_r * &sigma_noise.mapv(|v| 0.5 * v));
    let d_encoded = concatenate![Axis(1), d_mu, d_log_var];
    let (enc_grads, _) = encoder.backward(&enc_cache, &d_encoded)?;

    Ok((
        LossYParts { total, recon, kl, effect: effect_term, bias: bias_term },
        enc_grads,
        dec_grads,
    ))
}

fn hidden_sizes(input: usize, width: usize, depth: usize, output: usize) -> Vec<usize> {
    let mut sizes = vec![input];
    sizes.extend(std::iter::repeat(width).take(depth));
    sizes.push(output);
    sizes
}

fn standard_normal_batch(rng: &mut impl Rng, n: usize, k: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, k), |_| StandardNormal.sample(rng))
}

/// Trains the two conditional VAEs on bootstrap replicates of the sample.
///
/// The data are standardized first; each epoch trains on one bootstrap
/// replicate, cycling through `bootstrap_replicates` distinct replicates.
/// Deterministic given `config.seed`.
pub fn train(sample: &ObservationalSample, config: &TrainingConfig) -> Result<TrainOutcome> {
    config.validate(sample.p())?;
    if sample.n_treated() == 0 || sample.n_control() == 0 {
        return Err(Error::EmptyArm("training requires both treatment arms"));
    }
    let p = sample.p();
    let seed = config.seed;
    let p_z = estimate_pz(sample);
    let (std_sample, stats) = standardize(sample)?;
    // targets are evaluated at ORIGINAL covariates, in standardized y units
    let targets = constraint_targets(sample, config, stats.y_scale)?;

    let kx = config.resolved_latent_dim_x(p);
    let ky = config.latent_dim_y;
    let (w, d) = (config.hidden_width, config.hidden_depth);
    let mut encoder_x = Mlp::new(&hidden_sizes(p, w, d, 2 * kx), &mut stream_rng(seed, "init-enc-x"));
    let mut decoder_x = Mlp::new(&hidden_sizes(kx + 1, w, d, p), &mut stream_rng(seed, "init-dec-x"));
    let mut encoder_y = Mlp::new(&hidden_sizes(1, w, d, 2 * ky), &mut stream_rng(seed, "init-enc-y"));
    let mut decoder_y = Mlp::new(&hidden_sizes(ky + p + 1, w, d, 2), &mut stream_rng(seed, "init-dec-y"));
    let mut adam_enc_x = AdamState::new(&encoder_x, config.learning_rate);
    let mut adam_dec_x = AdamState::new(&decoder_x, config.learning_rate);
    let mut adam_enc_y = AdamState::new(&encoder_y, config.learning_rate);
    let mut adam_dec_y = AdamState::new(&decoder_y, config.learning_rate);

    let n = sample.n();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let rep = (epoch % config.bootstrap_replicates) as u64;
        let mut rep_rng = stream_rng_indexed(seed, "train-bootstrap", rep);
        let mut idx: Vec<usize> = (0..n).map(|_| rep_rng.random_range(0..n)).collect();
        idx.shuffle(&mut stream_rng_indexed(seed, "train-shuffle", epoch as u64));
        let mut noise_rng = stream_rng_indexed(seed, "train-noise", epoch as u64);

        let mut sums = EpochLoss {
            epoch: epoch + 1,
            loss_x: 0.0,
            loss_y: 0.0,
            y_recon: 0.0,
            y_kl: 0.0,
            y_effect: 0.0,
            y_bias: 0.0,
        };
        for batch_idx in idx.chunks(config.batch_size) {
            let bn = batch_idx.len();
            let x = std_sample.x.select(Axis(0), batch_idx);
            let z = std_sample.z.select(Axis(0), batch_idx);
            let y = std_sample.y.select(Axis(0), batch_idx);
            let f_t = targets.effect.select(Axis(0), batch_idx);
            let g_t = targets.bias.select(Axis(0), batch_idx);

            let noise_x = standard_normal_batch(&mut noise_rng, bn, kx);
            let (parts_x, ge, gd) = loss_x_given_z(&encoder_x, &decoder_x, &x, &z, &noise_x)
                .map_err(|e| Error::numerical(format!("epoch {}: {e}", epoch + 1)))?;
            adam_step(&mut adam_enc_x, &mut encoder_x, &ge)?;
            adam_step(&mut adam_dec_x, &mut decoder_x, &gd)?;

            let noise_y = standard_normal_batch(&mut noise_rng, bn, ky);
            let (parts_y, ge, gd) = loss_y_given_xz(
                &encoder_y, &decoder_y, &y, &x, &z, &noise_y, config.alpha, config.beta, &f_t,
                &g_t,
            )
            .map_err(|e| Error::numerical(format!("epoch {}: {e}", epoch + 1)))?;
            adam_step(&mut adam_enc_y, &mut encoder_y, &ge)?;
            adam_step(&mut adam_dec_y, &mut decoder_y, &gd)?;

            let wgt = bn as f64 / n as f64;
            sums.loss_x += parts_x.total * wgt;
            sums.loss_y += parts_y.total * wgt;
            sums.y_recon += parts_y.recon * wgt;
            sums.y_kl += parts_y.kl * wgt;
            sums.y_effect += parts_y.effect * wgt;
            sums.y_bias += parts_y.bias * wgt;
        }
        history.push(sums);
    }

    let model = CredenceModel {
        p_z,
        encoder_x,
        decoder_x,
        encoder_y,
        decoder_y,
        stats,
        config: config.clone(),
        p,
        column_names: sample.column_names.clone(),
        binary_columns: sample.binary_columns.clone(),
    };
    Ok(TrainOutcome { model, history })
}

/// Standard deviation of the observation model on the standardized scale.
/// The unit-coefficient squared reconstruction terms correspond to Gaussian
/// likelihoods with variance 1/2.
const OBS_NOISE_SD: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Samples `n` units from the fitted model: `z ~ Bernoulli(p_z)`, latent
/// draws standard normal, covariates and both potential outcomes decoded
/// with observation noise added, then destandardized. Deterministic given
/// seed.
pub fn generate(model: &CredenceModel, n: usize, seed: u64) -> Result<GeneratedSample> {
    if n == 0 {
        return Err(Error::data("n must be >= 1"));
    }
    let kx = model.config.resolved_latent_dim_x(model.p);
    let ky = model.config.latent_dim_y;
    let mut rng = stream_rng(seed, "generate");
    let z = Array1::from_shape_fn(n, |_| {
        if rng.random::<f64>() < model.p_z { 1.0 } else { 0.0 }
    });
    let r_x = standard_normal_batch(&mut rng, n, kx);
    let r_y = standard_normal_batch(&mut rng, n, ky);
    let zcol = z.view().insert_axis(Axis(1)).to_owned();
    let mut x_std = model.decoder_x.forward(&concatenate![Axis(1), r_x, zcol])?;
    x_std += &(standard_normal_batch(&mut rng, n, model.p) * OBS_NOISE_SD);
    let y_out = model
        .decoder_y
        .forward(&concatenate![Axis(1), r_y, x_std.clone(), zcol])?;
    let y_noise = standard_normal_batch(&mut rng, n, 2);
    let y1 = &y_out.column(0) + &(&y_noise.column(0) * OBS_NOISE_SD);
    let y0 = &y_out.column(1) + &(&y_noise.column(1) * OBS_NOISE_SD);
    let standardized = GeneratedSample::new(
        x_std,
        z,
        y0,
        y1,
        model.column_names.clone(),
        model.binary_columns.clone(),
    )?;
    destandardize(&standardized, &model.stats, model.config.round_binary)
}

/// Exact true ATE of a generated sample: `mean(y1 - y0)`.
pub fn true_ate(generated: &GeneratedSample) -> f64 {
    (&generated.y1 - &generated.y0).mean().unwrap()
}
