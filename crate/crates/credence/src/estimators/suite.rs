//! The ATE estimators themselves: difference of means, propensity score
//! matching, IPW, AIPW, metalearners, DML, and TMLE.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;

use super::logistic::{fit_logistic, sigmoid};
use super::{fit_regressor, require_both_arms, AteEstimate, BaseLearner, EstimatorConfig};
use crate::error::{Error, Result};
use crate::seed::stream_rng;
use crate::tabular::ObservationalSample;

fn rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

fn elems(v: &Array1<f64>, idx: &[usize]) -> Array1<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

fn sample_var(v: &Array1<f64>) -> f64 {
    let n = v.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mean = v.mean().unwrap();
    v.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Clipped propensities from a ridge-penalized logistic fit, plus the
/// fraction of units the clip touched.
fn fitted_propensities(
    sample: &ObservationalSample,
    config: &EstimatorConfig,
) -> Result<(Array1<f64>, f64)> {
    let model = fit_logistic(&sample.x, &sample.z, config.propensity_ridge)?;
    let raw = model.predict_proba(&sample.x);
    Ok(clip_propensities(&raw, config.clip))
}

fn clip_propensities(raw: &Array1<f64>, clip: f64) -> (Array1<f64>, f64) {
    let mut clipped = 0usize;
    let e = raw.mapv(|v| {
        if v < clip || v > 1.0 - clip {
            clipped += 1;
            v.clamp(clip, 1.0 - clip)
        } else {
            v
        }
    });
    (e, clipped as f64 / raw.len() as f64)
}

/// Mean outcome difference between arms with the two-sample standard error
/// sqrt(s1^2/n1 + s0^2/n0).
pub fn diff_means(sample: &ObservationalSample) -> Result<AteEstimate> {
    require_both_arms(sample)?;
    let treated = sample.arm_indices(true);
    let control = sample.arm_indices(false);
    let y1 = elems(&sample.y, &treated);
    let y0 = elems(&sample.y, &control);
    let ate = y1.mean().unwrap() - y0.mean().unwrap();
    let se = (sample_var(&y1) / y1.len() as f64 + sample_var(&y0) / y0.len() as f64).sqrt();
    Ok(AteEstimate::new("diff_means", ate, Some(se)))
}

/// Propensity score matching: 1-nearest neighbor on the fitted propensity,
/// with replacement, imputing the missing potential outcome for every unit.
/// Distance ties go to the lowest row index in the opposite arm.
pub fn psm_ate(sample: &ObservationalSample, config: &EstimatorConfig) -> Result<AteEstimate> {
    require_both_arms(sample)?;
    let (e, clip_fraction) = fitted_propensities(sample, config)?;
    let spread = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - e.iter().cloned().fold(f64::INFINITY, f64::min);
    let degenerate = spread < 1e-12;

    let treated = sample.arm_indices(true);
    let control = sample.arm_indices(false);
    // sorted (propensity, row index) pools, index as secondary key so equal
    // propensities surface the lowest row first
    let mut pools: [Vec<(f64, usize)>; 2] = [Vec::new(), Vec::new()];
    for &i in &control {
        pools[0].push((e[i], i));
    }
    for &i in &treated {
        pools[1].push((e[i], i));
    }
    for pool in pools.iter_mut() {
        pool.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    }

    let match_in = |pool: &[(f64, usize)], target: f64| -> usize {
        let pos = pool.partition_point(|&(v, _)| v < target);
        let mut best: Option<(f64, usize)> = None;
        // candidates straddle the insertion point; scan outward while ties persist
        fn consider(best: &mut Option<(f64, usize)>, entry: (f64, usize), target: f64) {
            let d = (entry.0 - target).abs();
            match *best {
                None => *best = Some((d, entry.1)),
                Some((bd, bi)) => {
                    if d < bd || (d == bd && entry.1 < bi) {
                        *best = Some((d, entry.1));
                    }
                }
            }
        }
        let mut lo = pos;
        let mut hi = pos;
        while lo > 0 {
            lo -= 1;
            consider(&mut best, pool[lo], target);
            if (pool[lo].0 - target).abs() > best.unwrap().0 {
                break;
            }
        }
        while hi < pool.len() {
            consider(&mut best, pool[hi], target);
            if (pool[hi].0 - target).abs() > best.unwrap().0 {
                break;
            }
            hi += 1;
        }
        // ties at exactly the best distance can sit on both sides; sweep once
        // more over the tied band for the lowest row index
        let bd = best.unwrap().0;
        for &entry in pool {
            if (entry.0 - target).abs() == bd && entry.1 < best.unwrap().1 {
                best = Some((bd, entry.1));
            }
        }
        best.unwrap().1
    };

    let n = sample.n();
    let mut effects = 0.0;
    for i in 0..n {
        let opposite = if sample.z[i] == 1.0 { &pools[0] } else { &pools[1] };
        let j = match_in(opposite, e[i]);
        let (y1, y0) = if sample.z[i] == 1.0 {
            (sample.y[i], sample.y[j])
        } else {
            (sample.y[j], sample.y[i])
        };
        effects += y1 - y0;
    }
    let ate = effects / n as f64;
    Ok(AteEstimate::new("psm", ate, None)
        .with("clip_fraction", clip_fraction)
        .with("degenerate_propensity", if degenerate { 1.0 } else { 0.0 }))
}

/// Hájek IPW given already-clipped propensities. Split out so a known
/// propensity vector can be injected.
pub fn ipw_ate_with_propensities(
    sample: &ObservationalSample,
    e: &Array1<f64>,
) -> Result<AteEstimate> {
    require_both_arms(sample)?;
    let n = sample.n();
    let (mut num1, mut den1, mut num0, mut den0) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        if sample.z[i] == 1.0 {
            let w = 1.0 / e[i];
            num1 += w * sample.y[i];
            den1 += w;
        } else {
            let w = 1.0 / (1.0 - e[i]);
            num0 += w * sample.y[i];
            den0 += w;
        }
    }
    let mu1 = num1 / den1;
    let mu0 = num0 / den0;
    let ate = mu1 - mu0;
    // influence function of the Hajek contrast
    let mut var = 0.0;
    for i in 0..n {
        let psi = if sample.z[i] == 1.0 {
            (sample.y[i] - mu1) / e[i]
        } else {
            -(sample.y[i] - mu0) / (1.0 - e[i])
        };
        var += psi * psi;
    }
    let se = (var / (n as f64)).sqrt() / (n as f64).sqrt();
    Ok(AteEstimate::new("ipw", ate, Some(se)))
}

/// Self-normalized inverse probability weighting with a fitted, clipped
/// logistic propensity.
pub fn ipw_ate(sample: &ObservationalSample, config: &EstimatorConfig) -> Result<AteEstimate> {
    let (e, clip_fraction) = fitted_propensities(sample, config)?;
    let est = ipw_ate_with_propensities(sample, &e)?;
    Ok(est.with("clip_fraction", clip_fraction))
}

/// AIPW score given nuisance predictions; returns (ate, se, mean |psi|
/// unused). Exposed so tests can force specific nuisances.
pub fn aipw_from_nuisances(
    y: &Array1<f64>,
    z: &Array1<f64>,
    m1: &Array1<f64>,
    m0: &Array1<f64>,
    e: &Array1<f64>,
) -> (f64, f64) {
    let n = y.len();
    let mut psi = Array1::<f64>::zeros(n);
    for i in 0..n {
        psi[i] = m1[i] - m0[i] + z[i] * (y[i] - m1[i]) / e[i]
            - (1.0 - z[i]) * (y[i] - m0[i]) / (1.0 - e[i]);
    }
    let ate = psi.mean().unwrap();
    let se = (sample_var(&psi) / n as f64).sqrt();
    (ate, se)
}

/// Augmented IPW (doubly robust): outcome regressions per arm plus a clipped
/// propensity combined through the efficient score.
pub fn aipw_ate(sample: &ObservationalSample, config: &EstimatorConfig) -> Result<AteEstimate> {
    require_both_arms(sample)?;
    let treated = sample.arm_indices(true);
    let control = sample.arm_indices(false);
    let m1 = fit_regressor(
        config.base_learner,
        &rows(&sample.x, &treated),
        &elems(&sample.y, &treated),
        config,
    )?;
    let m0 = fit_regressor(
        config.base_learner,
        &rows(&sample.x, &control),
        &elems(&sample.y, &control),
        config,
    )?;
    let m1_hat = m1.predict(&sample.x);
    let m0_hat = m0.predict(&sample.x);
    let (e, clip_fraction) = fitted_propensities(sample, config)?;
    let (ate, se) = aipw_from_nuisances(&sample.y, &sample.z, &m1_hat, &m0_hat, &e);
    Ok(AteEstimate::new("aipw", ate, Some(se)).with("clip_fraction", clip_fraction))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetaKind {
    S,
    T,
    X,
}

impl MetaKind {
    fn label(&self, base: BaseLearner) -> String {
        let kind = match self {
            MetaKind::S => "s_learner",
            MetaKind::T => "t_learner",
            MetaKind::X => "x_learner",
        };
        let suffix = match base {
            BaseLearner::Ridge => "linear",
            BaseLearner::Gbt => "gbt",
        };
        format!("{kind}_{suffix}")
    }
}

/// S/T/X metalearners on the configured base learner. No analytic SE; use
/// the bootstrap in the evaluation module when one is needed.
pub fn metalearner_ate(
    sample: &ObservationalSample,
    kind: MetaKind,
    base: BaseLearner,
    config: &EstimatorConfig,
) -> Result<AteEstimate> {
    require_both_arms(sample)?;
    let label = kind.label(base);
    let n = sample.n();
    let treated = sample.arm_indices(true);
    let control = sample.arm_indices(false);
    match kind {
        MetaKind::S => {
            // one regression on (x, z); effect read off by toggling z
            let p = sample.p();
            let mut xz = Array2::<f64>::zeros((n, p + 1));
            xz.slice_mut(ndarray::s![.., ..p]).assign(&sample.x);
            xz.column_mut(p).assign(&sample.z);
            let model = fit_regressor(base, &xz, &sample.y, config)?;
            let mut x1 = xz.clone();
            x1.column_mut(p).fill(1.0);
            let mut x0 = xz;
            x0.column_mut(p).fill(0.0);
            let ate = model.predict(&x1).mean().unwrap() - model.predict(&x0).mean().unwrap();
            Ok(AteEstimate::new(&label, ate, None))
        }
        MetaKind::T => {
            let m1 = fit_regressor(base, &rows(&sample.x, &treated), &elems(&sample.y, &treated), config)?;
            let m0 = fit_regressor(base, &rows(&sample.x, &control), &elems(&sample.y, &control), config)?;
            let ate =
                m1.predict(&sample.x).mean().unwrap() - m0.predict(&sample.x).mean().unwrap();
            Ok(AteEstimate::new(&label, ate, None))
        }
        MetaKind::X => {
            let x1 = rows(&sample.x, &treated);
            let x0 = rows(&sample.x, &control);
            let m1 = fit_regressor(base, &x1, &elems(&sample.y, &treated), config)?;
            let m0 = fit_regressor(base, &x0, &elems(&sample.y, &control), config)?;
            // imputed individual effects, one regression per arm
            let d1 = &elems(&sample.y, &treated) - &m0.predict(&x1);
            let d0 = &m1.predict(&x0) - &elems(&sample.y, &control);
            let tau1 = fit_regressor(base, &x1, &d1, config)?;
            let tau0 = fit_regressor(base, &x0, &d0, config)?;
            let (e, _) = fitted_propensities(sample, config)?;
            let t1 = tau1.predict(&sample.x);
            let t0 = tau0.predict(&sample.x);
            // propensity-weighted blend: lean on the arm with more local data
            let mut acc = 0.0;
            for i in 0..n {
                acc += e[i] * t0[i] + (1.0 - e[i]) * t1[i];
            }
            Ok(AteEstimate::new(&label, acc / n as f64, None))
        }
    }
}

/// Partialling-out DML with K-fold cross-fitting: theta = sum(yr*zr) /
/// sum(zr^2) on out-of-fold residuals, sandwich SE.
pub fn dml_ate(
    sample: &ObservationalSample,
    base: BaseLearner,
    config: &EstimatorConfig,
) -> Result<AteEstimate> {
    require_both_arms(sample)?;
    let n = sample.n();
    let k = config.folds;
    if n < 2 * k {
        return Err(Error::data(format!("dml needs n >= 2K (n={n}, K={k})")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(config.seed, "dml-folds");
    order.shuffle(&mut rng);
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }

    let mut y_res = Array1::<f64>::zeros(n);
    let mut z_res = Array1::<f64>::zeros(n);
    for fold in 0..k {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
        let x_train = rows(&sample.x, &train);
        let m_hat = fit_regressor(base, &x_train, &elems(&sample.y, &train), config)?;
        let e_hat = fit_regressor(base, &x_train, &elems(&sample.z, &train), config)?;
        let x_test = rows(&sample.x, &test);
        let m_pred = m_hat.predict(&x_test);
        let e_pred = e_hat.predict(&x_test);
        for (pos, &i) in test.iter().enumerate() {
            y_res[i] = sample.y[i] - m_pred[pos];
            z_res[i] = sample.z[i] - e_pred[pos];
        }
    }

    let denom = z_res.dot(&z_res);
    if denom < 1e-10 {
        return Err(Error::numerical("no residual treatment variation"));
    }
    let theta = y_res.dot(&z_res) / denom;
    // sandwich: Var = sum(((yr - theta*zr)*zr)^2) / denom^2
    let mut var = 0.0;
    for i in 0..n {
        let s = (y_res[i] - theta * z_res[i]) * z_res[i];
        var += s * s;
    }
    let se = var.sqrt() / denom;
    let label = match base {
        BaseLearner::Ridge => "dml_linear",
        BaseLearner::Gbt => "dml_gbt",
    };
    Ok(AteEstimate::new(label, theta, Some(se)).with("residual_treatment_var", denom / n as f64))
}

/// Solves the one-dimensional fluctuation score sum(h*(y - expit(logit(q) +
/// eps*h))) = 0 by Newton's method. `q` is on the [0,1] scale.
fn solve_fluctuation(y: &Array1<f64>, q: &Array1<f64>, h: &Array1<f64>) -> Result<f64> {
    let logit_q: Array1<f64> = q.mapv(|v| (v / (1.0 - v)).ln());
    let mut eps = 0.0;
    for _ in 0..100 {
        let mut score = 0.0;
        let mut info = 0.0;
        for i in 0..y.len() {
            let p = sigmoid(logit_q[i] + eps * h[i]);
            score += h[i] * (y[i] - p);
            info += h[i] * h[i] * p * (1.0 - p);
        }
        if info < 1e-12 {
            return Err(Error::numerical("tmle fluctuation step is degenerate"));
        }
        let step = score / info;
        eps += step;
        if step.abs() < 1e-12 {
            return Ok(eps);
        }
    }
    Err(Error::numerical("tmle fluctuation failed to converge"))
}

/// TMLE on the min-max-rescaled outcome: initial base-learner fits, one joint
/// logistic fluctuation with clever covariate H = z/e - (1-z)/(1-e), EIC SE.
pub fn tmle_ate(sample: &ObservationalSample, config: &EstimatorConfig) -> Result<AteEstimate> {
    require_both_arms(sample)?;
    let n = sample.n();
    let y_min = sample.y.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = sample.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = y_max - y_min;
    if range < 1e-12 {
        // constant outcome: every effect is exactly zero
        return Ok(AteEstimate::new("tmle", 0.0, Some(0.0)));
    }
    let y_s = sample.y.mapv(|v| (v - y_min) / range);

    let treated = sample.arm_indices(true);
    let control = sample.arm_indices(false);
    let m1 = fit_regressor(config.base_learner, &rows(&sample.x, &treated), &elems(&y_s, &treated), config)?;
    let m0 = fit_regressor(config.base_learner, &rows(&sample.x, &control), &elems(&y_s, &control), config)?;
    // bound initial fits away from {0,1} so the logit is finite
    let q1 = m1.predict(&sample.x).mapv(|v| v.clamp(0.005, 0.995));
    let q0 = m0.predict(&sample.x).mapv(|v| v.clamp(0.005, 0.995));
    let (e, clip_fraction) = fitted_propensities(sample, config)?;

    let q_obs = Array1::from_shape_fn(n, |i| if sample.z[i] == 1.0 { q1[i] } else { q0[i] });
    let h_obs = Array1::from_shape_fn(n, |i| {
        if sample.z[i] == 1.0 { 1.0 / e[i] } else { -1.0 / (1.0 - e[i]) }
    });
    let eps = solve_fluctuation(&y_s, &q_obs, &h_obs)?;

    let q1_star = Array1::from_shape_fn(n, |i| {
        sigmoid((q1[i] / (1.0 - q1[i])).ln() + eps / e[i])
    });
    let q0_star = Array1::from_shape_fn(n, |i| {
        sigmoid((q0[i] / (1.0 - q0[i])).ln() - eps / (1.0 - e[i]))
    });
    let psi_s = (&q1_star - &q0_star).mean().unwrap();

    // efficient influence curve on the rescaled outcome
    let mut var = 0.0;
    for i in 0..n {
        let q_star_obs = if sample.z[i] == 1.0 { q1_star[i] } else { q0_star[i] };
        let d = h_obs[i] * (y_s[i] - q_star_obs) + q1_star[i] - q0_star[i] - psi_s;
        var += d * d;
    }
    let se = (var / (n as f64 - 1.0)).sqrt() / (n as f64).sqrt() * range;
    Ok(AteEstimate::new("tmle", psi_s * range, Some(se))
        .with("epsilon", eps)
        .with("clip_fraction", clip_fraction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Method;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn toy_sample(x: Array2<f64>, z: Array1<f64>, y: Array1<f64>) -> ObservationalSample {
        let names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        ObservationalSample::new(x, z, y, names, Default::default()).unwrap()
    }

    /// Confounded linear data: e = expit(x), y = ate*z + x + noise.
    fn linear_sample(n: usize, ate: f64, noise: f64, seed: u64) -> ObservationalSample {
        let mut rng = stream_rng(seed, "est-linear");
        let x = Array2::from_shape_fn((n, 1), |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let z = Array1::from_shape_fn(n, |i| {
            if rng.random_range(0.0..1.0) < sigmoid(x[[i, 0]]) { 1.0 } else { 0.0 }
        });
        let y = Array1::from_shape_fn(n, |i| {
            ate * z[i]
                + x[[i, 0]]
                + noise * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        toy_sample(x, z, y)
    }

    #[test]
    fn diff_means_arithmetic() {
        let s = toy_sample(
            array![[0.0], [0.0], [0.0], [0.0]],
            array![1.0, 1.0, 0.0, 0.0],
            array![1.0, 2.0, 3.0, 4.0],
        );
        let est = diff_means(&s).unwrap();
        assert_abs_diff_eq!(est.ate, -2.0, epsilon = 1e-12);
        // s1^2 = s0^2 = 0.5, n1 = n0 = 2
        assert_abs_diff_eq!(est.se.unwrap(), (0.25 + 0.25f64).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn diff_means_requires_both_arms() {
        let s = toy_sample(array![[0.0], [0.0]], array![1.0, 1.0], array![1.0, 2.0]);
        assert!(matches!(diff_means(&s), Err(Error::EmptyArm(_))));
    }

    #[test]
    fn psm_exact_pairs_recovers_pair_differences() {
        // every unit has an identical-x opposite-arm unit with the same y
        // within (x, arm); the unbalanced design gives a nonzero propensity
        // slope, so same-x matches are exact and cross-x distances positive
        let x = array![[0.0], [0.0], [0.0], [1.0], [1.0], [1.0]];
        let z = array![1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
        let y = array![1.0, 0.0, 0.0, 3.0, 3.0, 1.0];
        let s = toy_sample(x, z, y);
        let est = psm_ate(&s, &EstimatorConfig::default()).unwrap();
        // within-pair differences: 1 at x=0, 2 at x=1, unit-weighted mean 1.5
        assert_abs_diff_eq!(est.ate, 1.5, epsilon = 1e-9);
    }

    #[test]
    fn psm_flags_degenerate_propensity() {
        // x carries no signal, all fitted propensities identical
        let x = Array2::zeros((20, 1));
        let z = Array1::from_shape_fn(20, |i| if i < 10 { 1.0 } else { 0.0 });
        let y = Array1::from_shape_fn(20, |i| i as f64);
        let s = toy_sample(x, z, y);
        let est = psm_ate(&s, &EstimatorConfig::default()).unwrap();
        assert_eq!(est.diagnostics["degenerate_propensity"], 1.0);
        // all ties resolve to the lowest-index unit of the opposite arm:
        // treated impute y0 = y[10] = 10, controls impute y1 = y[0] = 0
        let expected = ((0..10).map(|i| i as f64 - 10.0).sum::<f64>()
            + (10..20).map(|i| 0.0 - i as f64).sum::<f64>())
            / 20.0;
        assert_abs_diff_eq!(est.ate, expected, epsilon = 1e-12);
    }

    #[test]
    fn ipw_constant_propensity_equals_diff_means() {
        let s = linear_sample(500, 2.0, 1.0, 7);
        let e = Array1::from_elem(s.n(), 0.3);
        let ipw = ipw_ate_with_propensities(&s, &e).unwrap();
        let dm = diff_means(&s).unwrap();
        assert_abs_diff_eq!(ipw.ate, dm.ate, epsilon = 1e-6);
    }

    #[test]
    fn ipw_records_full_clip_fraction() {
        // one extreme covariate drives fitted propensities outside [0.4, 0.6]
        // clip band, so with clip=0.49 everything is clipped
        let s = linear_sample(300, 1.0, 1.0, 8);
        let config = EstimatorConfig { clip: 0.499, ..Default::default() };
        let est = ipw_ate(&s, &config).unwrap();
        assert!(est.diagnostics["clip_fraction"] > 0.95, "{}", est.diagnostics["clip_fraction"]);
    }

    #[test]
    fn ipw_less_biased_than_diff_means_under_confounding() {
        let mut bias_ipw = 0.0;
        let mut bias_dm = 0.0;
        let reps = 20;
        for r in 0..reps {
            let s = linear_sample(2000, 2.0, 0.5, 100 + r);
            bias_ipw += ipw_ate(&s, &EstimatorConfig::default()).unwrap().ate - 2.0;
            bias_dm += diff_means(&s).unwrap().ate - 2.0;
        }
        assert!(
            (bias_ipw / reps as f64).abs() < (bias_dm / reps as f64).abs(),
            "ipw bias {} vs diff_means bias {}",
            bias_ipw / reps as f64,
            bias_dm / reps as f64
        );
    }

    #[test]
    fn aipw_zero_outcome_models_reduce_to_unnormalized_ipw() {
        let s = linear_sample(200, 1.5, 1.0, 9);
        let n = s.n();
        let zero = Array1::zeros(n);
        let e = Array1::from_shape_fn(n, |i| 0.2 + 0.5 * sigmoid(s.x[[i, 0]]));
        let (ate, _) = aipw_from_nuisances(&s.y, &s.z, &zero, &zero, &e);
        // unnormalized (Horvitz-Thompson) IPW, term by term
        let mut expected = 0.0;
        for i in 0..n {
            expected += s.z[i] * s.y[i] / e[i] - (1.0 - s.z[i]) * s.y[i] / (1.0 - e[i]);
        }
        expected /= n as f64;
        assert_abs_diff_eq!(ate, expected, epsilon = 1e-12);
    }

    #[test]
    fn aipw_recovers_linear_effect() {
        let s = linear_sample(5000, 2.0, 1.0, 11);
        let config = EstimatorConfig { base_learner: BaseLearner::Ridge, ..Default::default() };
        let est = aipw_ate(&s, &config).unwrap();
        let se = est.se.unwrap();
        assert!(
            (est.ate - 2.0).abs() < 3.0 * se,
            "ate {} se {se}",
            est.ate
        );
    }

    #[test]
    fn s_linear_exact_on_noiseless_linear_data() {
        let s = linear_sample(10_000, 2.0, 0.0, 13);
        let config = EstimatorConfig {
            base_learner: BaseLearner::Ridge,
            ridge_lambda: 1e-8,
            ..Default::default()
        };
        let est = metalearner_ate(&s, MetaKind::S, BaseLearner::Ridge, &config).unwrap();
        assert_abs_diff_eq!(est.ate, 2.0, epsilon = 1e-6);
        assert_eq!(est.method, "s_learner_linear");
    }

    #[test]
    fn metalearners_zero_on_constant_outcome() {
        let mut rng = stream_rng(14, "const");
        let x = Array2::from_shape_fn((120, 2), |_| rng.random_range(-1.0..1.0f64));
        let z = Array1::from_shape_fn(120, |i| if i % 2 == 0 { 1.0 } else { 0.0 });
        let y = Array1::from_elem(120, 5.0);
        let s = toy_sample(x, z, y);
        let config = EstimatorConfig::default();
        for kind in [MetaKind::S, MetaKind::T, MetaKind::X] {
            for base in [BaseLearner::Ridge, BaseLearner::Gbt] {
                let est = metalearner_ate(&s, kind, base, &config).unwrap();
                assert_abs_diff_eq!(est.ate, 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn dml_recovers_partially_linear_theta() {
        let mut rng = stream_rng(15, "dml");
        let n = 5000;
        let x = Array2::from_shape_fn((n, 1), |_| rng.random_range(-2.0..2.0f64));
        let z = Array1::from_shape_fn(n, |i| {
            if rng.random_range(0.0..1.0) < sigmoid(x[[i, 0]]) { 1.0 } else { 0.0 }
        });
        let y = Array1::from_shape_fn(n, |i| {
            3.0 * z[i]
                + x[[i, 0]].sin()
                + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let s = toy_sample(x, z, y);
        let est = dml_ate(&s, BaseLearner::Gbt, &EstimatorConfig::default()).unwrap();
        let se = est.se.unwrap();
        assert!((est.ate - 3.0).abs() < 3.0 * se, "theta {} se {se}", est.ate);
    }

    #[test]
    fn dml_errors_when_treatment_fully_predicted() {
        // the covariate equals the treatment, so the near-unpenalized ridge
        // nuisance predicts z exactly and no residual variation remains
        let n = 200;
        let z = Array1::from_shape_fn(n, |i| if i % 2 == 0 { 1.0 } else { 0.0 });
        let x = Array2::from_shape_fn((n, 1), |(i, _)| z[i]);
        let y = Array1::from_shape_fn(n, |i| z[i] + 0.1 * i as f64);
        let s = toy_sample(x, z, y);
        let config = EstimatorConfig { ridge_lambda: 1e-10, ..Default::default() };
        let err = dml_ate(&s, BaseLearner::Ridge, &config).unwrap_err();
        assert!(err.to_string().contains("no residual treatment variation"));
    }

    #[test]
    fn tmle_zero_fluctuation_fixed_point() {
        // saturated case: one binary covariate, outcome fits equal the exact
        // arm-by-x means, so the EIC equation already holds and eps = 0
        let y = array![0.2, 0.2, 0.8, 0.8, 0.3, 0.3, 0.6, 0.6];
        let q = array![0.2, 0.2, 0.8, 0.8, 0.3, 0.3, 0.6, 0.6];
        let h = array![2.0, 2.0, -2.0, -2.0, 2.0, 2.0, -2.0, -2.0];
        let eps = solve_fluctuation(&y, &q, &h).unwrap();
        assert_abs_diff_eq!(eps, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn tmle_null_sample_near_zero() {
        let s = linear_sample(2000, 0.0, 1.0, 17);
        let est = tmle_ate(&s, &EstimatorConfig::default()).unwrap();
        let se = est.se.unwrap();
        assert!(est.ate.abs() < 3.0 * se, "ate {} se {se}", est.ate);
    }

    #[test]
    fn tmle_recovers_linear_effect() {
        let s = linear_sample(5000, 2.0, 1.0, 18);
        let config = EstimatorConfig { base_learner: BaseLearner::Ridge, ..Default::default() };
        let est = tmle_ate(&s, &config).unwrap();
        let se = est.se.unwrap();
        assert!((est.ate - 2.0).abs() < 3.0 * se, "ate {} se {se}", est.ate);
    }

    #[test]
    fn tmle_constant_outcome_is_exactly_zero() {
        let x = Array2::zeros((20, 1));
        let z = Array1::from_shape_fn(20, |i| if i % 2 == 0 { 1.0 } else { 0.0 });
        let y = Array1::from_elem(20, 4.2);
        let s = toy_sample(x, z, y);
        let est = tmle_ate(&s, &EstimatorConfig::default()).unwrap();
        assert_eq!(est.ate, 0.0);
    }

    #[test]
    fn order_independent_estimators_are_permutation_invariant() {
        let s = linear_sample(400, 1.0, 1.0, 19);
        let n = s.n();
        let perm: Vec<usize> = (0..n).rev().collect();
        let sp = toy_sample(
            s.x.select(Axis(0), &perm),
            elems(&s.z, &perm),
            elems(&s.y, &perm),
        );
        let config = EstimatorConfig::default();
        let a = diff_means(&s).unwrap().ate;
        let b = diff_means(&sp).unwrap().ate;
        assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        let a = ipw_ate(&s, &config).unwrap().ate;
        let b = ipw_ate(&sp, &config).unwrap().ate;
        assert_abs_diff_eq!(a, b, epsilon = 1e-8);
    }

    #[test]
    fn method_registry_round_trips_and_estimates() {
        assert_eq!(Method::parse("dml_gbt").unwrap(), Method::DmlGbt);
        assert!(Method::parse("nope").is_err());
        assert_eq!(Method::default_suite().len(), 13);
        let s = linear_sample(300, 1.0, 1.0, 21);
        let config = EstimatorConfig {
            gbt: super::super::GbtConfig { n_trees: 20, ..Default::default() },
            ..Default::default()
        };
        for method in Method::default_suite() {
            let est = method.estimate(&s, &config).unwrap();
            assert_eq!(est.method, method.id());
            assert!(est.ate.is_finite(), "{method}");
            if let Some(se) = est.se {
                assert!(se >= 0.0);
            }
        }
    }
}
