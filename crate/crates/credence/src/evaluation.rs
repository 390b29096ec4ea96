//! Monte Carlo benchmarking, method ranking, rank agreement, bootstrap
//! uncertainty, and distributional goodness-of-fit diagnostics.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::credence::{generate, true_ate, CredenceModel};
use crate::dgp::Dgp;
use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, Method};
use crate::seed::derive_seed;
use crate::tabular::{bootstrap_resample, GeneratedSample, ObservationalSample};

/// Anything that can draw full potential-outcome samples: a synthetic DGP or
/// a trained generative model.
pub trait SampleGenerator {
    fn draw(&self, n: usize, seed: u64) -> Result<GeneratedSample>;
    fn describe(&self) -> String;
}

impl SampleGenerator for Dgp {
    fn draw(&self, n: usize, seed: u64) -> Result<GeneratedSample> {
        self.generate(n, seed)
    }

    fn describe(&self) -> String {
        Dgp::describe(self)
    }
}

impl SampleGenerator for CredenceModel {
    fn draw(&self, n: usize, seed: u64) -> Result<GeneratedSample> {
        generate(self, n, seed)
    }

    fn describe(&self) -> String {
        format!(
            "credence model (p={}, alpha={}, beta={})",
            self.p, self.config.alpha, self.config.beta
        )
    }
}

/// Per-method aggregate over benchmark replicates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: String,
    pub mean_bias: f64,
    pub sd: f64,
    pub rmse: f64,
    pub replicates: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub scores: Vec<MethodScore>,
    /// Mean of the per-replicate true ATEs.
    pub true_ate: f64,
    pub ranking_abs_bias: Vec<String>,
    pub ranking_rmse: Vec<String>,
    pub generator: String,
    pub seed: u64,
    /// Methods that failed on every replicate, excluded from scores.
    pub excluded: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankCriterion {
    AbsBias,
    Rmse,
}

/// Draws `r` full samples from `generator`, hands each estimator only the
/// observational view, and scores everyone against the withheld potential
/// outcomes.
pub fn run_benchmark(
    generator: &dyn SampleGenerator,
    methods: &[Method],
    config: &EstimatorConfig,
    r: usize,
    n: usize,
    seed: u64,
) -> Result<BenchmarkReport> {
    if r < 2 {
        return Err(Error::config("benchmark needs at least 2 replicates"));
    }
    if n < 10 {
        return Err(Error::config("benchmark needs n >= 10"));
    }
    if methods.is_empty() {
        return Err(Error::config("benchmark needs at least one method"));
    }
    let mut errors: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut failures: BTreeMap<String, usize> = BTreeMap::new();
    for method in methods {
        errors.insert(method.id().to_string(), Vec::new());
        failures.insert(method.id().to_string(), 0);
    }
    let mut ate_sum = 0.0;
    for rep in 0..r {
        let rep_seed = derive_seed(seed, "benchmark-replicate", rep as u64);
        let generated = generator.draw(n, rep_seed)?;
        let truth = true_ate(&generated);
        ate_sum += truth;
        // estimators only ever see the observational projection
        let observed: ObservationalSample = generated.to_observational();
        let rep_config = EstimatorConfig {
            seed: derive_seed(rep_seed, "estimator", 0),
            ..config.clone()
        };
        for method in methods {
            match method.estimate(&observed, &rep_config) {
                Ok(est) => errors.get_mut(method.id()).unwrap().push(est.ate - truth),
                Err(_) => *failures.get_mut(method.id()).unwrap() += 1,
            }
        }
    }

    let mut scores = Vec::new();
    let mut excluded = Vec::new();
    for method in methods {
        let errs = &errors[method.id()];
        if errs.is_empty() {
            excluded.push(method.id().to_string());
            continue;
        }
        let k = errs.len() as f64;
        let mean_bias = errs.iter().sum::<f64>() / k;
        let var = errs.iter().map(|e| (e - mean_bias).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
        let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / k).sqrt();
        scores.push(MethodScore {
            method: method.id().to_string(),
            mean_bias,
            sd: var.sqrt(),
            rmse,
            replicates: errs.len(),
            failures: failures[method.id()],
        });
    }
    if scores.is_empty() {
        return Err(Error::numerical("every method failed on every replicate"));
    }
    let mut report = BenchmarkReport {
        scores,
        true_ate: ate_sum / r as f64,
        ranking_abs_bias: Vec::new(),
        ranking_rmse: Vec::new(),
        generator: generator.describe(),
        seed,
        excluded,
    };
    report.ranking_abs_bias = rank_methods(&report, RankCriterion::AbsBias)?;
    report.ranking_rmse = rank_methods(&report, RankCriterion::Rmse)?;
    Ok(report)
}

/// Ascending order under the criterion; ties fall back to the method id.
pub fn rank_methods(report: &BenchmarkReport, criterion: RankCriterion) -> Result<Vec<String>> {
    if report.scores.is_empty() {
        return Err(Error::data("cannot rank an empty report"));
    }
    let mut keyed: Vec<(f64, &str)> = report
        .scores
        .iter()
        .map(|s| {
            let key = match criterion {
                RankCriterion::AbsBias => s.mean_bias.abs(),
                RankCriterion::Rmse => s.rmse,
            };
            (key, s.method.as_str())
        })
        .collect();
    keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(b.1)));
    Ok(keyed.into_iter().map(|(_, m)| m.to_string()).collect())
}

/// Kendall tau-a between two strict rankings of the same element set.
pub fn rank_agreement(r1: &[String], r2: &[String]) -> Result<f64> {
    let n = r1.len();
    if n != r2.len() {
        return Err(Error::data("rankings must have the same length"));
    }
    if n < 2 {
        return Err(Error::data("rank agreement needs at least 2 elements"));
    }
    let pos2: BTreeMap<&str, usize> = r2.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
    if pos2.len() != n {
        return Err(Error::data("duplicate elements in ranking"));
    }
    let mapped: Vec<usize> = r1
        .iter()
        .map(|m| {
            pos2.get(m.as_str())
                .copied()
                .ok_or_else(|| Error::data(format!("element '{m}' missing from second ranking")))
        })
        .collect::<Result<_>>()?;
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            if mapped[i] < mapped[j] {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok((concordant - discordant) as f64 / pairs)
}

/// SD of the estimator over `b` nonparametric bootstrap resamples.
pub fn bootstrap_se(
    sample: &ObservationalSample,
    method: Method,
    config: &EstimatorConfig,
    b: usize,
    seed: u64,
) -> Result<f64> {
    if b < 2 {
        return Err(Error::config("bootstrap needs B >= 2"));
    }
    let mut estimates = Vec::with_capacity(b);
    let mut failed = 0usize;
    for rep in 0..b {
        let rep_seed = derive_seed(seed, "bootstrap-se", rep as u64);
        let resampled = bootstrap_resample(sample, rep_seed);
        match method.estimate(&resampled, config) {
            Ok(est) => estimates.push(est.ate),
            Err(_) => failed += 1,
        }
    }
    if failed > b / 2 {
        return Err(Error::numerical(format!(
            "estimator failed on {failed} of {b} bootstrap resamples"
        )));
    }
    let k = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / k;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(var.sqrt())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationDiscrepancy {
    pub real: Array2<f64>,
    pub synth: Array2<f64>,
    pub frobenius: f64,
    /// True when a constant column forced correlation entries to 0.
    pub constant_column: bool,
}

fn correlation_matrix(x: &Array2<f64>, y: &Array1<f64>) -> (Array2<f64>, bool) {
    let n = x.nrows();
    let p = x.ncols();
    let d = p + 1;
    let mut cols: Vec<Array1<f64>> = (0..p).map(|j| x.column(j).to_owned()).collect();
    cols.push(y.clone());
    let mut centered = Vec::with_capacity(d);
    let mut sds = Vec::with_capacity(d);
    let mut constant = false;
    for col in &cols {
        let mean = col.mean().unwrap();
        let c = col - mean;
        let sd = (c.dot(&c) / (n as f64 - 1.0)).sqrt();
        if sd < 1e-12 {
            constant = true;
        }
        centered.push(c);
        sds.push(sd);
    }
    let mut corr = Array2::<f64>::eye(d);
    for a in 0..d {
        for b in (a + 1)..d {
            let v = if sds[a] < 1e-12 || sds[b] < 1e-12 {
                0.0
            } else {
                centered[a].dot(&centered[b]) / ((n as f64 - 1.0) * sds[a] * sds[b])
            };
            corr[[a, b]] = v;
            corr[[b, a]] = v;
        }
    }
    (corr, constant)
}

/// Pearson correlation matrices (covariates plus outcome as the final
/// row/column) for both samples and the Frobenius norm of their difference.
pub fn correlation_discrepancy(
    real: &ObservationalSample,
    synth: &ObservationalSample,
) -> Result<CorrelationDiscrepancy> {
    if real.p() != synth.p() {
        return Err(Error::Dimension {
            expected: real.p(),
            got: synth.p(),
            context: "correlation_discrepancy covariate dimension",
        });
    }
    if real.n() < 2 || synth.n() < 2 {
        return Err(Error::data("correlation_discrepancy needs n >= 2 per sample"));
    }
    let (cr, const_r) = correlation_matrix(&real.x, &real.y);
    let (cs, const_s) = correlation_matrix(&synth.x, &synth.y);
    let frobenius = (&cr - &cs).iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(CorrelationDiscrepancy {
        real: cr,
        synth: cs,
        frobenius,
        constant_column: const_r || const_s,
    })
}

fn subsample(x: &Array2<f64>, m: usize, seed: u64, label_index: u64) -> Array2<f64> {
    if x.nrows() <= m {
        return x.clone();
    }
    let mut idx: Vec<usize> = (0..x.nrows()).collect();
    let mut rng = crate::seed::stream_rng_indexed(seed, "energy-subsample", label_index);
    idx.shuffle(&mut rng);
    idx.truncate(m);
    idx.sort_unstable();
    x.select(Axis(0), &idx)
}

/// Energy distance 2 E||A-B|| - E||A-A'|| - E||B-B'|| between two row sets,
/// with a seeded subsample of 2000 rows per side on large inputs.
pub fn energy_distance(a: &Array2<f64>, b: &Array2<f64>, seed: u64) -> Result<f64> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension {
            expected: a.ncols(),
            got: b.ncols(),
            context: "energy_distance dimension",
        });
    }
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::data("energy_distance needs nonempty samples"));
    }
    const M: usize = 2000;
    let a = subsample(a, M, seed, 0);
    let b = subsample(b, M, seed, 1);

    let dist = |u: &Array2<f64>, i: usize, v: &Array2<f64>, j: usize| -> f64 {
        let mut s = 0.0;
        for k in 0..u.ncols() {
            let d = u[[i, k]] - v[[j, k]];
            s += d * d;
        }
        s.sqrt()
    };

    let (na, nb) = (a.nrows(), b.nrows());
    let mut cross = 0.0;
    for i in 0..na {
        for j in 0..nb {
            cross += dist(&a, i, &b, j);
        }
    }
    cross /= (na * nb) as f64;

    let within = |u: &Array2<f64>| -> f64 {
        let n = u.nrows();
        if n < 2 {
            return 0.0;
        }
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += dist(u, i, u, j);
            }
        }
        2.0 * s / ((n * n) as f64)
    };

    // the estimate is nonnegative up to rounding; clamp the fp dust
    Ok((2.0 * cross - within(&a) - within(&b)).max(0.0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OvbEntry {
    pub column: String,
    /// ATE with this covariate removed minus the full-sample ATE; NaN-free
    /// only when the reduced fit succeeded.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OvbScan {
    pub full_ate: f64,
    pub entries: Vec<OvbEntry>,
    /// max |delta| over successful entries: a data-driven scale for the
    /// confounding-bias constraint.
    pub max_abs_delta: f64,
}

/// Leave-one-covariate-out sensitivity: how much the ATE moves when each
/// column is omitted.
pub fn ovb_scan(
    sample: &ObservationalSample,
    method: Method,
    config: &EstimatorConfig,
) -> Result<OvbScan> {
    if sample.p() < 2 {
        return Err(Error::data("ovb_scan needs at least 2 covariates"));
    }
    let full = method.estimate(sample, config)?;
    let mut entries = Vec::with_capacity(sample.p());
    let mut max_abs = 0.0f64;
    for j in 0..sample.p() {
        let reduced = sample.drop_column(j)?;
        let delta = match method.estimate(&reduced, config) {
            Ok(est) => {
                let d = est.ate - full.ate;
                max_abs = max_abs.max(d.abs());
                Some(d)
            }
            Err(_) => None,
        };
        entries.push(OvbEntry {
            column: sample.column_names[j].clone(),
            delta,
        });
    }
    Ok(OvbScan {
        full_ate: full.ate,
        entries,
        max_abs_delta: max_abs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::QuadraticParams;
    use crate::estimators::GbtConfig;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn fast_config() -> EstimatorConfig {
        EstimatorConfig {
            gbt: GbtConfig { n_trees: 20, ..Default::default() },
            ..Default::default()
        }
    }

    fn randomized_quadratic() -> Dgp {
        Dgp::Quadratic {
            params: QuadraticParams { gamma: 0.0, ..Default::default() },
        }
    }

    #[test]
    fn benchmark_diff_means_unbiased_under_randomization() {
        let report = run_benchmark(
            &randomized_quadratic(),
            &[Method::DiffMeans],
            &fast_config(),
            50,
            2500,
            42,
        )
        .unwrap();
        let score = &report.scores[0];
        assert_eq!(score.replicates, 50);
        assert_eq!(score.failures, 0);
        let mc_se = score.sd / (50f64).sqrt();
        assert!(
            score.mean_bias.abs() < 3.0 * mc_se,
            "bias {} mc_se {mc_se}",
            score.mean_bias
        );
    }

    #[test]
    fn benchmark_is_deterministic() {
        let dgp = randomized_quadratic();
        let a = run_benchmark(&dgp, &[Method::DiffMeans], &fast_config(), 3, 200, 7).unwrap();
        let b = run_benchmark(&dgp, &[Method::DiffMeans], &fast_config(), 3, 200, 7).unwrap();
        assert_eq!(a.scores[0].mean_bias, b.scores[0].mean_bias);
        assert_eq!(a.scores[0].sd, b.scores[0].sd);
    }

    #[test]
    fn method_score_decomposition_identity() {
        let report = run_benchmark(
            &randomized_quadratic(),
            &[Method::DiffMeans, Method::Ipw],
            &fast_config(),
            10,
            300,
            11,
        )
        .unwrap();
        for s in &report.scores {
            let r = s.replicates as f64;
            let lhs = s.rmse * s.rmse;
            let rhs = s.mean_bias * s.mean_bias + (r - 1.0) / r * s.sd * s.sd;
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-9);
        }
    }

    #[test]
    fn rankings_are_permutations() {
        let report = run_benchmark(
            &randomized_quadratic(),
            &[Method::DiffMeans, Method::Ipw, Method::TLearnerLinear],
            &fast_config(),
            4,
            300,
            13,
        )
        .unwrap();
        for ranking in [&report.ranking_abs_bias, &report.ranking_rmse] {
            let mut sorted = ranking.clone();
            sorted.sort();
            assert_eq!(sorted, vec!["diff_means", "ipw", "t_learner_linear"]);
        }
    }

    #[test]
    fn rank_methods_orders_and_breaks_ties() {
        let score = |m: &str, bias: f64| MethodScore {
            method: m.to_string(),
            mean_bias: bias,
            sd: 1.0,
            rmse: bias.abs(),
            replicates: 5,
            failures: 0,
        };
        let report = BenchmarkReport {
            scores: vec![score("b", 0.5), score("a", 0.1), score("c", 0.5)],
            true_ate: 0.0,
            ranking_abs_bias: vec![],
            ranking_rmse: vec![],
            generator: String::new(),
            seed: 0,
            excluded: vec![],
        };
        let ranked = rank_methods(&report, RankCriterion::AbsBias).unwrap();
        assert_eq!(ranked, vec!["a", "b", "c"]);
        let single = BenchmarkReport {
            scores: vec![score("only", 1.0)],
            ..report
        };
        assert_eq!(
            rank_methods(&single, RankCriterion::Rmse).unwrap(),
            vec!["only"]
        );
    }

    #[test]
    fn kendall_tau_identical_reversed_and_swap() {
        let r: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let rev: Vec<String> = r.iter().rev().cloned().collect();
        assert_abs_diff_eq!(rank_agreement(&r, &r).unwrap(), 1.0);
        assert_abs_diff_eq!(rank_agreement(&r, &rev).unwrap(), -1.0);
        // one adjacent swap: 1 discordant pair of 6
        let swapped: Vec<String> = ["a", "c", "b", "d"].iter().map(|s| s.to_string()).collect();
        assert_abs_diff_eq!(
            rank_agreement(&r, &swapped).unwrap(),
            1.0 - 2.0 / 6.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn kendall_tau_rejects_mismatched_sets() {
        let r1: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let r2: Vec<String> = ["a", "z"].iter().map(|s| s.to_string()).collect();
        assert!(rank_agreement(&r1, &r2).is_err());
    }

    #[test]
    fn bootstrap_se_matches_analytic_for_diff_means() {
        let dgp = randomized_quadratic();
        let sample = dgp.generate(4000, 5).unwrap().to_observational();
        let analytic = crate::estimators::diff_means(&sample).unwrap().se.unwrap();
        let boot = bootstrap_se(&sample, Method::DiffMeans, &fast_config(), 50, 9).unwrap();
        assert!(
            (boot - analytic).abs() / analytic < 0.2,
            "bootstrap {boot} analytic {analytic}"
        );
    }

    #[test]
    fn bootstrap_se_deterministic_and_positive() {
        let dgp = randomized_quadratic();
        let sample = dgp.generate(300, 6).unwrap().to_observational();
        let a = bootstrap_se(&sample, Method::DiffMeans, &fast_config(), 10, 3).unwrap();
        let b = bootstrap_se(&sample, Method::DiffMeans, &fast_config(), 10, 3).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
    }

    #[test]
    fn correlation_discrepancy_zero_on_self() {
        let dgp = randomized_quadratic();
        let sample = dgp.generate(500, 8).unwrap().to_observational();
        let d = correlation_discrepancy(&sample, &sample).unwrap();
        assert_abs_diff_eq!(d.frobenius, 0.0, epsilon = 1e-12);
        assert!(!d.constant_column);
    }

    #[test]
    fn correlation_discrepancy_closed_form() {
        // real: two covariates with correlation ~0.9, synth independent;
        // outcome independent noise in both
        let mut rng = crate::seed::stream_rng(10, "corr");
        let n = 60_000;
        let mut xr = Array2::<f64>::zeros((n, 2));
        let mut xs = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            let u: f64 = StandardNormal.sample(&mut rng);
            let v: f64 = StandardNormal.sample(&mut rng);
            xr[[i, 0]] = u;
            xr[[i, 1]] = 0.9 * u + (1.0f64 - 0.81).sqrt() * v;
            xs[[i, 0]] = StandardNormal.sample(&mut rng);
            xs[[i, 1]] = StandardNormal.sample(&mut rng);
        }
        let z = Array1::from_shape_fn(n, |i| (i % 2) as f64);
        let yr = Array1::from_shape_fn(n, |_| StandardNormal.sample(&mut rng));
        let ys = Array1::from_shape_fn(n, |_| StandardNormal.sample(&mut rng));
        let names = vec!["x0".to_string(), "x1".to_string()];
        let real = ObservationalSample::new(xr, z.clone(), yr, names.clone(), Default::default())
            .unwrap();
        let synth = ObservationalSample::new(xs, z, ys, names, Default::default()).unwrap();
        let d = correlation_discrepancy(&real, &synth).unwrap();
        // off-diagonal 0.9 difference appears twice: frobenius ~ sqrt(2)*0.9
        assert_abs_diff_eq!(d.frobenius, 2.0f64.sqrt() * 0.9, epsilon = 0.05);
        let d_rev = correlation_discrepancy(&synth, &real).unwrap();
        assert_abs_diff_eq!(d.frobenius, d_rev.frobenius, epsilon = 1e-12);
    }

    #[test]
    fn correlation_discrepancy_flags_constant_column() {
        let x = array![[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]];
        let z = array![1.0, 0.0, 1.0, 0.0];
        let y = array![0.5, 1.0, 1.5, 2.0];
        let names = vec!["c".to_string(), "x".to_string()];
        let s = ObservationalSample::new(x, z, y, names, Default::default()).unwrap();
        let d = correlation_discrepancy(&s, &s).unwrap();
        assert!(d.constant_column);
        assert_eq!(d.real[[0, 1]], 0.0);
    }

    #[test]
    fn energy_distance_zero_on_identical() {
        let mut rng = crate::seed::stream_rng(11, "energy");
        let a = Array2::from_shape_fn((50, 3), |_| rng.random_range(-1.0..1.0f64));
        let d = energy_distance(&a, &a.clone(), 0).unwrap();
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn energy_distance_point_mass_closed_form() {
        let a = Array2::from_elem((10, 1), 0.0);
        let b = Array2::from_elem((7, 1), 1.0);
        let d = energy_distance(&a, &b, 0).unwrap();
        assert_abs_diff_eq!(d, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn energy_distance_symmetric_and_nonnegative() {
        let mut rng = crate::seed::stream_rng(12, "energy-prop");
        for _ in 0..25 {
            let na = rng.random_range(2..30);
            let nb = rng.random_range(2..30);
            let a = Array2::from_shape_fn((na, 2), |_| rng.random_range(-2.0..2.0f64));
            let b = Array2::from_shape_fn((nb, 2), |_| rng.random_range(-2.0..2.0f64));
            let dab = energy_distance(&a, &b, 1).unwrap();
            let dba = energy_distance(&b, &a, 1).unwrap();
            assert!(dab >= -1e-12, "negative energy distance {dab}");
            assert_abs_diff_eq!(dab, dba, epsilon = 1e-12);
        }
    }

    #[test]
    fn energy_distance_subsamples_deterministically() {
        let mut rng = crate::seed::stream_rng(13, "energy-big");
        let a = Array2::from_shape_fn((2500, 1), |_| rng.random_range(-1.0..1.0f64));
        let b = Array2::from_shape_fn((2500, 1), |_| rng.random_range(0.0..2.0f64));
        let d1 = energy_distance(&a, &b, 4).unwrap();
        let d2 = energy_distance(&a, &b, 4).unwrap();
        assert_eq!(d1, d2);
        assert!(d1 > 0.0);
    }

    #[test]
    fn ovb_scan_redundant_column_is_inert() {
        // duplicate covariate: dropping either copy leaves the fit unchanged
        let mut rng = crate::seed::stream_rng(14, "ovb");
        let n = 5000;
        let mut x = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            let v: f64 = StandardNormal.sample(&mut rng);
            x[[i, 0]] = v;
            x[[i, 1]] = v;
        }
        let z = Array1::from_shape_fn(n, |i| {
            if rng.random_range(0.0..1.0) < crate::estimators::sigmoid(x[[i, 0]]) { 1.0 } else { 0.0 }
        });
        let y = Array1::from_shape_fn(n, |i| {
            2.0 * z[i] + x[[i, 0]] + 0.5 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let names = vec!["x0".to_string(), "x0_copy".to_string()];
        let s = ObservationalSample::new(x, z, y, names, Default::default()).unwrap();
        let config = EstimatorConfig { ridge_lambda: 1e-4, ..fast_config() };
        let scan = ovb_scan(&s, Method::TLearnerLinear, &config).unwrap();
        for entry in &scan.entries {
            let d = entry.delta.unwrap();
            assert!(
                d.abs() < 0.05 * scan.full_ate.abs(),
                "{}: delta {d} vs ate {}",
                entry.column,
                scan.full_ate
            );
        }
    }

    #[test]
    fn ovb_scan_confounder_moves_estimate_most() {
        // x0 is a strong confounder, x1 pure noise
        let mut rng = crate::seed::stream_rng(15, "ovb2");
        let n = 5000;
        let x = Array2::from_shape_fn((n, 2), |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let z = Array1::from_shape_fn(n, |i| {
            if rng.random_range(0.0..1.0) < crate::estimators::sigmoid(2.0 * x[[i, 0]]) {
                1.0
            } else {
                0.0
            }
        });
        let y = Array1::from_shape_fn(n, |i| {
            1.0 * z[i] + 2.0 * x[[i, 0]] + 0.3 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let names = vec!["confounder".to_string(), "noise".to_string()];
        let s = ObservationalSample::new(x, z, y, names, Default::default()).unwrap();
        let scan = ovb_scan(&s, Method::TLearnerLinear, &fast_config()).unwrap();
        let d_conf = scan.entries[0].delta.unwrap().abs();
        let d_noise = scan.entries[1].delta.unwrap().abs();
        assert!(d_conf > d_noise, "confounder {d_conf} noise {d_noise}");
        assert_abs_diff_eq!(scan.max_abs_delta, d_conf, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_benchmark_with_identical_replicates() {
        // a generator that ignores the seed produces identical replicates
        struct Fixed(GeneratedSample);
        impl SampleGenerator for Fixed {
            fn draw(&self, _n: usize, _seed: u64) -> Result<GeneratedSample> {
                Ok(self.0.clone())
            }
            fn describe(&self) -> String {
                "fixed sample".to_string()
            }
        }
        let base = randomized_quadratic().generate(200, 1).unwrap();
        let report = run_benchmark(
            &Fixed(base),
            &[Method::DiffMeans],
            &fast_config(),
            2,
            200,
            0,
        )
        .unwrap();
        assert_abs_diff_eq!(report.scores[0].sd, 0.0, epsilon = 1e-12);
    }
}
