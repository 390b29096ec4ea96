//! Command-line front end: data simulation, model training, sample
//! generation, ATE estimation, benchmarking, and distribution diagnostics.

mod artifacts;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use credence::credence::{generate, train, true_ate};
use credence::dgp::oracle_ate;
use credence::estimators::{AteEstimate, EstimatorConfig, Method};
use credence::evaluation::{
    correlation_discrepancy, energy_distance, rank_agreement, run_benchmark, BenchmarkReport,
    SampleGenerator,
};
use credence::tabular::load_observational_csv;
use credence::{Error, Result};
use ndarray::Array2;
use serde::Serialize;

use config::{DataSection, RunConfig};

#[derive(Parser)]
#[command(name = "credence", version, about = "Constraint-driven synthetic data for evaluating causal estimators")]
struct Cli {
    /// JSON run configuration; command-line flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress informational output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset from a built-in data generating process.
    Simulate {
        /// Generator name: quadratic or friedman.
        #[arg(long)]
        dgp: Option<String>,
        /// Sample size.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Train a generative model on an observational CSV.
    Train {
        /// Observational CSV (covariates plus treatment and outcome columns).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Treatment-effect constraint weight.
        #[arg(long)]
        alpha: Option<f64>,
        /// Confounding-bias constraint weight.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Sample potential-outcome data from a trained model.
    Generate {
        /// Trained model JSON.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run ATE estimators on an observational CSV.
    Estimate {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Comma-separated method ids; defaults to the full suite.
        #[arg(long)]
        methods: Option<String>,
    },
    /// Monte Carlo benchmark of estimators against a generator's truth.
    Benchmark {
        /// Generator: "dgp:quadratic", "dgp:friedman", or "model:<path>".
        #[arg(long)]
        generator: Option<String>,
        #[arg(long, short = 'R')]
        replicates: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        /// Also benchmark against this trained model and report the Kendall
        /// tau between the two rankings.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
    /// Distributional goodness-of-fit between a real and a synthetic CSV.
    Diagnose {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synth: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's default error code is 2; usage errors are 1 here
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_) => 1,
                Error::Numerical(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

struct Ctx {
    config: RunConfig,
    seed: u64,
    out_dir: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Records the resolved configuration and seed next to the artifacts so
    /// a run can be reproduced exactly.
    fn write_run_record(&self, command: &str) -> Result<()> {
        #[derive(Serialize)]
        struct RunRecord<'a> {
            command: &'a str,
            seed: u64,
            config: &'a RunConfig,
        }
        artifacts::write_json(
            &RunRecord { command, seed: self.seed, config: &self.config },
            &self.path(&format!("{command}_run.json")),
        )
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;
    let ctx = Ctx { config, seed, out_dir, quiet: cli.quiet };

    match cli.command {
        Command::Simulate { dgp, n } => cmd_simulate(&ctx, dgp, n),
        Command::Train { data, alpha, beta, epochs } => cmd_train(&ctx, data, alpha, beta, epochs),
        Command::Generate { model, n } => cmd_generate(&ctx, &model, n),
        Command::Estimate { data, methods } => cmd_estimate(&ctx, data, methods),
        Command::Benchmark { generator, replicates, n, compare } => {
            cmd_benchmark(&ctx, generator, replicates, n, compare)
        }
        Command::Diagnose { real, synth } => cmd_diagnose(&ctx, &real, &synth),
    }
}

fn resolve_dgp(ctx: &Ctx, flag: Option<String>) -> Result<credence::dgp::Dgp> {
    match (flag, &ctx.config.dgp) {
        (Some(name), Some(section)) if section.name == name => section.build(),
        (Some(name), _) => credence::dgp::dgp_by_name(&name),
        (None, Some(section)) => section.build(),
        (None, None) => Err(Error::config(
            "no generator specified: pass --dgp or a config file with a dgp section",
        )),
    }
}

fn resolve_data(ctx: &Ctx, flag: Option<PathBuf>) -> Result<DataSection> {
    match (flag, &ctx.config.data) {
        (Some(path), Some(section)) => Ok(DataSection { path, ..section.clone() }),
        (Some(path), None) => Ok(DataSection {
            path,
            treatment_col: "z".to_string(),
            outcome_col: "y".to_string(),
            binary_columns: None,
        }),
        (None, Some(section)) => Ok(section.clone()),
        (None, None) => Err(Error::config(
            "no input data: pass --data or a config file with a data section",
        )),
    }
}

fn load_data(section: &DataSection) -> Result<credence::tabular::ObservationalSample> {
    load_observational_csv(
        &section.path,
        &section.treatment_col,
        &section.outcome_col,
        section.binary_columns.as_deref(),
    )
}

fn cmd_simulate(ctx: &Ctx, dgp_flag: Option<String>, n: Option<usize>) -> Result<()> {
    let dgp = resolve_dgp(ctx, dgp_flag)?;
    let n = n
        .or_else(|| ctx.config.benchmark.as_ref().map(|b| b.n))
        .unwrap_or(2500);
    let sample = dgp.generate(n, ctx.seed)?;
    artifacts::write_generated_csv(&sample, &ctx.path("simulate_full.csv"))?;
    artifacts::write_observational_csv(&sample.to_observational(), &ctx.path("simulate_obs.csv"))?;
    ctx.write_run_record("simulate")?;
    let (ate, mc_se) = oracle_ate(&dgp, 100_000, ctx.seed)?;
    ctx.say(format!("generator: {}", dgp.describe()));
    ctx.say(format!("oracle ATE: {ate:.4} (mc se {mc_se:.4})"));
    ctx.say(format!("sample true ATE: {:.4}", true_ate(&sample)));
    Ok(())
}

fn cmd_train(
    ctx: &Ctx,
    data: Option<PathBuf>,
    alpha: Option<f64>,
    beta: Option<f64>,
    epochs: Option<usize>,
) -> Result<()> {
    let section = resolve_data(ctx, data)?;
    let sample = load_data(&section)?;
    let mut training = ctx.config.credence.clone().unwrap_or_default();
    if let Some(alpha) = alpha {
        training.alpha = alpha;
    }
    if let Some(beta) = beta {
        training.beta = beta;
    }
    if let Some(epochs) = epochs {
        training.epochs = epochs;
    }
    training.seed = ctx.seed;
    let outcome = train(&sample, &training)?;
    artifacts::save_model(&outcome.model, &ctx.path("model.json"))?;
    artifacts::write_loss_csv(&outcome.history, &ctx.path("training_loss.csv"))?;
    ctx.write_run_record("train")?;
    if let Some(last) = outcome.history.last() {
        ctx.say(format!(
            "trained {} epochs; final loss_x {:.4}, loss_y {:.4}",
            outcome.history.len(),
            last.loss_x,
            last.loss_y
        ));
    }
    ctx.say(format!("model written to {}", ctx.path("model.json").display()));
    Ok(())
}

fn cmd_generate(ctx: &Ctx, model_path: &Path, n: Option<usize>) -> Result<()> {
    let model = artifacts::load_model(model_path)?;
    let n = n.unwrap_or(2500);
    let sample = generate(&model, n, ctx.seed)?;
    artifacts::write_generated_csv(&sample, &ctx.path("generated.csv"))?;
    artifacts::write_observational_csv(
        &sample.to_observational(),
        &ctx.path("generated_obs.csv"),
    )?;
    ctx.write_run_record("generate")?;
    ctx.say(format!("true ATE: {:.4}", true_ate(&sample)));
    Ok(())
}

fn resolve_estimators(ctx: &Ctx, flag: Option<String>) -> Result<(Vec<Method>, EstimatorConfig)> {
    let section = ctx.config.estimators.clone().unwrap_or_default();
    let methods = match flag {
        Some(list) => list
            .split(',')
            .map(|id| Method::parse(id.trim()))
            .collect::<Result<Vec<_>>>()?,
        None => section.resolve_methods()?,
    };
    let mut config = section.config;
    config.seed = ctx.seed;
    Ok((methods, config))
}

fn cmd_estimate(ctx: &Ctx, data: Option<PathBuf>, methods: Option<String>) -> Result<()> {
    let section = resolve_data(ctx, data)?;
    let sample = load_data(&section)?;
    let (methods, config) = resolve_estimators(ctx, methods)?;
    let mut estimates: Vec<AteEstimate> = Vec::with_capacity(methods.len());
    for method in &methods {
        let est = method.estimate(&sample, &config)?;
        let se = est.se.map(|s| format!("{s:.4}")).unwrap_or_else(|| "-".to_string());
        ctx.say(format!("{:<18} ate {:>10.4}  se {se}", est.method, est.ate));
        estimates.push(est);
    }
    artifacts::write_estimates_csv(&estimates, &ctx.path("estimates.csv"))?;
    ctx.write_run_record("estimate")?;
    Ok(())
}

enum Generator {
    Dgp(credence::dgp::Dgp),
    Model(Box<credence::credence::CredenceModel>),
}

impl Generator {
    fn as_dyn(&self) -> &dyn SampleGenerator {
        match self {
            Generator::Dgp(dgp) => dgp,
            Generator::Model(model) => model.as_ref(),
        }
    }
}

fn parse_generator(ctx: &Ctx, spec: Option<String>) -> Result<Generator> {
    match spec {
        None => Ok(Generator::Dgp(resolve_dgp(ctx, None)?)),
        Some(spec) => {
            if let Some(name) = spec.strip_prefix("dgp:") {
                Ok(Generator::Dgp(resolve_dgp(ctx, Some(name.to_string()))?))
            } else if let Some(path) = spec.strip_prefix("model:") {
                Ok(Generator::Model(Box::new(artifacts::load_model(Path::new(path))?)))
            } else {
                Err(Error::config(format!(
                    "invalid generator '{spec}' (expected dgp:<name> or model:<path>)"
                )))
            }
        }
    }
}

fn cmd_benchmark(
    ctx: &Ctx,
    generator: Option<String>,
    replicates: Option<usize>,
    n: Option<usize>,
    compare: Option<PathBuf>,
) -> Result<()> {
    let section = ctx.config.benchmark.clone().unwrap_or_default();
    let r = replicates.unwrap_or(section.replicates);
    let n = n.unwrap_or(section.n);
    let (methods, est_config) = resolve_estimators(ctx, None)?;
    let generator = parse_generator(ctx, generator)?;
    let report = run_benchmark(generator.as_dyn(), &methods, &est_config, r, n, ctx.seed)?;
    print_report(ctx, &report);
    artifacts::write_benchmark_csv(&report, &ctx.path("benchmark_report.csv"))?;
    artifacts::write_json(&report, &ctx.path("benchmark_report.json"))?;

    if let Some(model_path) = compare {
        let model = artifacts::load_model(&model_path)?;
        let model_report = run_benchmark(&model, &methods, &est_config, r, n, ctx.seed)?;
        print_report(ctx, &model_report);
        let tau = rank_agreement(&report.ranking_abs_bias, &model_report.ranking_abs_bias)?;
        ctx.say(format!("rank agreement (Kendall tau): {tau:.4}"));
        #[derive(Serialize)]
        struct Comparison<'a> {
            kendall_tau: f64,
            reference: &'a BenchmarkReport,
            model: &'a BenchmarkReport,
        }
        artifacts::write_benchmark_csv(&model_report, &ctx.path("benchmark_model.csv"))?;
        artifacts::write_json(
            &Comparison { kendall_tau: tau, reference: &report, model: &model_report },
            &ctx.path("benchmark_compare.json"),
        )?;
        // machine-greppable line for scripts even in quiet mode
        println!("kendall_tau={tau}");
    }
    ctx.write_run_record("benchmark")?;
    Ok(())
}

fn print_report(ctx: &Ctx, report: &BenchmarkReport) {
    ctx.say(format!(
        "generator: {} (true ATE {:.4}, seed {})",
        report.generator, report.true_ate, report.seed
    ));
    for s in &report.scores {
        ctx.say(format!(
            "{:<18} bias {:>9.4}  sd {:>8.4}  rmse {:>8.4}  ({} ok, {} failed)",
            s.method, s.mean_bias, s.sd, s.rmse, s.replicates, s.failures
        ));
    }
    for m in &report.excluded {
        ctx.say(format!("{m}: excluded (failed on every replicate)"));
    }
    ctx.say(format!("ranking by |bias|: {}", report.ranking_abs_bias.join(" < ")));
}

fn joint_matrix(sample: &credence::tabular::ObservationalSample) -> Array2<f64> {
    let n = sample.n();
    let p = sample.p();
    let mut m = Array2::<f64>::zeros((n, p + 2));
    m.slice_mut(ndarray::s![.., ..p]).assign(&sample.x);
    m.column_mut(p).assign(&sample.z);
    m.column_mut(p + 1).assign(&sample.y);
    m
}

fn cmd_diagnose(ctx: &Ctx, real_path: &Path, synth_path: &Path) -> Result<()> {
    let section = ctx.config.data.clone();
    let (t_col, o_col, binary) = match &section {
        Some(s) => (s.treatment_col.clone(), s.outcome_col.clone(), s.binary_columns.clone()),
        None => ("z".to_string(), "y".to_string(), None),
    };
    let real = load_observational_csv(real_path, &t_col, &o_col, binary.as_deref())?;
    let synth = load_observational_csv(synth_path, &t_col, &o_col, binary.as_deref())?;
    let corr = correlation_discrepancy(&real, &synth)?;
    let energy = energy_distance(&joint_matrix(&real), &joint_matrix(&synth), ctx.seed)?;

    #[derive(Serialize)]
    struct Diagnostics {
        correlation_frobenius: f64,
        energy_distance: f64,
        n_real: usize,
        n_synth: usize,
        constant_column: bool,
        seed: u64,
    }
    let report = Diagnostics {
        correlation_frobenius: corr.frobenius,
        energy_distance: energy,
        n_real: real.n(),
        n_synth: synth.n(),
        constant_column: corr.constant_column,
        seed: ctx.seed,
    };
    artifacts::write_json(&report, &ctx.path("diagnostics.json"))?;
    ctx.write_run_record("diagnose")?;
    ctx.say(format!("correlation discrepancy (Frobenius): {:.6}", corr.frobenius));
    ctx.say(format!("energy distance: {energy:.6}"));
    Ok(())
}
