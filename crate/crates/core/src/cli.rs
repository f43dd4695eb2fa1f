//! Command-line front end.
//!
//! Exit status is 0 on success, 2 for usage errors (bad flags, invalid
//! parameters found before any computation) and 1 for runtime failures.
//! Outputs are written through a temporary file in the target directory and
//! renamed into place; experiments also write `<stem>.meta.json` beside the
//! CSV.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::asymptotics::{solve_lasso_fpe, solve_ridge_fpe, solve_robust_fpe, FixedPoint, FpModel, SignalDistribution};
use crate::error::{Error, Result};
use crate::experiments::{
    run_cost_compare, run_coverage, run_non_universality, run_qq, run_residual_check, run_risk_curve,
    run_sparsity_check, Estimator, ExperimentConfig, ExperimentResult, NoiseSpec, NonUniversalityConfig,
    ROBUST_NOISE_DRAWS,
};
use crate::inference::InferenceReport;
use crate::models::{build_instance, sample_noise, DesignKind, InstanceKey, NoiseKind, PriorKind};
use crate::rng::substream;
use crate::scalar::RobustLoss;
use crate::solvers::{solve_lasso, solve_lse, solve_ridge, solve_robust, sparsity, SolverConfig};

#[derive(Debug, Parser)]
#[command(name = "ulab", version, about = "Universality experiments for regularized regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the fixed-point equations and write the solution as JSON.
    Fpe(FpeArgs),
    /// Fit one estimator on one random instance.
    Solve(SolveArgs),
    /// Empirical risk against the limiting risk over a lambda grid.
    RiskCurve(ExperimentArgs),
    /// Quantiles of the pooled estimation errors against the population law.
    Qq(ExperimentArgs),
    /// Residual coordinates against their conditional population law.
    Residual(ExperimentArgs),
    /// Lasso sparsity against its limit over a lambda grid.
    Sparsity(ExperimentArgs),
    /// Debiased-Lasso noise-level estimate and interval coverage.
    Coverage(ExperimentArgs),
    /// Least-squares risk under the two-point row-scale design vs Gaussian.
    Counterexample(CounterexampleArgs),
    /// Normalized optimal cost across designs.
    CostCompare(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct FpeArgs {
    /// ridge | lasso | robust
    #[arg(long, value_parser = ["ridge", "lasso", "robust"])]
    pub model: String,
    /// Aspect ratio m/n.
    #[arg(long)]
    pub delta: f64,
    #[arg(long)]
    pub lambda: f64,
    /// Noise standard deviation (ridge, lasso).
    #[arg(long, default_value = "1")]
    pub sigma: f64,
    /// Signal law: gaussian[:<sd>] | point:<value> | sparse:<value>:<fraction>
    #[arg(long, default_value = "gaussian:1")]
    pub prior: PriorKind,
    /// Robust loss: absolute | huber:<eta> | square
    #[arg(long, default_value = "huber:1")]
    pub loss: RobustLoss,
    /// Noise law sampled for the robust system: gaussian[:<sigma>] | student:<df>[:<sigma>] | zero
    #[arg(long, default_value = "gaussian:1")]
    pub noise: NoiseKind,
    #[arg(long, env = "ULAB_SEED", default_value = "0")]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, default_value = "1200")]
    pub m: usize,
    #[arg(long, default_value = "1500")]
    pub n: usize,
    /// gaussian | student:<df> | iso3pt:<atom>:<p_atom> | counterexample:<L>
    #[arg(long, default_value = "gaussian")]
    pub design: DesignKind,
    /// `matched` or gaussian[:<sigma>] | student:<df>[:<sigma>] | zero
    #[arg(long, default_value = "matched")]
    pub noise: String,
    /// Noise scale used by `--noise matched`.
    #[arg(long, default_value = "1")]
    pub sigma: f64,
    #[arg(long, default_value = "gaussian:1")]
    pub prior: PriorKind,
    /// ridge | lasso | robust | lse
    #[arg(long, default_value = "lasso", value_parser = ["ridge", "lasso", "robust", "lse"])]
    pub estimator: String,
    #[arg(long, default_value = "huber:1")]
    pub loss: RobustLoss,
    #[arg(long, default_value = "1")]
    pub lambda: f64,
    /// With the Lasso, also write debiased estimates and intervals at this level.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value = "0")]
    pub rep: u64,
    #[arg(long, env = "ULAB_SEED", default_value = "0")]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, default_value = "1200")]
    pub m: usize,
    #[arg(long, default_value = "1500")]
    pub n: usize,
    /// Repeatable: gaussian | student:<df> | iso3pt:<atom>:<p_atom> | counterexample:<L>
    #[arg(long, default_value = "gaussian")]
    pub design: Vec<DesignKind>,
    /// `matched` (Student-t designs get Student-t noise of the same df, others
    /// Gaussian) or one noise kind, or one per design.
    #[arg(long, default_value = "matched")]
    pub noise: Vec<String>,
    /// Noise scale used by `--noise matched`.
    #[arg(long, default_value = "1")]
    pub sigma: f64,
    #[arg(long, default_value = "gaussian:1")]
    pub prior: PriorKind,
    /// ridge | lasso | robust
    #[arg(long, default_value = "lasso", value_parser = ["ridge", "lasso", "robust"])]
    pub estimator: String,
    #[arg(long, default_value = "huber:1")]
    pub loss: RobustLoss,
    /// Single penalty level.
    #[arg(long, conflicts_with = "lambda_grid")]
    pub lambda: Option<f64>,
    /// start:stop:count, linearly spaced.
    #[arg(long, value_parser = parse_grid)]
    pub lambda_grid: Option<Grid>,
    #[arg(long, default_value = "50")]
    pub reps: usize,
    #[arg(long, env = "ULAB_SEED", default_value = "0")]
    pub seed: u64,
    /// Worker threads; 0 uses all available cores.
    #[arg(long, default_value = "0")]
    pub threads: usize,
    /// Miscoverage level for `coverage`.
    #[arg(long, default_value = "0.05")]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CounterexampleArgs {
    /// Risk inflation target L > 1.
    #[arg(long = "L", default_value = "10")]
    pub l: f64,
    #[arg(long, default_value = "400")]
    pub m: usize,
    #[arg(long, default_value = "200")]
    pub n: usize,
    #[arg(long, default_value = "200")]
    pub reps: usize,
    #[arg(long, env = "ULAB_SEED", default_value = "0")]
    pub seed: u64,
    #[arg(long, default_value = "0")]
    pub threads: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let bad = || format!("expected start:stop:count, got '{s}'");
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts.as_slice() else { return Err(bad()) };
    let (a, b): (f64, f64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
    let count: usize = c.parse().map_err(|_| bad())?;
    if count == 0 || !a.is_finite() || !b.is_finite() || (count > 1 && b <= a) {
        return Err(bad());
    }
    if count == 1 {
        return Ok(Grid(vec![a]));
    }
    let last = (count - 1) as f64;
    Ok(Grid((0..count).map(|i| if i + 1 == count { b } else { a + (b - a) * i as f64 / last }).collect()))
}

fn noise_spec(values: &[String], sigma: f64) -> Result<NoiseSpec> {
    if values.len() == 1 && values[0] == "matched" {
        return Ok(NoiseSpec::Matched { sigma });
    }
    Ok(NoiseSpec::Fixed { kinds: values.iter().map(|v| v.parse()).collect::<Result<_>>()? })
}

fn estimator(name: &str, loss: RobustLoss) -> Estimator {
    match name {
        "ridge" => Estimator::Ridge,
        "robust" => Estimator::Robust { loss },
        "lse" => Estimator::Lse,
        _ => Estimator::Lasso,
    }
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let lambdas = match (&self.lambda, &self.lambda_grid) {
            (Some(l), _) => vec![*l],
            (None, Some(g)) => g.0.clone(),
            (None, None) => return Err(Error::InvalidParameter("give --lambda or --lambda-grid".into())),
        };
        let cfg = ExperimentConfig {
            m: self.m,
            n: self.n,
            designs: self.design.clone(),
            noise: noise_spec(&self.noise, self.sigma)?,
            prior: self.prior,
            estimator: estimator(&self.estimator, self.loss),
            lambdas,
            reps: self.reps,
            master_seed: self.seed,
            alpha: Some(self.alpha),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// `dir/stem.meta.json` for `dir/stem.csv`.
pub fn meta_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.meta.json"))
}

fn write_result(result: &ExperimentResult, out: &Path) -> Result<String> {
    let mut csv = Vec::new();
    result.write_csv(&mut csv)?;
    write_atomic(out, &csv)?;
    write_atomic(&meta_path(out), result.metadata_json()?.as_bytes())?;
    Ok(format!(
        "{}: {} rows -> {} ({:.1} s)",
        result.metadata.experiment,
        result.rows.len(),
        out.display(),
        result.metadata.runtime_seconds
    ))
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build thread pool: {e}")))
}

enum Failure {
    Usage(Error),
    Runtime(Error),
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e)
}

fn runtime(e: Error) -> Failure {
    Failure::Runtime(e)
}

fn run_fpe(a: &FpeArgs) -> std::result::Result<String, Failure> {
    let signal = SignalDistribution::from_prior(&a.prior);
    let fp: FixedPoint = match a.model.as_str() {
        "ridge" => solve_ridge_fpe(a.delta, a.lambda, a.sigma, &signal),
        "lasso" => solve_lasso_fpe(a.delta, a.lambda, a.sigma, &signal),
        _ => {
            let sample = sample_noise(&a.noise, ROBUST_NOISE_DRAWS, &mut substream(a.seed, "theory-noise", 0)).map_err(usage)?;
            solve_robust_fpe(a.delta, a.lambda, a.loss, sample.as_slice().unwrap(), a.prior.second_moment())
        }
    }
    .map_err(|e| match e {
        Error::InvalidParameter(_) => usage(e),
        e => runtime(e),
    })?;
    let text = serde_json::to_string_pretty(&fp).map_err(|e| runtime(e.into()))?;
    write_atomic(&a.out, text.as_bytes()).map_err(runtime)?;
    let model = match fp.model {
        FpModel::Ridge => "ridge",
        FpModel::Lasso => "lasso",
        FpModel::Robust => "robust",
    };
    Ok(format!(
        "fpe {model}: beta* = {:.6}, gamma* = {:.6}, risk = {:.6}, residuals = [{:.1e}, {:.1e}] -> {}",
        fp.beta_star,
        fp.gamma_star,
        fp.theoretical_risk(),
        fp.residuals[0],
        fp.residuals[1],
        a.out.display()
    ))
}

fn run_solve(a: &SolveArgs) -> std::result::Result<String, Failure> {
    let noise = match noise_spec(std::slice::from_ref(&a.noise), a.sigma).map_err(usage)? {
        NoiseSpec::Matched { sigma } => a.design.matched_noise(sigma),
        NoiseSpec::Fixed { kinds } => kinds[0],
    };
    if let Some(alpha) = a.alpha {
        if !(alpha > 0.0 && alpha < 1.0) || a.estimator != "lasso" {
            return Err(usage(Error::InvalidParameter("--alpha needs the lasso and a level in (0, 1)".into())));
        }
    }
    let inst = build_instance(&a.design, &noise, &a.prior, a.m, a.n, InstanceKey::new(a.seed, 0, a.rep)).map_err(usage)?;
    let fit = match estimator(&a.estimator, a.loss) {
        Estimator::Ridge => solve_ridge(&inst, a.lambda),
        Estimator::Lasso => solve_lasso(&inst, a.lambda, &SolverConfig::lasso()),
        Estimator::Robust { loss } => solve_robust(&inst, loss, a.lambda, &SolverConfig::admm()),
        Estimator::Lse => solve_lse(&inst),
    }
    .map_err(|e| match e {
        Error::InvalidParameter(_) | Error::Dimension(_) => usage(e),
        e => runtime(e),
    })?;
    let mut csv = Vec::new();
    let mut meta = json!({
        "estimator": a.estimator, "lambda": a.lambda, "design": a.design.to_string(), "noise": noise.to_string(),
        "prior": a.prior.to_string(), "m": a.m, "n": a.n, "seed": a.seed, "rep": a.rep,
        "objective": fit.objective, "kkt_residual": fit.kkt_residual, "iterations": fit.iterations,
        "converged": fit.converged, "risk": fit.risk(&inst), "sparsity": sparsity(&fit, 0.0),
        "version": env!("CARGO_PKG_VERSION"),
    });
    match a.alpha {
        Some(alpha) => {
            let report = InferenceReport::new(&inst, &fit, alpha).map_err(runtime)?;
            report.write_csv(&mut csv).map_err(runtime)?;
            meta["gamma_hat"] = json!(report.gamma_hat);
            meta["coverage"] = json!(report.coverage);
        }
        None => {
            let mut w = csv::Writer::from_writer(&mut csv);
            let io = |e: csv::Error| runtime(e.into());
            w.write_record(["j", "mu0", "mu_hat"]).map_err(io)?;
            for j in 0..inst.n {
                w.write_record([j.to_string(), format!("{:.16e}", inst.mu0[j]), format!("{:.16e}", fit.mu_hat[j])])
                    .map_err(io)?;
            }
            w.flush().map_err(|e| runtime(e.into()))?;
        }
    }
    write_atomic(&a.out, &csv).map_err(runtime)?;
    let text = serde_json::to_string_pretty(&meta).map_err(|e| runtime(e.into()))?;
    write_atomic(&meta_path(&a.out), text.as_bytes()).map_err(runtime)?;
    Ok(format!(
        "solve {}: objective = {:.6e}, risk = {:.6}, converged = {} -> {}",
        a.estimator,
        fit.objective,
        fit.risk(&inst),
        fit.converged,
        a.out.display()
    ))
}

fn run_experiment(
    a: &ExperimentArgs,
    driver: fn(&ExperimentConfig) -> Result<ExperimentResult>,
) -> std::result::Result<String, Failure> {
    let cfg = a.config().map_err(usage)?;
    let result = pool(a.threads).map_err(usage)?.install(|| driver(&cfg)).map_err(|e| match e {
        Error::InvalidParameter(_) => usage(e),
        e => runtime(e),
    })?;
    write_result(&result, &a.out).map_err(runtime)
}

fn run_counterexample(a: &CounterexampleArgs) -> std::result::Result<String, Failure> {
    let cfg = NonUniversalityConfig { m: a.m, n: a.n, l: a.l, reps: a.reps, master_seed: a.seed };
    let result = pool(a.threads).map_err(usage)?.install(|| run_non_universality(&cfg)).map_err(|e| match e {
        Error::InvalidParameter(_) => usage(e),
        e => runtime(e),
    })?;
    let summary = &result.metadata.summary;
    let line = write_result(&result, &a.out).map_err(runtime)?;
    Ok(format!(
        "{line}; ratio = {:.3} [{:.3}, {:.3}]",
        summary["ratio"].as_f64().unwrap_or(f64::NAN),
        summary["ratio_ci_lower"].as_f64().unwrap_or(f64::NAN),
        summary["ratio_ci_upper"].as_f64().unwrap_or(f64::NAN)
    ))
}

pub fn dispatch(cli: &Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Fpe(a) => run_fpe(a),
        Command::Solve(a) => run_solve(a),
        Command::RiskCurve(a) => run_experiment(a, run_risk_curve),
        Command::Qq(a) => run_experiment(a, run_qq),
        Command::Residual(a) => run_experiment(a, run_residual_check),
        Command::Sparsity(a) => run_experiment(a, run_sparsity_check),
        Command::Coverage(a) => run_experiment(a, run_coverage),
        Command::Counterexample(a) => run_counterexample(a),
        Command::CostCompare(a) => run_experiment(a, run_cost_compare),
    };
    match outcome {
        Ok(line) => {
            println!("{line}");
            0
        }
        Err(Failure::Usage(e)) => {
            eprintln!("usage error: {e}");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// exit status.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(argv) {
        Ok(cli) => dispatch(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            code
        }
    }
}
