use std::time::Instant;

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::distance::{bootstrap_ratio_ci, bootstrap_se, ks_distance, mean, quantile_sorted, variance, wasserstein2_1d};
use super::table::{Cell, ExperimentResult, Metadata};
use super::{Estimator, ExperimentConfig, BOOTSTRAP_RESAMPLES, POPULATION_DRAWS, QQ_LEVELS, ROBUST_NOISE_DRAWS};
use crate::asymptotics::{
    population_sparsity, sample_population, solve_lasso_fpe, solve_ridge_fpe, solve_robust_fpe, FixedPoint,
    PopulationLaw, SignalDistribution, Which,
};
use crate::error::{Error, Result};
use crate::inference::InferenceReport;
use crate::models::{build_instance, sample_noise, DesignKind, InstanceKey, ModelInstance, NoiseKind, PriorKind};
use crate::quadrature::GaussHermite;
use crate::rng::substream;
use crate::scalar::RobustLoss;
use crate::solvers::{solve_lasso, solve_lse, solve_robust, sparsity, FitResult, RidgeSolver, SolverConfig};

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn metadata(
    experiment: &str,
    config: serde_json::Value,
    seed: u64,
    sweep: Vec<(&str, usize)>,
    columns: serde_json::Value,
    summary: serde_json::Value,
    start: Instant,
) -> Metadata {
    Metadata {
        experiment: experiment.to_string(),
        config,
        seed,
        version: VERSION.to_string(),
        provenance: format!("ulab {VERSION} {experiment} seed={seed}"),
        sweep: sweep.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        columns,
        summary,
        runtime_seconds: start.elapsed().as_secs_f64(),
    }
}

fn theory_columns(estimator: Estimator) -> serde_json::Value {
    match estimator {
        Estimator::Robust { .. } => json!({"risk_theory": "tau0 * gamma*^2 (robust system, estimator units)"}),
        _ => json!({"risk_theory": "delta * (gamma*^2 - sigma^2)", "s_star": "P(|Pi + gamma* Z| >= gamma* lambda / beta*)"}),
    }
}

/// Runs `task(slot, rep)` for every pair, in parallel, returning results in
/// slot-major order.
fn replicate<T, F>(slots: usize, reps: usize, task: F) -> Result<Vec<Vec<T>>>
where
    T: Send,
    F: Fn(usize, usize) -> Result<T> + Sync,
{
    let flat: Vec<T> = (0..slots * reps).into_par_iter().map(|k| task(k / reps, k % reps)).collect::<Result<_>>()?;
    let mut out: Vec<Vec<T>> = (0..slots).map(|_| Vec::with_capacity(reps)).collect();
    for (k, item) in flat.into_iter().enumerate() {
        out[k / reps].push(item);
    }
    Ok(out)
}

fn instance(cfg: &ExperimentConfig, slot: usize, rep: usize) -> Result<ModelInstance> {
    build_instance(&cfg.designs[slot], &cfg.noise_for(slot), &cfg.prior, cfg.m, cfg.n, cfg.key(slot, rep))
}

/// Fits for every λ of an increasing grid, in grid order. Lasso and robust
/// paths run from the largest λ down with warm starts; Ridge reuses one Gram
/// matrix.
fn fit_path(inst: &ModelInstance, estimator: Estimator, lambdas: &[f64]) -> Result<Vec<FitResult>> {
    match estimator {
        Estimator::Ridge => {
            let solver = RidgeSolver::new(inst);
            lambdas.iter().map(|&l| solver.solve(l)).collect()
        }
        Estimator::Lasso | Estimator::Robust { .. } => {
            let mut fits = Vec::with_capacity(lambdas.len());
            let mut warm: Option<Array1<f64>> = None;
            for &lam in lambdas.iter().rev() {
                let fit = match estimator {
                    Estimator::Robust { loss } => {
                        let mut c = SolverConfig::admm();
                        c.warm_start = warm.take();
                        solve_robust(inst, loss, lam, &c)?
                    }
                    _ => {
                        let mut c = SolverConfig::lasso();
                        c.warm_start = warm.take();
                        solve_lasso(inst, lam, &c)?
                    }
                };
                warm = Some(fit.mu_hat.clone());
                fits.push(fit);
            }
            fits.reverse();
            Ok(fits)
        }
        Estimator::Lse => Ok(vec![solve_lse(inst)?]),
    }
}

fn robust_noise_sample(kind: &NoiseKind, seed: u64) -> Result<Vec<f64>> {
    Ok(sample_noise(kind, ROBUST_NOISE_DRAWS, &mut substream(seed, "theory-noise", 0))?.to_vec())
}

/// Fixed point for design slot `slot` at penalty `lam`.
fn fixed_point(cfg: &ExperimentConfig, slot: usize, lam: f64) -> Result<FixedPoint> {
    let noise = cfg.noise_for(slot);
    let signal = SignalDistribution::from_prior(&cfg.prior);
    match cfg.estimator {
        Estimator::Ridge => solve_ridge_fpe(cfg.delta(), lam, noise.sigma(), &signal),
        Estimator::Lasso => solve_lasso_fpe(cfg.delta(), lam, noise.sigma(), &signal),
        Estimator::Robust { loss } => {
            let sample = robust_noise_sample(&noise, cfg.master_seed)?;
            solve_robust_fpe(cfg.delta(), lam, loss, &sample, cfg.prior.second_moment())
        }
        Estimator::Lse => Err(Error::InvalidParameter("least squares has no fixed point here".into())),
    }
}

/// Fixed points per slot and λ, shared between slots with the same noise.
fn fixed_points(cfg: &ExperimentConfig, lambdas: &[f64]) -> Result<Vec<Vec<FixedPoint>>> {
    let mut out: Vec<Vec<FixedPoint>> = Vec::with_capacity(cfg.designs.len());
    for slot in 0..cfg.designs.len() {
        if let Some(prev) = (0..slot).find(|&s| cfg.noise_for(s) == cfg.noise_for(slot)) {
            out.push(out[prev].clone());
            continue;
        }
        out.push(lambdas.par_iter().map(|&l| fixed_point(cfg, slot, l)).collect::<Result<_>>()?);
    }
    Ok(out)
}

fn require(cfg: &ExperimentConfig, allowed: &[&str], what: &str) -> Result<()> {
    cfg.validate()?;
    if allowed.contains(&cfg.estimator.name()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} supports {allowed:?}, got {}", cfg.estimator.name())))
    }
}

fn config_json(cfg: &ExperimentConfig) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

/// Empirical risk `‖μ̂ − μ₀‖²/n` against the limiting risk, per design, λ
/// and replication. The instance of a replication is shared by all λ.
pub fn run_risk_curve(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let start = Instant::now();
    require(cfg, &["ridge", "lasso", "robust"], "risk-curve")?;
    let fps = fixed_points(cfg, &cfg.lambdas)?;
    let fits = replicate(cfg.designs.len(), cfg.reps, |slot, rep| {
        let inst = instance(cfg, slot, rep)?;
        Ok(fit_path(&inst, cfg.estimator, &cfg.lambdas)?.into_iter().map(|f| (f.risk(&inst), f.converged)).collect::<Vec<_>>())
    })?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (slot, design) in cfg.designs.iter().enumerate() {
        for (k, &lam) in cfg.lambdas.iter().enumerate() {
            let theory = fps[slot][k].theoretical_risk();
            let mut risks = Vec::with_capacity(cfg.reps);
            for rep in 0..cfg.reps {
                let (risk, converged) = fits[slot][rep][k];
                risks.push(risk);
                rows.push(vec![design.to_string().into(), lam.into(), rep.into(), risk.into(), theory.into(), converged.into()]);
            }
            let m = mean(&risks);
            summary.push(json!({
                "design": design.to_string(), "lambda": lam, "mean_risk": m, "risk_theory": theory,
                "relative_deviation": (m - theory).abs() / theory,
            }));
        }
    }
    Ok(ExperimentResult {
        schema: ["design", "lambda", "rep", "risk_emp", "risk_theory", "converged"].map(String::from).to_vec(),
        rows,
        metadata: metadata(
            "risk-curve",
            config_json(cfg),
            cfg.master_seed,
            vec![("design", cfg.designs.len()), ("lambda", cfg.lambdas.len()), ("rep", cfg.reps)],
            theory_columns(cfg.estimator),
            json!(summary),
            start,
        ),
    })
}

/// Quantiles of the pooled error coordinates `μ̂ − μ₀` against a
/// population sample of `w*`, with W₂ and KS distances per design.
pub fn run_qq(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let start = Instant::now();
    require(cfg, &["ridge", "lasso"], "qq")?;
    let lam = cfg.single_lambda()?;
    let fps = fixed_points(cfg, &[lam])?;
    let errors = replicate(cfg.designs.len(), cfg.reps, |slot, rep| {
        let inst = instance(cfg, slot, rep)?;
        let fit = fit_path(&inst, cfg.estimator, &[lam])?.remove(0);
        Ok((fit.error(&inst).to_vec(), fit.converged))
    })?;
    let signal = SignalDistribution::from_prior(&cfg.prior);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut theory_cache: Vec<(FixedPoint, Vec<f64>)> = Vec::new();
    for (slot, design) in cfg.designs.iter().enumerate() {
        let fp = &fps[slot][0];
        let theory = match theory_cache.iter().find(|(f, _)| f == fp) {
            Some((_, t)) => t.clone(),
            None => {
                let law = PopulationLaw::new(fp.clone(), signal.clone(), POPULATION_DRAWS, None)?;
                let mut t = sample_population(&law, Which::W, &mut substream(cfg.master_seed, "population/w", 0))?.to_vec();
                t.sort_by(f64::total_cmp);
                theory_cache.push((fp.clone(), t.clone()));
                t
            }
        };
        let mut pooled: Vec<f64> = errors[slot].iter().flat_map(|(e, _)| e.iter().copied()).collect();
        pooled.sort_by(f64::total_cmp);
        let converged = errors[slot].iter().all(|(_, c)| *c);
        let w2 = wasserstein2_1d(&pooled, &theory)?;
        let ks = ks_distance(&pooled, &theory)?;
        let mut max_gap = 0.0f64;
        for k in 1..=QQ_LEVELS {
            let q = k as f64 / (QQ_LEVELS + 1) as f64;
            let (e, t) = (quantile_sorted(&pooled, q), quantile_sorted(&theory, q));
            max_gap = max_gap.max((e - t).abs());
            rows.push(vec![design.to_string().into(), q.into(), e.into(), t.into(), w2.into(), ks.into(), converged.into()]);
        }
        summary.push(json!({"design": design.to_string(), "w2": w2, "ks": ks, "max_quantile_gap": max_gap,
            "gamma_star": fp.gamma_star, "beta_star": fp.beta_star}));
    }
    Ok(ExperimentResult {
        schema: ["design", "q", "emp_quantile", "theory_quantile", "w2", "ks", "converged"].map(String::from).to_vec(),
        rows,
        metadata: metadata(
            "qq",
            config_json(cfg),
            cfg.master_seed,
            vec![("design", cfg.designs.len()), ("q", QQ_LEVELS)],
            json!({"theory_quantile": format!("quantiles of {POPULATION_DRAWS} draws of w*"), "w2": "Wasserstein-2, pooled errors vs w* sample", "ks": "Kolmogorov-Smirnov, same samples"}),
            json!(summary),
            start,
        ),
    })
}

fn ramp(x: f64) -> f64 {
    x / (1.0 + x * x).sqrt()
}

/// Residual `Y − Aμ̂` against the conditional law
/// `r* = (β*/γ*)(σξ₀ + √(γ*² − σ²) h)` built on the instance's own `ξ₀`.
pub fn run_residual_check(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let start = Instant::now();
    require(cfg, &["ridge", "lasso"], "residual")?;
    let lam = cfg.single_lambda()?;
    let fps = fixed_points(cfg, &[lam])?;
    let signal = SignalDistribution::from_prior(&cfg.prior);
    let gh = GaussHermite::default();
    let huber = RobustLoss::Huber { eta: 1.0 };
    let rows = replicate(cfg.designs.len(), cfg.reps, |slot, rep| {
        let fp = &fps[slot][0];
        let inst = instance(cfg, slot, rep)?;
        let fit = fit_path(&inst, cfg.estimator, &[lam])?.remove(0);
        let resid = fit.residual(&inst);
        let xi0 = inst.standard_noise();
        let law = PopulationLaw::new(fp.clone(), signal.clone(), cfg.n, Some(xi0.clone()))?;
        let r_star = sample_population(&law, Which::R, &mut substream(cfg.master_seed, &format!("population/r/{slot}"), rep as u64))?;
        let w2 = wasserstein2_1d(resid.as_slice().unwrap(), r_star.as_slice().unwrap())?;

        let sigma = fp.params.sigma;
        let scale = fp.beta_star / fp.gamma_star;
        let spread = (fp.gamma_star * fp.gamma_star - sigma * sigma).max(0.0).sqrt();
        let mut boot = substream(cfg.master_seed, &format!("bootstrap/{slot}"), rep as u64);
        let mut row: Vec<Cell> = vec![cfg.designs[slot].to_string().into(), rep.into(), w2.into()];
        for phi in [&(|x: f64| huber.value(x)) as &(dyn Fn(f64) -> f64 + Sync), &ramp] {
            let diffs: Vec<f64> = resid
                .iter()
                .zip(xi0.iter())
                .map(|(&r, &x)| phi(r) - gh.expect(|h| phi(scale * (sigma * x + spread * h))))
                .collect();
            let emp = resid.iter().map(|&r| phi(r)).sum::<f64>() / inst.m as f64;
            let gap = mean(&diffs);
            row.push(emp.into());
            row.push((emp - gap).into());
            row.push(bootstrap_se(&diffs, BOOTSTRAP_RESAMPLES, &mut boot)?.into());
        }
        row.push(fit.converged.into());
        Ok(row)
    })?
    .into_iter()
    .flatten()
    .collect();
    Ok(ExperimentResult {
        schema: [
            "design", "rep", "w2", "huber_emp", "huber_theory", "huber_se", "ramp_emp", "ramp_theory", "ramp_se", "converged",
        ]
        .map(String::from)
        .to_vec(),
        rows,
        metadata: metadata(
            "residual",
            config_json(cfg),
            cfg.master_seed,
            vec![("design", cfg.designs.len()), ("rep", cfg.reps)],
            json!({
                "w2": "Wasserstein-2 between residual coordinates and one r* draw",
                "huber_emp": "mean of Huber(1) over residual coordinates",
                "huber_theory": "mean over i of E_h Huber(1)(r*_i) given xi0",
                "huber_se": "bootstrap standard error of the coordinatewise gap",
                "ramp_emp": "same with x / sqrt(1 + x^2)",
            }),
            serde_json::Value::Null,
            start,
        ),
    })
}

/// Lasso sparsity `ŝ` against `s*` over the λ grid.
pub fn run_sparsity_check(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let start = Instant::now();
    require(cfg, &["lasso"], "sparsity")?;
    let fps = fixed_points(cfg, &cfg.lambdas)?;
    let signal = SignalDistribution::from_prior(&cfg.prior);
    let fits = replicate(cfg.designs.len(), cfg.reps, |slot, rep| {
        let inst = instance(cfg, slot, rep)?;
        Ok(fit_path(&inst, cfg.estimator, &cfg.lambdas)?.into_iter().map(|f| (sparsity(&f, 0.0), f.converged)).collect::<Vec<_>>())
    })?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (slot, design) in cfg.designs.iter().enumerate() {
        for (k, &lam) in cfg.lambdas.iter().enumerate() {
            let s_star = population_sparsity(&fps[slot][k], &signal)?;
            let mut gaps = Vec::new();
            for rep in 0..cfg.reps {
                let (s_hat, converged) = fits[slot][rep][k];
                gaps.push((s_hat - s_star).abs());
                rows.push(vec![design.to_string().into(), lam.into(), rep.into(), s_hat.into(), s_star.into(), converged.into()]);
            }
            summary.push(json!({"design": design.to_string(), "lambda": lam, "s_star": s_star, "mean_abs_gap": mean(&gaps)}));
        }
    }
    Ok(ExperimentResult {
        schema: ["design", "lambda", "rep", "s_hat", "s_star", "converged"].map(String::from).to_vec(),
        rows,
        metadata: metadata(
            "sparsity",
            config_json(cfg),
            cfg.master_seed,
            vec![("design", cfg.designs.len()), ("lambda", cfg.lambdas.len()), ("rep", cfg.reps)],
            theory_columns(cfg.estimator),
            json!(summary),
            start,
        ),
    })
}

/// Debiased-Lasso intervals: `γ̂` against `γ*` and averaged coverage per
/// replication. Replications where `‖μ̂‖₀ ≥ m` are kept with `dof_ok = false`.
pub fn run_coverage(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let start = Instant::now();
    require(cfg, &["lasso"], "coverage")?;
    let lam = cfg.single_lambda()?;
    let alpha = cfg.alpha.ok_or_else(|| Error::InvalidParameter("coverage needs alpha".into()))?;
    let fps = fixed_points(cfg, &[lam])?;
    let results = replicate(cfg.designs.len(), cfg.reps, |slot, rep| {
        let inst = instance(cfg, slot, rep)?;
        let fit = fit_path(&inst, cfg.estimator, &[lam])?.remove(0);
        match InferenceReport::new(&inst, &fit, alpha) {
            Ok(r) => Ok((r.gamma_hat, r.coverage.unwrap_or(f64::NAN), fit.converged, true)),
            Err(Error::DofUndefined { .. }) => Ok((f64::NAN, f64::NAN, fit.converged, false)),
            Err(e) => Err(e),
        }
    })?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (slot, design) in cfg.designs.iter().enumerate() {
        let gamma_star = fps[slot][0].gamma_star;
        let (mut cov, mut rel) = (Vec::new(), Vec::new());
        for (rep, &(g, c, converged, ok)) in results[slot].iter().enumerate() {
            if ok {
                cov.push(c);
                rel.push((g - gamma_star).abs() / gamma_star);
            }
            rows.push(vec![design.to_string().into(), rep.into(), g.into(), gamma_star.into(), c.into(), converged.into(), ok.into()]);
        }
        summary.push(json!({
            "design": design.to_string(),
            "mean_coverage": if cov.is_empty() { f64::NAN } else { mean(&cov) },
            "mean_relative_gamma_error": if rel.is_empty() { f64::NAN } else { mean(&rel) },
            "dof_undefined": cfg.reps - cov.len(),
        }));
    }
    Ok(ExperimentResult {
        schema: ["design", "rep", "gamma_hat", "gamma_star", "coverage", "converged", "dof_ok"].map(String::from).to_vec(),
        rows,
        metadata: metadata(
            "coverage",
            config_json(cfg),
            cfg.master_seed,
            vec![("design", cfg.designs.len()), ("rep", cfg.reps)],
            json!({"coverage": format!("fraction of coordinates whose {}% interval covers mu0", 100.0 * (1.0 - alpha))}),
            json!(summary),
            start,
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonUniversalityConfig {
    pub m: usize,
    pub n: usize,
    /// Risk inflation target `L > 1` of the two-point row-scale design.
    pub l: f64,
    pub reps: usize,
    pub master_seed: u64,
}

/// Retries per replication before a design is declared hopeless.
const MAX_ATTEMPTS: u64 = 32;

/// Least-squares risk under the two-point row-scale design against the
/// Gaussian design, with a bootstrap interval for the ratio of mean risks.
pub fn run_non_universality(cfg: &NonUniversalityConfig) -> Result<ExperimentResult> {
    let start = Instant::now();
    if cfg.m <= cfg.n || cfg.n == 0 {
        return Err(Error::InvalidParameter(format!("needs m > n >= 1, got m = {}, n = {}", cfg.m, cfg.n)));
    }
    if cfg.reps == 0 {
        return Err(Error::InvalidParameter("reps must be >= 1".into()));
    }
    let designs = [DesignKind::CounterexampleTwoPoint { l: cfg.l }, DesignKind::GaussianIid];
    designs[0].validate()?;
    let noise = NoiseKind::Gaussian { sigma: 1.0 };
    let prior = PriorKind::GaussianIid { sd: 1.0 };
    let draws = replicate(designs.len(), cfg.reps, |slot, rep| {
        for attempt in 0..MAX_ATTEMPTS {
            let key = InstanceKey::new(cfg.master_seed, slot as u64, rep as u64 | (attempt << 32));
            let inst = build_instance(&designs[slot], &noise, &prior, cfg.m, cfg.n, key)?;
            match solve_lse(&inst) {
                Ok(fit) => return Ok(Some((fit.risk(&inst), attempt + 1))),
                Err(Error::Singular(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Ok(None)
    })?;
    for per_design in &draws {
        let attempted: u64 = per_design.iter().map(|d| d.map_or(MAX_ATTEMPTS, |(_, a)| a)).sum();
        let succeeded = per_design.iter().filter(|d| d.is_some()).count() as u64;
        let failed = attempted - succeeded;
        if 2 * failed > attempted || succeeded < per_design.len() as u64 {
            return Err(Error::RankDeficient { failed: failed as usize, attempted: attempted as usize });
        }
    }
    let risks: Vec<Vec<f64>> = draws.iter().map(|d| d.iter().map(|x| x.unwrap().0).collect()).collect();
    let ratio = mean(&risks[0]) / mean(&risks[1]);
    let (lo, hi) = bootstrap_ratio_ci(&risks[0], &risks[1], BOOTSTRAP_RESAMPLES, 0.95, &mut substream(cfg.master_seed, "bootstrap/ratio", 0))?;
    let mut rows = Vec::new();
    for (slot, design) in designs.iter().enumerate() {
        for (rep, d) in draws[slot].iter().enumerate() {
            let (risk, attempts) = d.unwrap();
            rows.push(vec![design.to_string().into(), rep.into(), risk.into(), (attempts as usize).into(), ratio.into(), lo.into(), hi.into()]);
        }
    }
    let summary = json!({
        "mean_risk_counterexample": mean(&risks[0]),
        "mean_risk_gaussian": mean(&risks[1]),
        "ratio": ratio, "ratio_ci_lower": lo, "ratio_ci_upper": hi,
        "retried_draws": draws.iter().flatten().map(|d| d.unwrap().1 - 1).sum::<u64>(),
    });
    Ok(ExperimentResult {
        schema: ["design", "rep", "risk", "attempts", "ratio", "ratio_ci_lower", "ratio_ci_upper"].map(String::from).to_vec(),
        rows,
        metadata: metadata(
            "counterexample",
            serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null),
            cfg.master_seed,
            vec![("design", 2), ("rep", cfg.reps)],
            json!({"risk": "least-squares ||mu_hat - mu0||^2 / n", "ratio": "mean counterexample risk / mean Gaussian risk, repeated on every row",
                   "ratio_ci_lower": "2.5% bootstrap percentile", "ratio_ci_upper": "97.5% bootstrap percentile"}),
            summary,
            start,
        ),
    })
}

/// Normalized optimal cost `objective/m` per design slot and replication,
/// with pairwise mean gaps between slots. Listing a design twice gives an
/// independent-draw control.
pub fn run_cost_compare(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let start = Instant::now();
    require(cfg, &["ridge", "lasso", "robust"], "cost-compare")?;
    let lam = cfg.single_lambda()?;
    let costs = replicate(cfg.designs.len(), cfg.reps, |slot, rep| {
        let inst = instance(cfg, slot, rep)?;
        let fit = fit_path(&inst, cfg.estimator, &[lam])?.remove(0);
        Ok((fit.objective / cfg.m as f64, fit.converged))
    })?;
    let mut rows = Vec::new();
    let mut per_slot = Vec::new();
    for (slot, design) in cfg.designs.iter().enumerate() {
        let values: Vec<f64> = costs[slot].iter().map(|c| c.0).collect();
        for (rep, &(v, converged)) in costs[slot].iter().enumerate() {
            rows.push(vec![slot.into(), design.to_string().into(), rep.into(), v.into(), converged.into()]);
        }
        per_slot.push((mean(&values), variance(&values)));
    }
    let r = cfg.reps as f64;
    let mut gaps = Vec::new();
    for i in 0..per_slot.len() {
        for j in i + 1..per_slot.len() {
            let gap = per_slot[i].0 - per_slot[j].0;
            let se = (per_slot[i].1 / r + per_slot[j].1 / r).sqrt();
            gaps.push(json!({"slot_a": i, "slot_b": j, "design_a": cfg.designs[i].to_string(), "design_b": cfg.designs[j].to_string(),
                "gap": gap, "se": se, "relative_gap": gap / per_slot[i].0}));
        }
    }
    let designs: Vec<_> = per_slot
        .iter()
        .enumerate()
        .map(|(s, (m, v))| json!({"slot": s, "design": cfg.designs[s].to_string(), "mean": m, "variance": v}))
        .collect();
    Ok(ExperimentResult {
        schema: ["slot", "design", "rep", "objective_normalized", "converged"].map(String::from).to_vec(),
        rows,
        metadata: metadata(
            "cost-compare",
            config_json(cfg),
            cfg.master_seed,
            vec![("design", cfg.designs.len()), ("rep", cfg.reps)],
            json!({"objective_normalized": "unnormalized cost at the solver optimum divided by m"}),
            json!({"designs": designs, "gaps": gaps}),
            start,
        ),
    })
}
