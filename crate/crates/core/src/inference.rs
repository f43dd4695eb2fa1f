//! Degrees-of-freedom adjusted debiased Lasso and its confidence intervals.

use std::io::Write;

use ndarray::{Array1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelInstance;
use crate::normal;
use crate::solvers::FitResult;

fn dof_denominator(inst: &ModelInstance, fit: &FitResult) -> Result<f64> {
    let support = fit.support_size();
    if support >= inst.m {
        return Err(Error::DofUndefined { support, m: inst.m });
    }
    Ok(1.0 - support as f64 / inst.m as f64)
}

/// `μ̂ᵈ = μ̂ + Aᵀ(Y − Aμ̂) / (1 − ‖μ̂‖₀/m)`.
pub fn debiased_lasso(inst: &ModelInstance, fit: &FitResult) -> Result<Array1<f64>> {
    let denom = dof_denominator(inst, fit)?;
    Ok(&fit.mu_hat + &(inst.a.t().dot(&fit.residual(inst)) / denom))
}

/// `γ̂ = √m ‖Y − Aμ̂‖ / (m − ‖μ̂‖₀)`.
pub fn gamma_hat(inst: &ModelInstance, fit: &FitResult) -> Result<f64> {
    dof_denominator(inst, fit)?;
    let r = fit.residual(inst);
    let m = inst.m as f64;
    Ok(m.sqrt() * r.dot(&r).sqrt() / (m - fit.support_size() as f64))
}

/// Intervals `μ̂ᵈⱼ ± z_{α/2} γ̂`.
pub fn confidence_intervals(mu_debiased: &Array1<f64>, gamma_hat: f64, alpha: f64) -> Result<(Array1<f64>, Array1<f64>)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(gamma_hat >= 0.0 && gamma_hat.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma_hat must be finite and >= 0, got {gamma_hat}")));
    }
    let half = normal::upper_quantile(alpha / 2.0) * gamma_hat;
    Ok((mu_debiased - half, mu_debiased + half))
}

/// Fraction of coordinates whose interval contains `mu0`.
pub fn empirical_coverage(lower: &Array1<f64>, upper: &Array1<f64>, mu0: &Array1<f64>) -> Result<f64> {
    if lower.len() != mu0.len() || upper.len() != mu0.len() {
        return Err(Error::Dimension(format!(
            "intervals have {}/{} entries, signal has {}",
            lower.len(),
            upper.len(),
            mu0.len()
        )));
    }
    if mu0.is_empty() {
        return Err(Error::EmptySample);
    }
    let hits = Zip::from(lower).and(upper).and(mu0).fold(0usize, |acc, &l, &u, &t| acc + usize::from(l <= t && t <= u));
    Ok(hits as f64 / mu0.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub mu_hat: Array1<f64>,
    pub mu_debiased: Array1<f64>,
    pub gamma_hat: f64,
    pub ci_lower: Array1<f64>,
    pub ci_upper: Array1<f64>,
    pub alpha: f64,
    /// The true signal, when known.
    pub mu0: Option<Array1<f64>>,
    pub coverage: Option<f64>,
}

impl InferenceReport {
    /// Debiasing, noise-level estimate and intervals for one Lasso fit; the
    /// instance's `mu0` is taken as known.
    pub fn new(inst: &ModelInstance, fit: &FitResult, alpha: f64) -> Result<Self> {
        let mu_debiased = debiased_lasso(inst, fit)?;
        let gamma_hat = gamma_hat(inst, fit)?;
        let (ci_lower, ci_upper) = confidence_intervals(&mu_debiased, gamma_hat, alpha)?;
        let coverage = empirical_coverage(&ci_lower, &ci_upper, &inst.mu0)?;
        Ok(InferenceReport {
            mu_hat: fit.mu_hat.clone(),
            mu_debiased,
            gamma_hat,
            ci_lower,
            ci_upper,
            alpha,
            mu0: Some(inst.mu0.clone()),
            coverage: Some(coverage),
        })
    }

    /// Per-coordinate table `j,mu0,mu_hat,mu_debiased,lower,upper,covered`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "mu0", "mu_hat", "mu_debiased", "lower", "upper", "covered"])?;
        for j in 0..self.mu_hat.len() {
            let (mu0, covered) = match &self.mu0 {
                Some(t) => {
                    let c = self.ci_lower[j] <= t[j] && t[j] <= self.ci_upper[j];
                    (format!("{:.16e}", t[j]), u8::from(c).to_string())
                }
                None => (String::new(), String::new()),
            };
            w.write_record([
                j.to_string(),
                mu0,
                format!("{:.16e}", self.mu_hat[j]),
                format!("{:.16e}", self.mu_debiased[j]),
                format!("{:.16e}", self.ci_lower[j]),
                format!("{:.16e}", self.ci_upper[j]),
                covered,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_instance, DesignKind, InstanceKey, NoiseKind, PriorKind};
    use crate::solvers::{solve_lasso, SolverConfig};
    use ndarray::{array, Array2};

    fn instance(seed: u64) -> ModelInstance {
        build_instance(
            &DesignKind::GaussianIid,
            &NoiseKind::Gaussian { sigma: 1.0 },
            &PriorKind::GaussianIid { sd: 1.0 },
            80,
            100,
            InstanceKey::new(seed, 0, 0),
        )
        .unwrap()
    }

    fn fit_of(mu: Array1<f64>) -> FitResult {
        FitResult { mu_hat: mu, objective: 0.0, kkt_residual: 0.0, iterations: 0, converged: true }
    }

    #[test]
    fn zero_fit_plug_in() {
        let inst = instance(1);
        let fit = fit_of(Array1::zeros(inst.n));
        let d = debiased_lasso(&inst, &fit).unwrap();
        let aty = inst.a.t().dot(&inst.y);
        assert!((&d - &aty).iter().all(|v| v.abs() < 1e-15));
        let g = gamma_hat(&inst, &fit).unwrap();
        assert!((g - inst.y.dot(&inst.y).sqrt() / (inst.m as f64).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn identity_against_loop_evaluator() {
        for seed in 0..5 {
            let inst = instance(seed);
            let fit = solve_lasso(&inst, 0.3, &SolverConfig::lasso()).unwrap();
            let d = debiased_lasso(&inst, &fit).unwrap();
            let k = fit.mu_hat.iter().filter(|v| **v != 0.0).count() as f64;
            let mut resid = vec![0.0; inst.m];
            for i in 0..inst.m {
                resid[i] = inst.y[i] - (0..inst.n).map(|j| inst.a[[i, j]] * fit.mu_hat[j]).sum::<f64>();
            }
            for j in 0..inst.n {
                let corr: f64 = (0..inst.m).map(|i| inst.a[[i, j]] * resid[i]).sum();
                let expected = fit.mu_hat[j] + corr / (1.0 - k / inst.m as f64);
                assert!((d[j] - expected).abs() < 1e-12);
            }
            assert!(gamma_hat(&inst, &fit).unwrap() > 0.0);
        }
    }

    #[test]
    fn exact_fit_has_zero_noise_estimate() {
        let a = Array2::from_shape_fn((4, 2), |(i, j)| (i + 2 * j) as f64 + 1.0);
        let inst = ModelInstance::from_parts(a, array![1.0, 0.0], Array1::zeros(4), 0.0).unwrap();
        assert_eq!(gamma_hat(&inst, &fit_of(array![1.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn dof_limit_rejected() {
        let inst = ModelInstance::from_parts(Array2::eye(3), array![1.0, 1.0, 1.0], Array1::zeros(3), 0.0).unwrap();
        let full = fit_of(array![1.0, 2.0, 3.0]);
        assert!(matches!(debiased_lasso(&inst, &full), Err(Error::DofUndefined { support: 3, m: 3 })));
        assert!(gamma_hat(&inst, &full).is_err());
    }

    #[test]
    fn interval_widths() {
        let d = array![0.0, 1.0];
        let (lo, hi) = confidence_intervals(&d, 2.0, 0.05).unwrap();
        assert!(((&hi - &lo)[0] - 2.0 * 2.0 * 1.959963984540054).abs() < 1e-10);
        let (lo, hi) = confidence_intervals(&d, 2.0, 1.0 - 1e-12).unwrap();
        assert!((&hi - &lo).iter().all(|w| *w < 1e-10));
        let (lo, hi) = confidence_intervals(&d, 0.0, 0.05).unwrap();
        assert_eq!(lo, d);
        assert_eq!(hi, d);
        assert!(confidence_intervals(&d, 1.0, 0.0).is_err());
        assert!(confidence_intervals(&d, 1.0, 1.0).is_err());
    }

    #[test]
    fn coverage_extremes() {
        let lo = array![0.0, 0.0, 0.0];
        let hi = array![1.0, 1.0, 1.0];
        assert_eq!(empirical_coverage(&lo, &hi, &array![0.5, 0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(empirical_coverage(&lo, &hi, &array![-0.5, 2.0, 1.5]).unwrap(), 0.0);
        assert!(empirical_coverage(&lo, &hi, &array![0.5]).is_err());
    }

    /// Translating μ₀ (and Y) and the fit by Δ on the fit's support leaves
    /// the residual and ‖μ̂‖₀ fixed, so μ̂ᵈ shifts by Δ and coverage is unchanged.
    #[test]
    fn coverage_translation_invariant() {
        let inst = instance(7);
        let fit = solve_lasso(&inst, 0.3, &SolverConfig::lasso()).unwrap();
        let delta = fit.mu_hat.mapv(|v| if v != 0.0 { 0.75 } else { 0.0 });
        let shifted = ModelInstance::from_parts(inst.a.clone(), &inst.mu0 + &delta, inst.xi.clone(), inst.sigma).unwrap();
        let shifted_fit = fit_of(&fit.mu_hat + &delta);
        let base = InferenceReport::new(&inst, &fit, 0.05).unwrap();
        let moved = InferenceReport::new(&shifted, &shifted_fit, 0.05).unwrap();
        assert!((&moved.mu_debiased - &base.mu_debiased - &delta).iter().all(|v| v.abs() < 1e-12));
        assert_eq!(moved.coverage, base.coverage);
    }

    #[test]
    fn csv_and_json() {
        let inst = instance(8);
        let fit = solve_lasso(&inst, 0.3, &SolverConfig::lasso()).unwrap();
        let report = InferenceReport::new(&inst, &fit, 0.1).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "j,mu0,mu_hat,mu_debiased,lower,upper,covered");
        assert_eq!(lines.count(), inst.n);
        let back: InferenceReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
        assert_eq!(back, report);
    }
}
