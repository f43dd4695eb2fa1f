use ndarray::{Array1, Zip};

use super::{check_lambda, sup_norm, FitResult, Gram, SolverConfig};
use crate::error::Result;
use crate::models::ModelInstance;
use crate::scalar::RobustLoss;

const RHO: f64 = 1.0;

pub fn robust_objective(inst: &ModelInstance, loss: RobustLoss, mu: &Array1<f64>, lam: f64) -> f64 {
    let fitted = inst.a.dot(mu);
    let data: f64 = Zip::from(&fitted).and(&inst.y).fold(0.0, |acc, f, y| acc + loss.value(f - y));
    data + 0.5 * lam * mu.dot(mu)
}

/// ADMM for `Σᵢ ψ((Aμ)ᵢ − Yᵢ) + (λ/2)‖μ‖²` with the splitting `z = Aμ − Y`.
///
/// The μ-step solves `(ρAᵀA + λI)μ = ρAᵀ(Y + z − u)` with one cached
/// Cholesky factor (through `AAᵀ` when `n > m`); the z-step is the prox of
/// ψ with parameter `1/ρ`. Stops when the sup-norms of the primal residual
/// `Aμ − Y − z` and of the dual residual `ρAᵀ(z − z_prev)` are both below
/// `cfg.tol`; `kkt_residual` reports the larger of the two.
pub fn solve_robust(inst: &ModelInstance, loss: RobustLoss, lam: f64, cfg: &SolverConfig) -> Result<FitResult> {
    check_lambda(lam)?;
    cfg.validate(inst.n)?;
    let a = &inst.a;
    let gram = Gram::new(a.view());
    let factor = gram.factor(RHO, lam)?;
    let mu_step = |w: &Array1<f64>| {
        if gram.dual {
            a.t().dot(&factor.solve(w)) * RHO
        } else {
            factor.solve(&(a.t().dot(w) * RHO))
        }
    };

    let mut mu = cfg.warm_start.clone().unwrap_or_else(|| Array1::zeros(inst.n));
    let mut z = a.dot(&mu) - &inst.y;
    let mut u = Array1::<f64>::zeros(inst.m);
    let tau = 1.0 / RHO;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        mu = mu_step(&(&inst.y + &z - &u));
        let shifted = a.dot(&mu) - &inst.y;
        let z_prev = std::mem::replace(&mut z, (&shifted + &u).mapv(|x| loss.prox(x, tau)));
        let primal = &shifted - &z;
        u += &primal;
        let dual = a.t().dot(&(&z - &z_prev)) * RHO;
        residual = sup_norm(&primal).max(sup_norm(&dual));
        if residual <= cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(FitResult {
        objective: robust_objective(inst, loss, &mu, lam),
        mu_hat: mu,
        kkt_residual: residual,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_instance, DesignKind, InstanceKey, NoiseKind, PriorKind};
    use crate::solvers::solve_ridge;
    use ndarray::Array2;

    fn instance(m: usize, n: usize, noise: NoiseKind, seed: u64) -> ModelInstance {
        build_instance(&DesignKind::GaussianIid, &noise, &PriorKind::GaussianIid { sd: 1.0 }, m, n, InstanceKey::new(seed, 0, 0))
            .unwrap()
    }

    #[test]
    fn zero_signal_and_noise() {
        let inst = ModelInstance::from_parts(
            Array2::from_shape_fn((6, 4), |(i, j)| ((i * 7 + j * 3) % 5) as f64 - 2.0),
            Array1::zeros(4),
            Array1::zeros(6),
            0.0,
        )
        .unwrap();
        let fit = solve_robust(&inst, RobustLoss::Absolute, 0.5, &SolverConfig::admm()).unwrap();
        assert!(fit.converged);
        assert!(fit.mu_hat.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn wide_huber_matches_ridge() {
        for (m, n) in [(60, 40), (40, 60)] {
            let inst = instance(m, n, NoiseKind::Gaussian { sigma: 1.0 }, 3);
            let lam = 0.7;
            let ridge = solve_ridge(&inst, lam).unwrap();
            let eta = 10.0 * sup_norm(&ridge.residual(&inst));
            // ψ(x) = x²/2 on |x| ≤ η, the ridge data term
            let fit = solve_robust(&inst, RobustLoss::Huber { eta }, lam, &SolverConfig { tol: 1e-9, ..SolverConfig::admm() }).unwrap();
            assert!(fit.converged);
            let diff = sup_norm(&(&fit.mu_hat - &ridge.mu_hat));
            assert!(diff <= 1e-6, "{m}x{n}: {diff}");
        }
    }

    #[test]
    fn square_loss_gradient_vanishes() {
        let inst = instance(50, 30, NoiseKind::StudentT { df: 3.0, sigma: 1.0 }, 4);
        let lam = 0.3;
        let loss = RobustLoss::huber(1.0).unwrap();
        let fit = solve_robust(&inst, loss, lam, &SolverConfig { tol: 1e-10, ..SolverConfig::admm() }).unwrap();
        let slopes = (inst.a.dot(&fit.mu_hat) - &inst.y).mapv(|x| loss.derivative(x));
        let grad = inst.a.t().dot(&slopes) + &fit.mu_hat * lam;
        assert!(sup_norm(&grad) <= 1e-8, "{}", sup_norm(&grad));
    }

    /// Subgradient descent with steps `c/√(k+1)`, keeping the best iterate.
    fn subgradient_oracle(inst: &ModelInstance, lam: f64, steps: usize) -> f64 {
        let a = &inst.a;
        let mut mu = Array1::zeros(inst.n);
        let mut best = f64::INFINITY;
        for k in 0..steps {
            let r = a.dot(&mu) - &inst.y;
            let obj = r.iter().map(|v| v.abs()).sum::<f64>() + 0.5 * lam * mu.dot(&mu);
            best = best.min(obj);
            let g = a.t().dot(&r.mapv(f64::signum)) + &mu * lam;
            mu.scaled_add(-0.05 / ((k + 1) as f64).sqrt(), &g);
        }
        best
    }

    /// Lower bound from the dual `max_{‖ν‖∞≤1} −νᵀY − ‖Aᵀν‖²/(2λ)`,
    /// maximized by accelerated projected gradient.
    fn dual_oracle(inst: &ModelInstance, lam: f64, steps: usize) -> (f64, f64) {
        let a = &inst.a;
        let lip = a.iter().map(|v| v * v).sum::<f64>() / lam;
        let value = |nu: &Array1<f64>| {
            let atn = a.t().dot(nu);
            -nu.dot(&inst.y) - atn.dot(&atn) / (2.0 * lam)
        };
        let mut nu = Array1::<f64>::zeros(inst.m);
        let mut prev = nu.clone();
        for k in 0..steps {
            let mom = (k as f64) / (k as f64 + 3.0);
            let look = &nu + &((&nu - &prev) * mom);
            let grad = -&inst.y - &(a.dot(&a.t().dot(&look)) / lam);
            prev = nu;
            nu = (&look + &(grad / lip)).mapv(|v| v.clamp(-1.0, 1.0));
        }
        let mu = -a.t().dot(&nu) / lam;
        let r = a.dot(&mu) - &inst.y;
        let primal = r.iter().map(|v| v.abs()).sum::<f64>() + 0.5 * lam * mu.dot(&mu);
        (value(&nu), primal)
    }

    #[test]
    fn absolute_loss_matches_oracles() {
        let inst = instance(20, 10, NoiseKind::Gaussian { sigma: 1.0 }, 5);
        let lam = 0.5;
        let fit = solve_robust(&inst, RobustLoss::Absolute, lam, &SolverConfig { tol: 1e-10, ..SolverConfig::admm() }).unwrap();
        assert!(fit.converged);
        let (lower, upper) = dual_oracle(&inst, lam, 200_000);
        assert!(upper - lower <= 1e-9, "duality gap {}", upper - lower);
        assert!((fit.objective - lower).abs() <= 1e-6, "{} vs {}", fit.objective, lower);
        let sub = subgradient_oracle(&inst, lam, 1_000_000);
        assert!(fit.objective <= sub + 1e-6, "{} vs {}", fit.objective, sub);
    }

    #[test]
    fn reports_nonconvergence() {
        let inst = instance(30, 20, NoiseKind::Gaussian { sigma: 1.0 }, 6);
        let fit = solve_robust(&inst, RobustLoss::Absolute, 0.5, &SolverConfig { max_iter: 2, ..SolverConfig::admm() }).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 2);
    }
}
