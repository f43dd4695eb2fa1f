use ndarray::{Array1, Zip};

use super::{check_lambda, FitResult, SolverConfig};
use crate::error::Result;
use crate::models::ModelInstance;
use crate::scalar::soft_threshold;

/// Cap on consecutive active-set sweeps between two full sweeps.
const MAX_ACTIVE_SWEEPS: usize = 1_000;

pub fn lasso_objective(inst: &ModelInstance, mu: &Array1<f64>, lam: f64) -> f64 {
    let r = &inst.y - &inst.a.dot(mu);
    0.5 * r.dot(&r) + lam * mu.iter().map(|v| v.abs()).sum::<f64>()
}

/// Largest distance of `A_jᵀ(Y − Aμ)` to `λ ∂|μ_j|`, recomputed from scratch.
pub fn lasso_kkt_residual(inst: &ModelInstance, mu: &Array1<f64>, lam: f64) -> f64 {
    let r = &inst.y - &inst.a.dot(mu);
    let grad = inst.a.t().dot(&r);
    kkt_from_gradient(&grad, mu, lam)
}

fn kkt_from_gradient(grad: &Array1<f64>, mu: &Array1<f64>, lam: f64) -> f64 {
    Zip::from(grad).and(mu).fold(0.0f64, |acc, &g, &b| {
        let d = if b > 0.0 {
            (g - lam).abs()
        } else if b < 0.0 {
            (g + lam).abs()
        } else {
            (g.abs() - lam).max(0.0)
        };
        acc.max(d)
    })
}

struct CoordinateDescent<'a> {
    inst: &'a ModelInstance,
    lam: f64,
    col_sq: Vec<f64>,
    mu: Array1<f64>,
    resid: Array1<f64>,
}

impl CoordinateDescent<'_> {
    /// Exact minimization along coordinate `j`; returns `|Δμ_j| ‖A_j‖²`.
    #[inline]
    fn update(&mut self, j: usize) -> f64 {
        let sq = self.col_sq[j];
        if sq == 0.0 {
            return 0.0;
        }
        let col = self.inst.a.column(j);
        let old = self.mu[j];
        let z = old + col.dot(&self.resid) / sq;
        let new = soft_threshold(z, self.lam / sq);
        let delta = new - old;
        if delta != 0.0 {
            self.resid.scaled_add(-delta, &col);
            self.mu[j] = new;
        }
        delta.abs() * sq
    }

    fn sweep<I: Iterator<Item = usize>>(&mut self, coords: I) -> f64 {
        let mut max_change = 0.0f64;
        for j in coords {
            max_change = max_change.max(self.update(j));
        }
        max_change
    }

    fn objective(&self) -> f64 {
        0.5 * self.resid.dot(&self.resid) + self.lam * self.mu.iter().map(|v| v.abs()).sum::<f64>()
    }
}

pub(crate) fn coordinate_descent(
    inst: &ModelInstance,
    lam: f64,
    cfg: &SolverConfig,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<FitResult> {
    check_lambda(lam)?;
    cfg.validate(inst.n)?;
    let a = &inst.a;
    let col_sq: Vec<f64> = a.columns().into_iter().map(|c| c.dot(&c)).collect();
    let mu = cfg.warm_start.clone().unwrap_or_else(|| Array1::zeros(inst.n));
    let resid = &inst.y - &a.dot(&mu);
    let mut cd = CoordinateDescent { inst, lam, col_sq, mu, resid };

    let mut sweeps = 0;
    let mut kkt = f64::INFINITY;
    let mut converged = false;
    while sweeps < cfg.max_iter {
        cd.sweep(0..inst.n);
        sweeps += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.push(cd.objective());
        }
        let grad = a.t().dot(&cd.resid);
        kkt = kkt_from_gradient(&grad, &cd.mu, lam);
        if kkt <= cfg.tol {
            converged = true;
            break;
        }
        // Settle the current support before paying for another full sweep.
        let active: Vec<usize> = (0..inst.n).filter(|&j| cd.mu[j] != 0.0).collect();
        for _ in 0..MAX_ACTIVE_SWEEPS {
            if sweeps >= cfg.max_iter {
                break;
            }
            let change = cd.sweep(active.iter().copied());
            sweeps += 1;
            if let Some(t) = trace.as_deref_mut() {
                t.push(cd.objective());
            }
            if change <= 0.1 * cfg.tol {
                break;
            }
        }
    }
    if !converged {
        kkt = lasso_kkt_residual(inst, &cd.mu, lam);
        converged = kkt <= cfg.tol;
    }
    Ok(FitResult {
        objective: lasso_objective(inst, &cd.mu, lam),
        mu_hat: cd.mu,
        kkt_residual: kkt,
        iterations: sweeps,
        converged,
    })
}

/// Cyclic coordinate descent for `½‖Aμ − Y‖² + λ‖μ‖₁`.
///
/// Coordinates are updated by exact soft-thresholding, so inactive
/// coordinates are exactly zero. Returns the last iterate with
/// `converged = false` if the KKT residual is still above `cfg.tol` after
/// `cfg.max_iter` sweeps.
pub fn solve_lasso(inst: &ModelInstance, lam: f64, cfg: &SolverConfig) -> Result<FitResult> {
    coordinate_descent(inst, lam, cfg, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_instance, DesignKind, InstanceKey, NoiseKind, PriorKind};
    use crate::solvers::{lasso_subgradient, sparsity};
    use ndarray::{s, Array2};

    fn random_instance(m: usize, n: usize, seed: u64) -> ModelInstance {
        build_instance(
            &DesignKind::GaussianIid,
            &NoiseKind::Gaussian { sigma: 0.5 },
            &PriorKind::GaussianIid { sd: 1.0 },
            m,
            n,
            InstanceKey::new(seed, 0, 0),
        )
        .unwrap()
    }

    /// Gaussian elimination with partial pivoting.
    fn gauss_solve(mut a: Array2<f64>, mut b: Array1<f64>) -> Option<Array1<f64>> {
        let k = b.len();
        for c in 0..k {
            let p = (c..k).max_by(|&i, &j| a[[i, c]].abs().total_cmp(&a[[j, c]].abs()))?;
            if a[[p, c]].abs() < 1e-14 {
                return None;
            }
            for j in 0..k {
                a.swap([c, j], [p, j]);
            }
            b.swap(c, p);
            for i in c + 1..k {
                let f = a[[i, c]] / a[[c, c]];
                for j in c..k {
                    a[[i, j]] -= f * a[[c, j]];
                }
                b[i] -= f * b[c];
            }
        }
        let mut x = Array1::zeros(k);
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| a[[i, j]] * x[j]).sum();
            x[i] = (b[i] - s) / a[[i, i]];
        }
        Some(x)
    }

    /// Minimum of the Lasso cost over all 3^n sign patterns: on each pattern
    /// the cost is a quadratic whose stationary point is kept if it is
    /// sign-consistent.
    fn sign_pattern_oracle(inst: &ModelInstance, lam: f64) -> (Array1<f64>, f64) {
        let n = inst.n;
        let mut best = (Array1::zeros(n), lasso_objective(inst, &Array1::zeros(n), lam));
        for code in 0..3usize.pow(n as u32) {
            let mut signs = vec![0.0; n];
            let mut c = code;
            for s in signs.iter_mut() {
                *s = [0.0, 1.0, -1.0][c % 3];
                c /= 3;
            }
            let support: Vec<usize> = (0..n).filter(|&j| signs[j] != 0.0).collect();
            if support.is_empty() {
                continue;
            }
            let k = support.len();
            let sub = Array2::from_shape_fn((inst.m, k), |(i, l)| inst.a[[i, support[l]]]);
            let gram = sub.t().dot(&sub);
            let rhs = sub.t().dot(&inst.y) - Array1::from_shape_fn(k, |l| lam * signs[support[l]]);
            let Some(sol) = gauss_solve(gram, rhs) else { continue };
            if sol.iter().zip(&support).any(|(v, &j)| v * signs[j] <= 0.0) {
                continue;
            }
            let mut mu = Array1::zeros(n);
            for (l, &j) in support.iter().enumerate() {
                mu[j] = sol[l];
            }
            let obj = lasso_objective(inst, &mu, lam);
            if obj < best.1 {
                best = (mu, obj);
            }
        }
        best
    }

    #[test]
    fn large_lambda_gives_zero() {
        let inst = random_instance(30, 40, 1);
        let lam_max = inst.a.t().dot(&inst.y).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let fit = solve_lasso(&inst, lam_max * 1.0001, &SolverConfig::lasso()).unwrap();
        assert!(fit.mu_hat.iter().all(|&v| v == 0.0));
        assert!(fit.converged);
        assert_eq!(sparsity(&fit, 0.0), 0.0);
        let v = lasso_subgradient(&inst, &fit, lam_max * 1.0001);
        assert!(v.iter().all(|x| x.abs() <= 1.0));
    }

    #[test]
    fn orthonormal_columns_are_separable() {
        let m = 6;
        let eye: Array2<f64> = Array2::eye(m);
        let a = eye.slice(s![.., 0..4]).to_owned();
        let inst = ModelInstance::from_parts(a, Array1::from_vec(vec![2.0, -0.3, 0.0, 1.1]), Array1::from_vec(vec![0.1, -0.2, 0.4, 0.05, 0.3, -0.1]), 0.3).unwrap();
        let lam = 0.5;
        let fit = solve_lasso(&inst, lam, &SolverConfig::lasso()).unwrap();
        let aty = inst.a.t().dot(&inst.y);
        for j in 0..4 {
            assert!((fit.mu_hat[j] - soft_threshold(aty[j], lam)).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_sign_pattern_brute_force() {
        for seed in 0..10 {
            let inst = random_instance(8, 5, 100 + seed);
            for lam in [0.05, 0.3, 1.0] {
                let (oracle, oracle_obj) = sign_pattern_oracle(&inst, lam);
                let fit = solve_lasso(&inst, lam, &SolverConfig::lasso()).unwrap();
                let diff = (&fit.mu_hat - &oracle).iter().fold(0.0f64, |a, v| a.max(v.abs()));
                assert!(diff <= 1e-8, "seed {seed} lam {lam}: {diff}");
                assert!(fit.objective <= oracle_obj + 1e-12);
            }
        }
    }

    #[test]
    fn objective_is_monotone_per_sweep() {
        let inst = random_instance(60, 90, 7);
        let mut trace = Vec::new();
        let fit = coordinate_descent(&inst, 0.1, &SolverConfig::lasso(), Some(&mut trace)).unwrap();
        assert!(fit.converged);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn certificates_and_subgradient_box() {
        let inst = random_instance(60, 90, 8);
        let lam = 0.2;
        let fit = solve_lasso(&inst, lam, &SolverConfig::lasso()).unwrap();
        assert!(fit.converged);
        assert!(lasso_kkt_residual(&inst, &fit.mu_hat, lam) <= 1e-8);
        let v = lasso_subgradient(&inst, &fit, lam);
        let tol = 1e-8 / lam;
        for (vj, mj) in v.iter().zip(fit.mu_hat.iter()) {
            assert!(vj.abs() <= 1.0 + tol);
            if *mj != 0.0 {
                assert!((vj - mj.signum()).abs() <= tol);
            }
        }
        // exact zeros: the support does not move for thresholds in [0, 1e-10]
        assert_eq!(sparsity(&fit, 0.0), sparsity(&fit, 1e-10));
    }

    #[test]
    fn scaling_leaves_argmin_fixed() {
        let inst = random_instance(40, 50, 9);
        let lam = 0.3;
        let c = 3.0;
        let scaled = ModelInstance { a: &inst.a * c, y: &inst.y * c, ..inst.clone() };
        let cfg = SolverConfig { tol: 1e-11, ..SolverConfig::lasso() };
        let base = solve_lasso(&inst, lam, &cfg).unwrap();
        let other = solve_lasso(&scaled, lam * c * c, &SolverConfig { tol: 1e-11 * c * c, ..cfg }).unwrap();
        let diff = (&base.mu_hat - &other.mu_hat).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(diff < 1e-9, "{diff}");
    }

    #[test]
    fn reports_nonconvergence() {
        let inst = random_instance(60, 90, 10);
        let fit = solve_lasso(&inst, 0.01, &SolverConfig { max_iter: 1, ..SolverConfig::lasso() }).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 1);
        assert!(fit.kkt_residual > 1e-8);
    }

    #[test]
    fn warm_start_reaches_same_solution() {
        let inst = random_instance(50, 70, 11);
        let cold = solve_lasso(&inst, 0.2, &SolverConfig::lasso()).unwrap();
        let prev = solve_lasso(&inst, 0.5, &SolverConfig::lasso()).unwrap();
        let warm = solve_lasso(&inst, 0.2, &SolverConfig::lasso().with_warm_start(prev.mu_hat)).unwrap();
        let diff = (&cold.mu_hat - &warm.mu_hat).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(diff < 1e-7, "{diff}");
    }
}
