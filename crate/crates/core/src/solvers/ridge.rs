use ndarray::Array1;

use super::{check_lambda, sup_norm, FitResult, Gram};
use crate::error::Result;
use crate::models::ModelInstance;

const RIDGE_TOL: f64 = 1e-10;

/// Ridge solver that keeps the Gram matrix of one instance, so a λ-path
/// costs one cross-product and one Cholesky factorization per λ.
#[derive(Debug, Clone)]
pub struct RidgeSolver<'a> {
    inst: &'a ModelInstance,
    gram: Gram,
    at_y: Array1<f64>,
}

impl<'a> RidgeSolver<'a> {
    pub fn new(inst: &'a ModelInstance) -> Self {
        RidgeSolver { inst, gram: Gram::new(inst.a.view()), at_y: inst.a.t().dot(&inst.y) }
    }

    pub fn solve(&self, lam: f64) -> Result<FitResult> {
        check_lambda(lam)?;
        let a = &self.inst.a;
        let factor = self.gram.factor(1.0, lam)?;
        // (AᵀA + λ)⁻¹AᵀY, or Aᵀ(AAᵀ + λ)⁻¹Y when n > m
        let mut mu = if self.gram.dual {
            a.t().dot(&factor.solve(&self.inst.y))
        } else {
            factor.solve(&self.at_y)
        };
        // one round of iterative refinement on the normal equations
        let residual_eq = |mu: &Array1<f64>| &self.at_y - &(a.t().dot(&a.dot(mu)) + mu * lam);
        let defect = residual_eq(&mu);
        let correction = if self.gram.dual {
            // (AᵀA + λ)⁻¹ d = (d − Aᵀ(AAᵀ + λ)⁻¹A d) / λ
            let ad = a.dot(&defect);
            (&defect - &a.t().dot(&factor.solve(&ad))) / lam
        } else {
            factor.solve(&defect)
        };
        mu += &correction;
        let kkt = sup_norm(&residual_eq(&mu));
        Ok(FitResult {
            objective: ridge_objective(self.inst, &mu, lam),
            mu_hat: mu,
            kkt_residual: kkt,
            iterations: 1,
            converged: kkt <= RIDGE_TOL,
        })
    }
}

/// `μ̂ = (AᵀA + λI)⁻¹AᵀY`.
pub fn solve_ridge(inst: &ModelInstance, lam: f64) -> Result<FitResult> {
    RidgeSolver::new(inst).solve(lam)
}

pub fn ridge_objective(inst: &ModelInstance, mu: &Array1<f64>, lam: f64) -> f64 {
    let r = &inst.y - &inst.a.dot(mu);
    0.5 * r.dot(&r) + 0.5 * lam * mu.dot(mu)
}
