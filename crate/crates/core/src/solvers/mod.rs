//! Minimizers of the regularized least-squares and robust costs.
//!
//! All costs are in their unnormalized form with `A` already scaled by
//! `1/sqrt(m)`:
//!
//! * Ridge: `½‖Aμ − Y‖² + (λ/2)‖μ‖²`
//! * Lasso: `½‖Aμ − Y‖² + λ‖μ‖₁`
//! * robust: `Σᵢ ψ((Aμ)ᵢ − Yᵢ) + (λ/2)‖μ‖²`
//! * least squares: `½‖Aμ − Y‖²`

mod lasso;
mod lse;
mod ridge;
mod robust;

pub use lasso::{lasso_kkt_residual, lasso_objective, solve_lasso};
pub use lse::solve_lse;
pub use ridge::{ridge_objective, solve_ridge, RidgeSolver};
pub use robust::{robust_objective, solve_robust};

use faer::linalg::solvers::Llt;
use faer::prelude::Solve;
use faer::{Mat, Side};
use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelInstance;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Sweeps (coordinate descent) or iterations (ADMM).
    pub max_iter: usize,
    pub tol: f64,
    pub warm_start: Option<Array1<f64>>,
}

impl SolverConfig {
    pub fn lasso() -> Self {
        SolverConfig { max_iter: 100_000, tol: 1e-8, warm_start: None }
    }

    pub fn admm() -> Self {
        SolverConfig { max_iter: 200_000, tol: 1e-7, warm_start: None }
    }

    pub fn with_warm_start(mut self, start: Array1<f64>) -> Self {
        self.warm_start = Some(start);
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "solver needs max_iter >= 1 and tol > 0, got ({}, {})",
                self.max_iter, self.tol
            )));
        }
        if let Some(w) = &self.warm_start {
            if w.len() != n {
                return Err(Error::Dimension(format!("warm start has {} entries, expected {n}", w.len())));
            }
        }
        Ok(())
    }
}

/// Estimator output with its optimality certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub mu_hat: Array1<f64>,
    /// Unnormalized cost at `mu_hat`.
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    /// Estimation error `μ̂ − μ₀`.
    pub fn error(&self, inst: &ModelInstance) -> Array1<f64> {
        &self.mu_hat - &inst.mu0
    }

    /// Residual `Y − Aμ̂`.
    pub fn residual(&self, inst: &ModelInstance) -> Array1<f64> {
        &inst.y - &inst.a.dot(&self.mu_hat)
    }

    /// `‖μ̂ − μ₀‖² / n`
    pub fn risk(&self, inst: &ModelInstance) -> f64 {
        let w = self.error(inst);
        w.dot(&w) / inst.n as f64
    }

    /// `‖μ̂‖₀`, counting exact zeros only.
    pub fn support_size(&self) -> usize {
        self.mu_hat.iter().filter(|v| **v != 0.0).count()
    }
}

/// Fraction of coordinates with `|μ̂_j| > zero_tol`.
pub fn sparsity(fit: &FitResult, zero_tol: f64) -> f64 {
    let n = fit.mu_hat.len();
    if n == 0 {
        return 0.0;
    }
    fit.mu_hat.iter().filter(|v| v.abs() > zero_tol).count() as f64 / n as f64
}

/// Lasso subgradient `λ⁻¹ Aᵀ(Y − Aμ̂)`.
pub fn lasso_subgradient(inst: &ModelInstance, fit: &FitResult, lam: f64) -> Array1<f64> {
    inst.a.t().dot(&fit.residual(inst)) / lam
}

pub(crate) fn check_lambda(lam: f64) -> Result<()> {
    if lam > 0.0 && lam.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("regularization lambda must be positive, got {lam}")))
    }
}

pub(crate) fn sup_norm(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Cross-product of the design on its smaller side: `AᵀA` when `n <= m`
/// (primal), `AAᵀ` otherwise (dual).
#[derive(Debug, Clone)]
pub(crate) struct Gram {
    pub matrix: Array2<f64>,
    pub dual: bool,
}

impl Gram {
    pub fn new(a: ArrayView2<f64>) -> Self {
        let (m, n) = a.dim();
        if n <= m {
            Gram { matrix: a.t().dot(&a), dual: false }
        } else {
            Gram { matrix: a.dot(&a.t()), dual: true }
        }
    }

    /// Cholesky factor of `scale * Gram + shift * I`.
    pub fn factor(&self, scale: f64, shift: f64) -> Result<Cholesky> {
        let k = self.matrix.nrows();
        let mat = Mat::from_fn(k, k, |i, j| scale * self.matrix[[i, j]] + if i == j { shift } else { 0.0 });
        let llt = mat
            .llt(Side::Lower)
            .map_err(|e| Error::Singular(format!("Cholesky factorization failed: {e:?}")))?;
        Ok(Cholesky(llt))
    }
}

pub(crate) struct Cholesky(Llt<f64>);

impl Cholesky {
    pub fn solve(&self, rhs: &Array1<f64>) -> Array1<f64> {
        let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = self.0.solve(&b);
        Array1::from_shape_fn(rhs.len(), |i| x[(i, 0)])
    }

    /// Diagonal of the lower Cholesky factor.
    pub fn pivots(&self) -> Array1<f64> {
        let l = self.0.L();
        Array1::from_shape_fn(l.nrows(), |i| l[(i, i)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sparsity_counts() {
        let fit = |mu: Array1<f64>| FitResult { mu_hat: mu, objective: 0.0, kkt_residual: 0.0, iterations: 0, converged: true };
        assert_eq!(sparsity(&fit(array![0.0, 0.0, 0.0]), 0.0), 0.0);
        assert_eq!(sparsity(&fit(array![1.0, -2.0, 1e-3]), 0.0), 1.0);
        assert_eq!(sparsity(&fit(array![1.0, 0.0, 1e-3, 0.0]), 1e-2), 0.25);
        assert_eq!(fit(array![1.0, 0.0, -1e-300]).support_size(), 2);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig { max_iter: 0, ..SolverConfig::lasso() }.validate(3).is_err());
        assert!(SolverConfig { tol: 0.0, ..SolverConfig::lasso() }.validate(3).is_err());
        assert!(SolverConfig::lasso().with_warm_start(Array1::zeros(2)).validate(3).is_err());
        assert!(SolverConfig::admm().validate(3).is_ok());
    }
}
