use super::{sup_norm, FitResult, Gram};
use crate::error::{Error, Result};
use crate::models::ModelInstance;

const LSE_TOL: f64 = 1e-10;
/// Squared Cholesky pivots below this fraction of the largest one are
/// treated as rank deficiency.
const PIVOT_RATIO: f64 = 1e-13;

/// Ordinary least squares `μ̂ = (AᵀA)⁻¹AᵀY`, for `m > n`.
pub fn solve_lse(inst: &ModelInstance) -> Result<FitResult> {
    if inst.m <= inst.n {
        return Err(Error::InvalidParameter(format!(
            "least squares needs m > n, got m = {}, n = {}",
            inst.m, inst.n
        )));
    }
    let a = &inst.a;
    let gram = Gram::new(a.view());
    let factor = gram.factor(1.0, 0.0)?;
    let pivots = factor.pivots().mapv(|v| v * v);
    let largest = pivots.iter().fold(0.0f64, |acc, v| acc.max(*v));
    let smallest = pivots.iter().fold(f64::INFINITY, |acc, v| acc.min(*v));
    if !(smallest > PIVOT_RATIO * largest) {
        return Err(Error::Singular(format!(
            "AᵀA is numerically rank deficient (pivot ratio {:.3e})",
            smallest / largest
        )));
    }
    let at_y = a.t().dot(&inst.y);
    let mut mu = factor.solve(&at_y);
    let defect = |mu: &ndarray::Array1<f64>| &at_y - &a.t().dot(&a.dot(mu));
    mu += &factor.solve(&defect(&mu));
    let kkt = sup_norm(&defect(&mu));
    let r = &inst.y - &a.dot(&mu);
    Ok(FitResult {
        objective: 0.5 * r.dot(&r),
        mu_hat: mu,
        kkt_residual: kkt,
        iterations: 1,
        converged: kkt <= LSE_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_instance, DesignKind, InstanceKey, NoiseKind, PriorKind};
    use crate::solvers::solve_ridge;
    use ndarray::{array, Array2};

    #[test]
    fn identity_design_returns_response() {
        let mut a = Array2::zeros((4, 3));
        a[[0, 0]] = 1.0;
        a[[1, 1]] = 1.0;
        a[[2, 2]] = 1.0;
        let inst = ModelInstance::from_parts(a, array![1.0, -2.0, 0.5], array![0.1, 0.2, -0.3, 0.7], 1.0).unwrap();
        let fit = solve_lse(&inst).unwrap();
        for j in 0..3 {
            assert!((fit.mu_hat[j] - inst.y[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn ridge_limit_and_normal_equations() {
        for seed in 0..5 {
            let inst = build_instance(
                &DesignKind::GaussianIid,
                &NoiseKind::Gaussian { sigma: 1.0 },
                &PriorKind::GaussianIid { sd: 1.0 },
                120,
                40,
                InstanceKey::new(seed, 0, 0),
            )
            .unwrap();
            let lse = solve_lse(&inst).unwrap();
            let ridge = solve_ridge(&inst, 1e-10).unwrap();
            let diff = (&lse.mu_hat - &ridge.mu_hat).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(diff <= 1e-6, "{diff}");
            let a = &inst.a;
            let normal = a.t().dot(&a.dot(&lse.mu_hat)) - a.t().dot(&inst.y);
            assert!(sup_norm(&normal) <= 1e-10);
            assert!(lse.converged);
        }
    }

    #[test]
    fn rejects_rank_deficiency() {
        let a = Array2::from_shape_vec((3, 2), vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0]).unwrap();
        let inst = ModelInstance::from_parts(a, array![1.0, 1.0], array![0.0, 0.0, 0.0], 0.0).unwrap();
        assert!(matches!(solve_lse(&inst), Err(Error::Singular(_))));
        let wide = ModelInstance::from_parts(Array2::eye(2), array![1.0, 1.0], array![0.0, 0.0], 0.0).unwrap();
        assert!(solve_lse(&wide).is_err());
    }
}
