//! Replicated Monte Carlo drivers and one-dimensional distribution distances.
//!
//! Every driver fans out over `(design slot, replication)` with rayon and
//! collects rows in that order, so the output depends only on the config and
//! the master seed. Instances come from [`InstanceKey`]`(seed, slot, rep)`;
//! the signal stream is shared across slots, so designs are compared on the
//! same `μ₀` draws.

mod distance;
mod runs;
mod table;

use serde::{Deserialize, Serialize};

pub use distance::{
    bootstrap_ratio_ci, bootstrap_se, ks_distance, mean, quantile_sorted, quantiles, variance, wasserstein2_1d,
};
pub use runs::{
    run_cost_compare, run_coverage, run_non_universality, run_qq, run_residual_check, run_risk_curve,
    run_sparsity_check, NonUniversalityConfig,
};
pub use table::{Cell, ExperimentResult, Metadata};

use crate::error::{Error, Result};
use crate::models::{DesignKind, InstanceKey, NoiseKind, PriorKind};
use crate::scalar::RobustLoss;

/// Quantile levels in QQ outputs.
pub const QQ_LEVELS: usize = 199;
/// Resamples behind every bootstrap standard error or interval.
pub const BOOTSTRAP_RESAMPLES: usize = 500;
/// Size of the population sample quantiles are compared against.
pub const POPULATION_DRAWS: usize = 1_000_000;
/// Noise draws feeding the robust fixed point.
pub const ROBUST_NOISE_DRAWS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    Ridge,
    Lasso,
    Robust { loss: RobustLoss },
    Lse,
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Ridge => "ridge",
            Estimator::Lasso => "lasso",
            Estimator::Robust { .. } => "robust",
            Estimator::Lse => "lse",
        }
    }
}

/// Noise used by each design slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// Each design gets noise of its own entry law: Student-t designs get
    /// Student-t noise with the same df, every other design Gaussian noise.
    Matched { sigma: f64 },
    /// One kind for every slot, or one per slot.
    Fixed { kinds: Vec<NoiseKind> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub designs: Vec<DesignKind>,
    pub noise: NoiseSpec,
    pub prior: PriorKind,
    pub estimator: Estimator,
    /// Strictly increasing penalty levels.
    pub lambdas: Vec<f64>,
    pub reps: usize,
    pub master_seed: u64,
    pub alpha: Option<f64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.m == 0 || self.n == 0 {
            return bad(format!("dimensions must be positive, got m = {}, n = {}", self.m, self.n));
        }
        if self.reps == 0 {
            return bad("reps must be >= 1".into());
        }
        if self.designs.is_empty() {
            return bad("at least one design is required".into());
        }
        for d in &self.designs {
            d.validate()?;
        }
        self.prior.validate()?;
        match &self.noise {
            NoiseSpec::Matched { sigma } => {
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return bad(format!("noise sigma must be >= 0, got {sigma}"));
                }
            }
            NoiseSpec::Fixed { kinds } => {
                if kinds.len() != 1 && kinds.len() != self.designs.len() {
                    return bad(format!("give one noise kind or one per design ({}), got {}", self.designs.len(), kinds.len()));
                }
                for k in kinds {
                    k.validate()?;
                }
            }
        }
        if self.estimator != Estimator::Lse {
            if self.lambdas.is_empty() {
                return bad("the lambda grid is empty".into());
            }
            if self.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                return bad("lambdas must be positive and finite".into());
            }
            if self.lambdas.windows(2).any(|w| w[1] <= w[0]) {
                return bad("the lambda grid must be strictly increasing".into());
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return bad(format!("alpha must lie in (0, 1), got {a}"));
            }
        }
        Ok(())
    }

    pub fn noise_for(&self, slot: usize) -> NoiseKind {
        match &self.noise {
            NoiseSpec::Matched { sigma } => self.designs[slot].matched_noise(*sigma),
            NoiseSpec::Fixed { kinds } if kinds.len() == 1 => kinds[0],
            NoiseSpec::Fixed { kinds } => kinds[slot],
        }
    }

    pub fn delta(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    pub(crate) fn key(&self, slot: usize, rep: usize) -> InstanceKey {
        InstanceKey::new(self.master_seed, slot as u64, rep as u64)
    }

    pub(crate) fn single_lambda(&self) -> Result<f64> {
        match self.lambdas.as_slice() {
            [lam] => Ok(*lam),
            other => Err(Error::InvalidParameter(format!("this experiment takes one lambda, got {}", other.len()))),
        }
    }
}
