use ndarray::Array1;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::PriorKind;
use crate::quadrature::GaussHermite;
use crate::rng::Stream;

/// The mixing law `Π` of the signal coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SignalDistribution {
    /// `n⁻¹ Σⱼ δ_{μ₀ⱼ}` for a realized signal vector.
    EmpiricalVector { mu0: Vec<f64> },
    /// `N(0, sd²)`, integrated with Gauss–Hermite nodes.
    AnalyticGaussian { sd: f64 },
    /// Finite mixture of point masses.
    Discrete { atoms: Vec<f64>, weights: Vec<f64> },
}

impl SignalDistribution {
    pub fn empirical(mu0: &Array1<f64>) -> Self {
        SignalDistribution::EmpiricalVector { mu0: mu0.to_vec() }
    }

    pub fn point_mass(value: f64) -> Self {
        SignalDistribution::Discrete { atoms: vec![value], weights: vec![1.0] }
    }

    /// The analytic law behind a prior kind.
    pub fn from_prior(prior: &PriorKind) -> Self {
        match *prior {
            PriorKind::GaussianIid { sd } => SignalDistribution::AnalyticGaussian { sd },
            PriorKind::PointMass { value } => SignalDistribution::point_mass(value),
            PriorKind::SparseTwoPoint { value, fraction } => SignalDistribution::Discrete {
                atoms: vec![value, 0.0],
                weights: vec![fraction, 1.0 - fraction],
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            SignalDistribution::EmpiricalVector { mu0 } => {
                if mu0.is_empty() {
                    return Err(Error::EmptySample);
                }
                if mu0.iter().any(|v| !v.is_finite()) {
                    return bad("signal vector has non-finite entries".into());
                }
            }
            SignalDistribution::AnalyticGaussian { sd } => {
                if !(*sd >= 0.0 && sd.is_finite()) {
                    return bad(format!("signal sd must be finite and >= 0, got {sd}"));
                }
            }
            SignalDistribution::Discrete { atoms, weights } => {
                if atoms.is_empty() || atoms.len() != weights.len() {
                    return bad("discrete signal needs matching, nonempty atoms and weights".into());
                }
                let total: f64 = weights.iter().sum();
                if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
                    return bad(format!("discrete signal weights must be >= 0 and sum to 1, got {total}"));
                }
            }
        }
        Ok(())
    }

    /// `(value, weight)` pairs whose weighted sums give expectations over `Π`.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            SignalDistribution::EmpiricalVector { mu0 } => {
                let w = 1.0 / mu0.len() as f64;
                mu0.iter().map(|&v| (v, w)).collect()
            }
            SignalDistribution::AnalyticGaussian { sd } => {
                if *sd == 0.0 {
                    return vec![(0.0, 1.0)];
                }
                let gh = GaussHermite::default();
                gh.nodes.iter().zip(&gh.weights).map(|(&x, &w)| (sd * x, w)).collect()
            }
            SignalDistribution::Discrete { atoms, weights } => {
                atoms.iter().copied().zip(weights.iter().copied()).filter(|(_, w)| *w > 0.0).collect()
            }
        }
    }

    /// `E Π²`
    pub fn second_moment(&self) -> f64 {
        match self {
            SignalDistribution::EmpiricalVector { mu0 } => mu0.iter().map(|v| v * v).sum::<f64>() / mu0.len() as f64,
            SignalDistribution::AnalyticGaussian { sd } => sd * sd,
            SignalDistribution::Discrete { atoms, weights } => atoms.iter().zip(weights).map(|(a, w)| w * a * a).sum(),
        }
    }

    /// A length-`n` signal: the stored vector itself, or i.i.d. draws from the law.
    pub fn realize(&self, n: usize, rng: &mut Stream) -> Result<Array1<f64>> {
        match self {
            SignalDistribution::EmpiricalVector { mu0 } => {
                if mu0.len() != n {
                    return Err(Error::Dimension(format!("signal vector has {} entries, expected {n}", mu0.len())));
                }
                Ok(Array1::from_vec(mu0.clone()))
            }
            SignalDistribution::AnalyticGaussian { sd } => {
                Ok(Array1::from_shape_fn(n, |_| sd * rng.sample::<f64, _>(StandardNormal)))
            }
            SignalDistribution::Discrete { atoms, weights } => Ok(Array1::from_shape_fn(n, |_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (a, w) in atoms.iter().zip(weights) {
                    acc += w;
                    if u < acc {
                        return *a;
                    }
                }
                *atoms.last().unwrap()
            })),
        }
    }
}
