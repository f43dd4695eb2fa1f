use ndarray::Array1;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::fixed_point::{FixedPoint, FpModel};
use super::signal::SignalDistribution;
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::scalar::{ridge_shrink, soft_threshold};

/// Which population quantity to draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    /// Error `w* = η(μ₀ + γ*g; γ*λ/β*) − μ₀`.
    W,
    /// Residual `r* = (β*/γ*)(σξ₀ + √(γ*² − σ²) h)`.
    R,
    /// Subgradient `v* = −(β*/(γ*λ))(w* − γ*g)`.
    V,
}

/// Fixed point plus the data the population variables are built from.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationLaw {
    pub fp: FixedPoint,
    pub signal: SignalDistribution,
    /// Length of W/V draws.
    pub n: usize,
    /// Realized standardized noise `ξ₀`, required for R.
    pub noise_vector: Option<Array1<f64>>,
}

impl PopulationLaw {
    pub fn new(fp: FixedPoint, signal: SignalDistribution, n: usize, noise_vector: Option<Array1<f64>>) -> Result<Self> {
        if fp.model == FpModel::Robust {
            return Err(Error::InvalidParameter("population laws are defined for Ridge and Lasso fixed points".into()));
        }
        signal.validate()?;
        if let SignalDistribution::EmpiricalVector { mu0 } = &signal {
            if mu0.len() != n {
                return Err(Error::Dimension(format!("signal vector has {} entries, law has n = {n}", mu0.len())));
            }
        }
        Ok(PopulationLaw { fp, signal, n, noise_vector })
    }

    fn sigma(&self) -> f64 {
        self.fp.params.sigma
    }
}

/// One draw of W, R or V. W and V consume the stream identically (first
/// `g`, then the signal when it is not a stored vector), so clones of one
/// stream give W and V built on the same `g`.
pub fn sample_population(law: &PopulationLaw, which: Which, rng: &mut Stream) -> Result<Array1<f64>> {
    let fp = &law.fp;
    match which {
        Which::W | Which::V => {
            let g = Array1::from_shape_fn(law.n, |_| rng.sample::<f64, _>(StandardNormal));
            let mu0 = law.signal.realize(law.n, rng)?;
            if fp.degenerate {
                return Ok(Array1::zeros(law.n));
            }
            let (gamma, theta) = (fp.gamma_star, fp.alpha_star);
            let w = ndarray::Zip::from(&mu0).and(&g).map_collect(|&mu, &z| {
                let x = mu + gamma * z;
                let eta = match fp.model {
                    FpModel::Lasso => soft_threshold(x, theta),
                    _ => ridge_shrink(x, theta),
                };
                eta - mu
            });
            Ok(match which {
                Which::W => w,
                _ => (&w - &(&g * gamma)) * (-1.0 / theta),
            })
        }
        Which::R => {
            let xi0 = law
                .noise_vector
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("the residual law needs the realized noise vector".into()))?;
            let h = Array1::from_shape_fn(xi0.len(), |_| rng.sample::<f64, _>(StandardNormal));
            if fp.degenerate {
                return Ok(Array1::zeros(xi0.len()));
            }
            let sigma = law.sigma();
            let excess = fp.gamma_star * fp.gamma_star - sigma * sigma;
            if excess < -1e-12 * sigma * sigma {
                return Err(Error::InvalidParameter(format!("gamma* = {} is below sigma = {sigma}", fp.gamma_star)));
            }
            let spread = excess.max(0.0).sqrt();
            let scale = fp.beta_star / fp.gamma_star;
            Ok((xi0 * sigma + &(&h * spread)) * scale)
        }
    }
}
