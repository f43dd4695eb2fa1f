//! Proximal calculus for the ℓ1 / ℓ2 penalties and the robust losses.
//!
//! Everything here is a pure function of its arguments. The `RobustLoss`
//! methods skip argument validation and are what the solvers and quadrature
//! loops call; the free functions of the same name check `tau > 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `sign(z) * max(|z| - lam, 0)`, the prox of `lam * |.|`.
#[inline]
pub fn soft_threshold(z: f64, lam: f64) -> f64 {
    if z > lam {
        z - lam
    } else if z < -lam {
        z + lam
    } else {
        0.0
    }
}

/// `z / (1 + lam)`, the prox of `lam * (.)^2 / 2`.
#[inline]
pub fn ridge_shrink(z: f64, lam: f64) -> f64 {
    z / (1.0 + lam)
}

/// Data-fitting loss applied to residuals in robust regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RobustLoss {
    /// `|x|`
    Absolute,
    /// Quadratic on `[-eta, eta]`, linear with slope `eta` outside.
    Huber { eta: f64 },
    /// `x^2 / 2`
    SquareHalf,
}

impl RobustLoss {
    pub fn huber(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("Huber eta must be positive, got {eta}")));
        }
        Ok(RobustLoss::Huber { eta })
    }

    /// Essential supremum of `|psi'|`, or `None` for the unbounded square loss.
    pub fn derivative_bound(&self) -> Option<f64> {
        match *self {
            RobustLoss::Absolute => Some(1.0),
            RobustLoss::Huber { eta } => Some(eta),
            RobustLoss::SquareHalf => None,
        }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            RobustLoss::Absolute => x.abs(),
            RobustLoss::Huber { eta } => {
                let a = x.abs();
                if a <= eta {
                    0.5 * x * x
                } else {
                    eta * a - 0.5 * eta * eta
                }
            }
            RobustLoss::SquareHalf => 0.5 * x * x,
        }
    }

    /// A (sub)gradient of the loss; zero at the kink of `|x|`.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            RobustLoss::Absolute => {
                if x == 0.0 {
                    0.0
                } else {
                    x.signum()
                }
            }
            RobustLoss::Huber { eta } => x.clamp(-eta, eta),
            RobustLoss::SquareHalf => x,
        }
    }

    /// `argmin_z (x - z)^2 / (2 tau) + psi(z)`; requires `tau > 0`.
    #[inline]
    pub fn prox(&self, x: f64, tau: f64) -> f64 {
        match *self {
            RobustLoss::Absolute => soft_threshold(x, tau),
            RobustLoss::Huber { eta } => {
                if x.abs() <= eta * (1.0 + tau) {
                    x / (1.0 + tau)
                } else {
                    x - tau * eta * x.signum()
                }
            }
            RobustLoss::SquareHalf => x / (1.0 + tau),
        }
    }

    /// Almost-everywhere derivative of `x -> prox(x, tau)`.
    ///
    /// At a branch boundary the inner-branch value is returned.
    #[inline]
    pub fn prox_derivative(&self, x: f64, tau: f64) -> f64 {
        match *self {
            RobustLoss::Absolute => {
                if x.abs() <= tau {
                    0.0
                } else {
                    1.0
                }
            }
            RobustLoss::Huber { eta } => {
                if x.abs() <= eta * (1.0 + tau) {
                    1.0 / (1.0 + tau)
                } else {
                    1.0
                }
            }
            RobustLoss::SquareHalf => 1.0 / (1.0 + tau),
        }
    }

    /// `min_z (x - z)^2 / (2 tau) + psi(z)`; requires `tau > 0`.
    #[inline]
    pub fn envelope(&self, x: f64, tau: f64) -> f64 {
        match *self {
            RobustLoss::Absolute => {
                let a = x.abs();
                if a <= tau {
                    x * x / (2.0 * tau)
                } else {
                    a - 0.5 * tau
                }
            }
            RobustLoss::Huber { eta } => {
                let a = x.abs();
                if a <= eta * (1.0 + tau) {
                    x * x / (2.0 * (1.0 + tau))
                } else {
                    eta * a - 0.5 * eta * eta * (1.0 + tau)
                }
            }
            RobustLoss::SquareHalf => x * x / (2.0 * (1.0 + tau)),
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("prox parameter tau must be positive, got {tau}")))
    }
}

pub fn prox(loss: RobustLoss, x: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(loss.prox(x, tau))
}

pub fn prox_weak_derivative(loss: RobustLoss, x: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(loss.prox_derivative(x, tau))
}

pub fn moreau_envelope(loss: RobustLoss, x: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(loss.envelope(x, tau))
}

pub fn loss_value(loss: RobustLoss, x: f64) -> f64 {
    loss.value(x)
}

impl fmt::Display for RobustLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RobustLoss::Absolute => write!(f, "absolute"),
            RobustLoss::Huber { eta } => write!(f, "huber:{eta}"),
            RobustLoss::SquareHalf => write!(f, "square"),
        }
    }
}

impl FromStr for RobustLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        const GRAMMAR: &str = "absolute | huber:<eta> | square";
        let err = || Error::Parse { what: "robust loss", input: s.to_string(), grammar: GRAMMAR };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["absolute"] => Ok(RobustLoss::Absolute),
            ["square"] => Ok(RobustLoss::SquareHalf),
            ["huber", eta] => RobustLoss::huber(eta.parse().map_err(|_| err())?),
            _ => Err(err()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LOSSES: [RobustLoss; 4] = [
        RobustLoss::Absolute,
        RobustLoss::Huber { eta: 1.0 },
        RobustLoss::Huber { eta: 0.3 },
        RobustLoss::SquareHalf,
    ];

    /// Endpoints of the subdifferential of `loss` at `z`.
    fn subgradient(loss: RobustLoss, z: f64) -> (f64, f64) {
        match loss {
            RobustLoss::Absolute if z == 0.0 => (-1.0, 1.0),
            RobustLoss::Absolute => (z.signum(), z.signum()),
            RobustLoss::Huber { eta } => {
                let d = z.clamp(-eta, eta);
                (d, d)
            }
            RobustLoss::SquareHalf => (z, z),
        }
    }

    /// Bisection on the monotone subdifferential of `(x - z)^2/(2 tau) + loss(z)`.
    fn numeric_prox(loss: RobustLoss, x: f64, tau: f64) -> (f64, f64) {
        let objective = |z: f64| (x - z).powi(2) / (2.0 * tau) + loss.value(z);
        let (mut lo, mut hi) = (x - 10.0 - 10.0 * tau, x + 10.0 + 10.0 * tau);
        for _ in 0..2000 {
            let z = 0.5 * (lo + hi);
            if z <= lo || z >= hi {
                break;
            }
            let (a, b) = subgradient(loss, z);
            if (z - x) / tau + a > 0.0 {
                hi = z;
            } else if (z - x) / tau + b < 0.0 {
                lo = z;
            } else {
                return (z, objective(z));
            }
        }
        let z = 0.5 * (lo + hi);
        (z, objective(z))
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(2.0, 0.5), 1.5);
        assert_eq!(soft_threshold(-0.3, 0.5), 0.0);
        for z in [-3.2, -0.1, 0.0, 0.7, 12.5] {
            assert_eq!(soft_threshold(z, 0.0), z);
        }
    }

    #[test]
    fn ridge_shrink_examples() {
        assert_eq!(ridge_shrink(3.0, 2.0), 1.0);
        assert_eq!(ridge_shrink(-4.0, 1.0), -2.0);
        for z in [-3.2, 0.0, 12.5] {
            assert_eq!(ridge_shrink(z, 0.0), z);
        }
    }

    #[test]
    fn prox_examples() {
        let huber = RobustLoss::huber(1.0).unwrap();
        assert_eq!(prox(RobustLoss::Absolute, 2.0, 0.5).unwrap(), 1.5);
        // frozen from the bisection oracle
        let (oracle, _) = numeric_prox(huber, 0.5, 1.0);
        assert!((oracle - 0.25).abs() < 1e-9);
        assert!((prox(huber, 0.5, 1.0).unwrap() - 0.25).abs() < 1e-15);
        let (oracle, _) = numeric_prox(huber, 5.0, 1.0);
        assert!((oracle - 4.0).abs() < 1e-9);
        assert!((prox(huber, 5.0, 1.0).unwrap() - 4.0).abs() < 1e-15);
        assert!(prox(huber, 1.0, 0.0).is_err());
        assert!(prox(huber, 1.0, -1.0).is_err());
    }

    #[test]
    fn weak_derivative_examples() {
        let huber = RobustLoss::huber(1.0).unwrap();
        assert_eq!(prox_weak_derivative(RobustLoss::Absolute, 0.2, 0.5).unwrap(), 0.0);
        assert_eq!(prox_weak_derivative(RobustLoss::Absolute, 3.0, 0.5).unwrap(), 1.0);
        let h = 1e-6;
        let fd = (huber.prox(0.5 + h, 1.0) - huber.prox(0.5 - h, 1.0)) / (2.0 * h);
        assert!((fd - 0.5).abs() < 1e-9);
        assert_eq!(prox_weak_derivative(huber, 0.5, 1.0).unwrap(), 0.5);
        // kink convention: inner branch
        assert_eq!(RobustLoss::Absolute.prox_derivative(0.5, 0.5), 0.0);
        assert_eq!(huber.prox_derivative(2.0, 1.0), 0.5);
        assert!(prox_weak_derivative(huber, 1.0, 0.0).is_err());
    }

    #[test]
    fn envelope_examples() {
        assert_eq!(moreau_envelope(RobustLoss::Absolute, 0.0, 1.0).unwrap(), 0.0);
        let (_, oracle) = numeric_prox(RobustLoss::Absolute, 2.0, 0.5);
        assert!((oracle - 1.75).abs() < 1e-9);
        assert!((moreau_envelope(RobustLoss::Absolute, 2.0, 0.5).unwrap() - 1.75).abs() < 1e-15);
        for x in [-3.0, -0.4, 0.0, 1.1, 7.5] {
            for tau in [0.2, 1.0, 3.0] {
                let closed = x * x / (2.0 * (1.0 + tau));
                let (_, oracle) = numeric_prox(RobustLoss::SquareHalf, x, tau);
                assert!((closed - oracle).abs() < 1e-9);
                assert!((moreau_envelope(RobustLoss::SquareHalf, x, tau).unwrap() - closed).abs() < 1e-14);
            }
        }
        assert!(moreau_envelope(RobustLoss::Absolute, 1.0, 0.0).is_err());
    }

    #[test]
    fn loss_value_examples() {
        let huber = RobustLoss::huber(1.0).unwrap();
        assert_eq!(loss_value(RobustLoss::Absolute, -3.0), 3.0);
        assert_eq!(loss_value(huber, 0.5), 0.125);
        assert_eq!(loss_value(huber, 3.0), 2.5);
        assert!(RobustLoss::huber(0.0).is_err());
        assert_eq!(huber.derivative_bound(), Some(1.0));
        assert_eq!(RobustLoss::Absolute.derivative_bound(), Some(1.0));
    }

    #[test]
    fn prox_is_one_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut violations = 0;
        for _ in 0..10_000 {
            let loss = LOSSES[rng.random_range(0..LOSSES.len())];
            let tau = rng.random_range(0.01..5.0);
            let x = rng.random_range(-10.0..10.0);
            let y = rng.random_range(-10.0..10.0);
            if (loss.prox(x, tau) - loss.prox(y, tau)).abs() > (x - y).abs() + 1e-15 {
                violations += 1;
            }
        }
        assert_eq!(violations, 0);
    }

    #[test]
    fn envelope_consistent_with_prox_and_dominated_by_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10_000 {
            let loss = LOSSES[rng.random_range(0..LOSSES.len())];
            let tau = rng.random_range(0.01..5.0);
            let x = rng.random_range(-10.0..10.0);
            let p = loss.prox(x, tau);
            let direct = (x - p).powi(2) / (2.0 * tau) + loss.value(p);
            assert!((loss.envelope(x, tau) - direct).abs() < 1e-12, "{loss:?} x={x} tau={tau}");
            assert!(loss.envelope(x, tau) <= loss.value(x) + 1e-15);
        }
    }

    #[test]
    fn weak_derivative_matches_finite_difference_away_from_kinks() {
        let h = 1e-6;
        for loss in LOSSES {
            for tau in [0.1, 0.5, 1.0, 2.5] {
                let kinks: Vec<f64> = match loss {
                    RobustLoss::Absolute => vec![tau, -tau],
                    RobustLoss::Huber { eta } => vec![eta * (1.0 + tau), -eta * (1.0 + tau)],
                    RobustLoss::SquareHalf => vec![],
                };
                for i in -400..=400 {
                    let x = i as f64 * 0.0123;
                    if kinks.iter().any(|k| (x - k).abs() <= 1e-3) {
                        continue;
                    }
                    let fd = (loss.prox(x + h, tau) - loss.prox(x - h, tau)) / (2.0 * h);
                    assert!((fd - loss.prox_derivative(x, tau)).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn closed_form_prox_matches_bisection() {
        for loss in LOSSES {
            for i in -20..=20 {
                let x = i as f64 * 0.37;
                for tau in [0.05, 0.3, 1.0, 2.0, 4.5] {
                    let (z, e) = numeric_prox(loss, x, tau);
                    assert!((loss.prox(x, tau) - z).abs() < 1e-8, "{loss:?} x={x} tau={tau}");
                    assert!((loss.envelope(x, tau) - e).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn loss_grammar() {
        assert_eq!("absolute".parse::<RobustLoss>().unwrap(), RobustLoss::Absolute);
        assert_eq!("huber:1.5".parse::<RobustLoss>().unwrap(), RobustLoss::Huber { eta: 1.5 });
        assert_eq!("square".parse::<RobustLoss>().unwrap(), RobustLoss::SquareHalf);
        for bad in ["huber", "huber:-1", "huber:1:2", "abs", ""] {
            assert!(bad.parse::<RobustLoss>().is_err(), "{bad}");
        }
        let h = RobustLoss::Huber { eta: 0.25 };
        assert_eq!(h.to_string().parse::<RobustLoss>().unwrap(), h);
    }
}
