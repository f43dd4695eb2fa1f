use serde::{Deserialize, Serialize};

use super::signal::SignalDistribution;
use crate::error::{Error, Result};
use crate::normal;
use crate::quadrature::brent;
use crate::scalar::RobustLoss;

/// Which estimator a fixed point describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FpModel {
    Ridge,
    Lasso,
    Robust,
}

/// Inputs a fixed point was solved for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpParams {
    /// `m/n` (called `τ₀` for the robust system).
    pub delta: f64,
    pub lambda: f64,
    /// Noise level; for the robust system the RMS of the noise sample.
    pub sigma: f64,
    pub signal_second_moment: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<RobustLoss>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub model: FpModel,
    pub beta_star: f64,
    pub gamma_star: f64,
    /// Effective threshold `γ*λ/β*`.
    pub alpha_star: f64,
    /// Absolute residuals of the two equations at `(β*, γ*)`.
    pub residuals: [f64; 2],
    pub params: FpParams,
    /// Set for the trivial solution `β* = γ* = 0` (no noise, no signal).
    #[serde(default)]
    pub degenerate: bool,
}

impl FixedPoint {
    /// `δ(γ*² − σ²)` for Ridge/Lasso, `τ₀ γ*²` for the robust system.
    pub fn theoretical_risk(&self) -> f64 {
        let p = &self.params;
        match self.model {
            FpModel::Ridge | FpModel::Lasso => (p.delta * (self.gamma_star.powi(2) - p.sigma * p.sigma)).max(0.0),
            FpModel::Robust => p.delta * self.gamma_star.powi(2),
        }
    }
}

/// Theoretical risk with an explicit check that `delta` is the ratio the
/// fixed point was solved for.
pub fn theoretical_risk(fp: &FixedPoint, delta: f64) -> Result<f64> {
    if (fp.params.delta - delta).abs() > 1e-12 * delta.abs().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "fixed point was solved for delta = {}, asked for {delta}",
            fp.params.delta
        )));
    }
    Ok(fp.theoretical_risk())
}

/// Separable penalty whose prox enters the Ridge/Lasso systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Penalty {
    Ridge,
    Lasso,
}

impl Penalty {
    /// `(E(η(μ + γZ; θ) − μ)², E η'(μ + γZ; θ))` for one signal atom.
    pub fn atom_moments(self, mu: f64, gamma: f64, theta: f64) -> (f64, f64) {
        match self {
            Penalty::Ridge => {
                let s = 1.0 + theta;
                ((theta * theta * mu * mu + gamma * gamma) / (s * s), 1.0 / s)
            }
            Penalty::Lasso => {
                if gamma == 0.0 {
                    let d = mu.abs().min(theta);
                    return (d * d, if mu.abs() > theta { 1.0 } else { 0.0 });
                }
                let a = (theta - mu) / gamma;
                let b = (-theta - mu) / gamma;
                let (pa, pb) = (normal::pdf(a), normal::pdf(b));
                let (upper, lower) = (normal::sf(a), normal::cdf(b));
                let g2 = gamma * gamma;
                let t2 = theta * theta;
                let above = g2 * (a * pa + upper) - 2.0 * gamma * theta * pa + t2 * upper;
                let below = g2 * (lower - b * pb) - 2.0 * gamma * theta * pb + t2 * lower;
                let middle = mu * mu * (1.0 - upper - lower).max(0.0);
                (above + below + middle, upper + lower)
            }
        }
    }

    /// Atom-weighted `(mse, mean derivative)`.
    pub fn moments(self, atoms: &[(f64, f64)], gamma: f64, theta: f64) -> (f64, f64) {
        atoms.iter().fold((0.0, 0.0), |(m, d), &(mu, w)| {
            let (am, ad) = self.atom_moments(mu, gamma, theta);
            (m + w * am, d + w * ad)
        })
    }

    fn model(self) -> FpModel {
        match self {
            Penalty::Ridge => FpModel::Ridge,
            Penalty::Lasso => FpModel::Lasso,
        }
    }
}

/// The Ridge/Lasso system
/// `γ² = σ² + δ⁻¹ E(η(Π + γZ; γλ/β) − Π)²`, `β = γ(1 − δ⁻¹ E η'(Π + γZ; γλ/β))`.
pub(crate) struct System {
    pub penalty: Penalty,
    pub delta: f64,
    pub lam: f64,
    pub sigma: f64,
    pub atoms: Vec<(f64, f64)>,
    pub second_moment: f64,
}

pub(crate) const MAX_OUTER: usize = 10_000;
pub(crate) const DAMPING: f64 = 0.5;
const FPE_TOL: f64 = 1e-10;

impl System {
    fn new(penalty: Penalty, delta: f64, lam: f64, sigma: f64, signal: &SignalDistribution) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        if !(lam > 0.0 && lam.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lam}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
        }
        signal.validate()?;
        Ok(System { penalty, delta, lam, sigma, atoms: signal.atoms(), second_moment: signal.second_moment() })
    }

    pub fn gamma_max(&self) -> f64 {
        self.sigma + 10.0 * (self.second_moment / self.delta).sqrt() + 10.0
    }

    /// Signed residuals `(RHS₁ − γ², RHS₂ − β)`.
    pub fn residuals(&self, beta: f64, gamma: f64) -> (f64, f64) {
        let theta = gamma * self.lam / beta;
        let (mse, dfrac) = self.penalty.moments(&self.atoms, gamma, theta);
        (
            self.sigma * self.sigma + mse / self.delta - gamma * gamma,
            gamma * (1.0 - dfrac / self.delta) - beta,
        )
    }

    fn params(&self) -> FpParams {
        FpParams {
            delta: self.delta,
            lambda: self.lam,
            sigma: self.sigma,
            signal_second_moment: self.second_moment,
            loss: None,
        }
    }

    fn degenerate(&self) -> Option<FixedPoint> {
        (self.sigma == 0.0 && self.second_moment == 0.0).then(|| FixedPoint {
            model: self.penalty.model(),
            beta_star: 0.0,
            gamma_star: 0.0,
            alpha_star: 0.0,
            residuals: [0.0, 0.0],
            params: self.params(),
            degenerate: true,
        })
    }

    fn finish(&self, beta: f64, gamma: f64) -> FixedPoint {
        let (r1, r2) = self.residuals(beta, gamma);
        FixedPoint {
            model: self.penalty.model(),
            beta_star: beta,
            gamma_star: gamma,
            alpha_star: gamma * self.lam / beta,
            residuals: [r1.abs(), r2.abs()],
            params: self.params(),
            degenerate: false,
        }
    }

    /// Root in `γ` of `σ² + δ⁻¹ mse(γ, θ(γ)) − γ²` on `[σ, γ_max]`, where the
    /// threshold is `θ = γ·ratio`.
    fn solve_gamma(&self, ratio: f64) -> Result<f64> {
        let f = |g: f64| {
            let (mse, _) = self.penalty.moments(&self.atoms, g, g * ratio);
            self.sigma * self.sigma + mse / self.delta - g * g
        };
        let hi = self.gamma_max();
        let lo = if self.sigma > 0.0 { self.sigma } else { 1e-12 * hi };
        if f(lo) < 0.0 {
            return Err(Error::Bracket(format!("variance equation is negative at the lower end gamma = {lo:e}")));
        }
        if f(hi) > 0.0 {
            return Err(Error::Bracket(format!(
                "variance equation has no root below gamma_max = {hi} (threshold ratio {ratio})"
            )));
        }
        brent(f, lo, hi, 1e-15 * hi, 500)
    }

    /// Damped alternation: `γ ← root of the first equation at fixed β`,
    /// then `β ← (1 − d)β + d·γ(1 − δ⁻¹ E η')`.
    pub fn damped(&self, beta0: f64) -> Result<FixedPoint> {
        let mut beta = beta0;
        let mut gamma = f64::NAN;
        let mut r = (f64::INFINITY, f64::INFINITY);
        for _ in 0..MAX_OUTER {
            gamma = self.solve_gamma(self.lam / beta)?;
            r = self.residuals(beta, gamma);
            if r.0.abs() < FPE_TOL && r.1.abs() < FPE_TOL {
                return Ok(self.finish(beta, gamma));
            }
            let target = beta + r.1;
            if !(target > 0.0) {
                return Err(Error::Bracket(format!("beta update left (0, inf): {target}")));
            }
            beta = (1.0 - DAMPING) * beta + DAMPING * target;
        }
        Err(Error::NoConvergence { iterations: MAX_OUTER, beta, gamma, residuals: [r.0.abs(), r.1.abs()] })
    }

    /// Solve through the threshold ratio `a = λ/β`: for each `a` the first
    /// equation fixes `γ(a)`, and the implied penalty
    /// `a·γ(a)(1 − δ⁻¹ E η')` is matched to `λ` by Brent's method.
    pub fn calibrated(&self) -> Result<FixedPoint> {
        let implied = |a: f64| -> Option<(f64, f64)> {
            let gamma = self.solve_gamma(a).ok()?;
            let (_, dfrac) = self.penalty.moments(&self.atoms, gamma, a * gamma);
            Some((a * gamma * (1.0 - dfrac / self.delta), gamma))
        };
        let gap = |a: f64| implied(a).map_or(-self.lam, |(l, _)| l - self.lam);

        let mut hi = 1.0;
        let mut tries = 0;
        while gap(hi) <= 0.0 {
            hi *= 2.0;
            tries += 1;
            if tries > 60 {
                return Err(Error::Bracket(format!("implied penalty stays below lambda = {} up to a = {hi}", self.lam)));
            }
        }
        let mut lo = hi / 2.0;
        tries = 0;
        while gap(lo) > 0.0 {
            hi = lo;
            lo /= 2.0;
            tries += 1;
            if tries > 200 {
                return Err(Error::Bracket(format!("implied penalty stays above lambda = {} down to a = {lo:e}", self.lam)));
            }
        }
        let a = brent(gap, lo, hi, 1e-16 * hi, 500)?;
        let (_, gamma) = implied(a)
            .ok_or_else(|| Error::Bracket(format!("threshold ratio {a} sits on the edge of the feasible range")))?;
        Ok(self.finish(self.lam / a, gamma))
    }

    fn check(&self, fp: FixedPoint) -> Result<FixedPoint> {
        if fp.residuals[0] < FPE_TOL && fp.residuals[1] < FPE_TOL && fp.beta_star > 0.0 {
            Ok(fp)
        } else {
            Err(Error::NoConvergence {
                iterations: MAX_OUTER,
                beta: fp.beta_star,
                gamma: fp.gamma_star,
                residuals: fp.residuals,
            })
        }
    }
}

/// Closed-form Ridge fixed point.
///
/// `r = γ*/β*` is the positive root of `λr² + r(1 − λ − 1/δ) − 1 = 0`, and
/// `γ*²(1 − 1/(δ(1+λr)²)) = σ² + λ²r² EΠ² / (δ(1+λr)²)`.
pub fn solve_ridge_fpe(delta: f64, lam: f64, sigma: f64, signal: &SignalDistribution) -> Result<FixedPoint> {
    let sys = System::new(Penalty::Ridge, delta, lam, sigma, signal)?;
    if let Some(fp) = sys.degenerate() {
        return Ok(fp);
    }
    let b = 1.0 - lam - 1.0 / delta;
    let disc = (b * b + 4.0 * lam).sqrt();
    // stable form of (−b + disc) / (2λ)
    let r = if b > 0.0 { 2.0 / (b + disc) } else { (disc - b) / (2.0 * lam) };
    let s = 1.0 + lam * r;
    let denom = 1.0 - 1.0 / (delta * s * s);
    if !(denom > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "degenerate Ridge variance equation: delta (1 + lambda r)^2 = {} <= 1",
            delta * s * s
        )));
    }
    let gamma2 = (sigma * sigma + lam * lam * r * r * sys.second_moment / (delta * s * s)) / denom;
    let gamma = gamma2.sqrt();
    Ok(sys.finish(gamma / r, gamma))
}

/// Lasso fixed point by damped alternation (damping 0.5), falling back to
/// the threshold-ratio parametrization when the alternation leaves its
/// bracket or stalls.
pub fn solve_lasso_fpe(delta: f64, lam: f64, sigma: f64, signal: &SignalDistribution) -> Result<FixedPoint> {
    let sys = System::new(Penalty::Lasso, delta, lam, sigma, signal)?;
    if let Some(fp) = sys.degenerate() {
        return Ok(fp);
    }
    let beta0 = (sigma * sigma + sys.second_moment / delta).sqrt().max(f64::MIN_POSITIVE);
    match sys.damped(beta0) {
        Ok(fp) => Ok(fp),
        Err(_) => sys.check(sys.calibrated()?),
    }
}

/// Generic damped iteration on the Ridge system (the closed form's cross-check).
pub fn solve_ridge_fpe_iterative(delta: f64, lam: f64, sigma: f64, signal: &SignalDistribution) -> Result<FixedPoint> {
    let sys = System::new(Penalty::Ridge, delta, lam, sigma, signal)?;
    if let Some(fp) = sys.degenerate() {
        return Ok(fp);
    }
    let beta0 = (sigma * sigma + sys.second_moment / delta).sqrt().max(f64::MIN_POSITIVE);
    sys.damped(beta0).or_else(|_| sys.check(sys.calibrated()?))
}

/// `s* = P(|Π + γ*Z| ≥ γ*λ/β*)`.
pub fn population_sparsity(fp: &FixedPoint, signal: &SignalDistribution) -> Result<f64> {
    if fp.model != FpModel::Lasso {
        return Err(Error::InvalidParameter(format!("population sparsity needs a Lasso fixed point, got {:?}", fp.model)));
    }
    if fp.degenerate {
        return Ok(0.0);
    }
    signal.validate()?;
    let (_, s) = Penalty::Lasso.moments(&signal.atoms(), fp.gamma_star, fp.alpha_star);
    Ok(s)
}
