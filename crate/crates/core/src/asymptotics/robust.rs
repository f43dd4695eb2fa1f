use super::fixed_point::{FixedPoint, FpModel, FpParams};
use crate::error::{Error, Result};
use crate::normal;
use crate::quadrature::brent;
use crate::scalar::RobustLoss;

const ROBUST_TOL: f64 = 1e-8;

struct RobustSystem<'a> {
    tau0: f64,
    lam: f64,
    loss: RobustLoss,
    noise: &'a [f64],
    second_moment: f64,
}

/// Every supported loss has `x − prox(x; β) = c·clip(x, −T, T)` and
/// `prox'(x; β) = d` on `|x| < T`, `1` outside; returns `(c, T, d)`.
fn clip_form(loss: RobustLoss, beta: f64) -> (f64, f64, f64) {
    match loss {
        RobustLoss::Absolute => (1.0, beta, 0.0),
        RobustLoss::Huber { eta } => (beta / (1.0 + beta), eta * (1.0 + beta), 1.0 / (1.0 + beta)),
        RobustLoss::SquareHalf => (beta / (1.0 + beta), f64::INFINITY, 1.0 / (1.0 + beta)),
    }
}

/// `(P(|x| ≤ T), E[x²; |x| ≤ T])` for `x ~ N(mean, sd²)`.
fn truncated_moments(mean: f64, sd: f64, t: f64) -> (f64, f64) {
    if sd == 0.0 {
        return if mean.abs() <= t { (1.0, mean * mean) } else { (0.0, 0.0) };
    }
    if t.is_infinite() {
        return (1.0, mean * mean + sd * sd);
    }
    let u = (t - mean) / sd;
    let l = (-t - mean) / sd;
    // Φ(u) − Φ(l) without cancellation in either tail
    let p = if l > 0.0 {
        normal::sf(l) - normal::sf(u)
    } else if u < 0.0 {
        normal::cdf(u) - normal::cdf(l)
    } else {
        1.0 - normal::sf(u) - normal::cdf(l)
    };
    let (pu, pl) = (normal::pdf(u), normal::pdf(l));
    let second = mean * mean * p + 2.0 * mean * sd * (pl - pu) + sd * sd * (p + l * pl - u * pu);
    (p, second.max(0.0))
}

impl RobustSystem<'_> {
    /// `(E[x − prox(x; β)]², E prox'(x; β))` over `x = γZ + ξ`, exact in `Z`.
    fn moments(&self, beta: f64, gamma: f64) -> (f64, f64) {
        let (c, t, d) = clip_form(self.loss, beta);
        let (mut sq, mut inside) = (0.0, 0.0);
        for &xi in self.noise {
            let (p, m2) = truncated_moments(xi, gamma, t);
            let outer = if t.is_finite() { t * t * (1.0 - p) } else { 0.0 };
            sq += m2 + outer;
            inside += p;
        }
        let n = self.noise.len() as f64;
        (c * c * sq / n, 1.0 - (1.0 - d) * inside / n)
    }

    /// Signed residuals of
    /// `γ²/τ₀ = E[x − prox(x; β)]² + λ²β² EΠ²` and `1 − 1/τ₀ + λβ = E prox'(x; β)`.
    fn residuals(&self, beta: f64, gamma: f64) -> (f64, f64) {
        let (sq, der) = self.moments(beta, gamma);
        (
            sq + (self.lam * beta).powi(2) * self.second_moment - gamma * gamma / self.tau0,
            der - (1.0 - 1.0 / self.tau0 + self.lam * beta),
        )
    }

    fn solve_gamma(&self, beta: f64, trace: &mut Vec<String>) -> Option<f64> {
        let f = |g: f64| {
            let (sq, _) = self.moments(beta, g);
            sq + (self.lam * beta).powi(2) * self.second_moment - g * g / self.tau0
        };
        let noise_rms = (self.noise.iter().map(|x| x * x).sum::<f64>() / self.noise.len() as f64).sqrt();
        let mut hi = (self.tau0 * (noise_rms * noise_rms + self.second_moment)).sqrt().max(1e-3);
        let mut tries = 0;
        while f(hi) > 0.0 {
            hi *= 2.0;
            tries += 1;
            if tries > 40 {
                trace.push(format!("beta = {beta}: variance equation positive up to gamma = {hi}"));
                return None;
            }
        }
        if f(0.0) <= 0.0 {
            return Some(0.0);
        }
        brent(f, 0.0, hi, 1e-14 * hi, 500).ok()
    }
}

/// Robust fixed point `(β*, γ*)`. Expectations over `Z` are exact Gaussian
/// integrals of the piecewise-linear prox; over the noise they average
/// `noise_sample` (draws of `ξ`, noise level included).
///
/// The system is written in the units of the estimator `μ̂` itself, so the
/// limiting risk `‖μ̂ − μ₀‖²/n` is `τ₀γ*²`. With the square loss the
/// solution reproduces the Ridge risk at the same `λ`.
///
/// Outer root in `β ∈ (0, 1/(λτ₀)]` of the derivative equation, inner root
/// in `γ` of the variance equation; both by Brent's method.
pub fn solve_robust_fpe(
    tau0: f64,
    lam: f64,
    loss: RobustLoss,
    noise_sample: &[f64],
    signal_second_moment: f64,
) -> Result<FixedPoint> {
    if !(tau0 > 0.0 && tau0.is_finite()) {
        return Err(Error::InvalidParameter(format!("tau0 must be positive, got {tau0}")));
    }
    if !(lam > 0.0 && lam.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lam}")));
    }
    if noise_sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(signal_second_moment >= 0.0 && signal_second_moment.is_finite()) {
        return Err(Error::InvalidParameter(format!("signal second moment must be >= 0, got {signal_second_moment}")));
    }
    let sys = RobustSystem { tau0, lam, loss, noise: noise_sample, second_moment: signal_second_moment };
    let mut trace = Vec::new();
    let beta_max = 1.0 / (lam * tau0);
    let beta_min = 1e-12 * beta_max;
    let mut outer = |beta: f64| match sys.solve_gamma(beta, &mut trace) {
        Some(gamma) => {
            let (_, der) = sys.moments(beta, gamma);
            der - (1.0 - 1.0 / tau0 + lam * beta)
        }
        // no finite variance solution: treated as past the root
        None => -1.0,
    };
    let beta = match brent(&mut outer, beta_min, beta_max, 1e-15 * beta_max, 500) {
        Ok(b) => b,
        Err(e) => return Err(Error::Bracket(format!("{e}; scan: {}", trace.join("; ")))),
    };
    let gamma = sys
        .solve_gamma(beta, &mut trace)
        .ok_or_else(|| Error::Bracket(format!("no variance root at beta = {beta}; scan: {}", trace.join("; "))))?;
    let (r1, r2) = sys.residuals(beta, gamma);
    let sigma = (noise_sample.iter().map(|x| x * x).sum::<f64>() / noise_sample.len() as f64).sqrt();
    let fp = FixedPoint {
        model: FpModel::Robust,
        beta_star: beta,
        gamma_star: gamma,
        alpha_star: gamma * lam / beta,
        residuals: [r1.abs(), r2.abs()],
        params: FpParams { delta: tau0, lambda: lam, sigma, signal_second_moment, loss: Some(loss) },
        degenerate: false,
    };
    if fp.residuals.iter().all(|r| *r < ROBUST_TOL) {
        Ok(fp)
    } else {
        Err(Error::NoConvergence { iterations: 0, beta, gamma, residuals: fp.residuals })
    }
}
