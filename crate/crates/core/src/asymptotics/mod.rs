//! State-evolution fixed points, population laws and limiting risks.
//!
//! Ridge and Lasso share the system
//!
//! ```text
//! γ² = σ² + δ⁻¹ E(η(Π + γZ; γλ/β) − Π)²
//! β  = γ (1 − δ⁻¹ E η'(Π + γZ; γλ/β))
//! ```
//!
//! with `η` the prox of the penalty, `Π` the signal law and `Z ~ N(0, 1)`
//! independent. The limiting risk `‖μ̂ − μ₀‖²/n` is `δ(γ*² − σ²)`.

mod fixed_point;
mod population;
mod robust;
mod signal;

pub use fixed_point::{
    population_sparsity, solve_lasso_fpe, solve_ridge_fpe, solve_ridge_fpe_iterative, theoretical_risk, FixedPoint,
    FpModel, FpParams,
};
pub use population::{sample_population, PopulationLaw, Which};
pub use robust::solve_robust_fpe;
pub use signal::SignalDistribution;
