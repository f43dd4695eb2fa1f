use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot parse {what} from '{input}': expected {grammar}")]
    Parse {
        what: &'static str,
        input: String,
        grammar: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("linear system is numerically singular: {0}")]
    Singular(String),

    #[error("degrees-of-freedom adjustment undefined: ||mu_hat||_0 = {support} >= m = {m}")]
    DofUndefined { support: usize, m: usize },

    #[error("root bracket not found: {0}")]
    Bracket(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (beta = {beta}, gamma = {gamma}, residuals = {residuals:?})")]
    NoConvergence {
        iterations: usize,
        beta: f64,
        gamma: f64,
        residuals: [f64; 2],
    },

    #[error("too many rank-deficient draws: {failed} of {attempted}")]
    RankDeficient { failed: usize, attempted: usize },

    #[error("empty sample")]
    EmptySample,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
