use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("frequency fails the Diophantine check at n = {n:?}: divisor {divisor:e}, ratio {ratio}")]
    NotDiophantine { n: Vec<i32>, divisor: f64, ratio: f64 },
    #[error("Fourier re-expansion residual {0:e} exceeds 1e-12")]
    Truncation(f64),
    #[error("accumulator saturated at k = {k}: |P| = {norm:e}")]
    Saturated { k: usize, norm: f64 },
    #[error("bound violated: {0}")]
    Bound(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("no bracketing k with eps_(k+1) < eps <= eps_k for k <= {0}")]
    NoBracket(usize),
    #[error("KAM step {step} aborted: {reason}")]
    KamAbort { step: usize, reason: String, ledger: Vec<crate::kam::StepRecord> },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
