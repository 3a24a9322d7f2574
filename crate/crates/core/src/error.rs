//! Error type shared by every solver in the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid growth profile: {0}")]
    InvalidProfile(String),

    #[error("problem specification violates {} hypothesis(es): {}", .0.len(), .0.join("; "))]
    InvalidSpec(Vec<String>),

    /// A critical value was not found within the probed range.
    #[error("threshold not attained: last probe at {probe} gave lambda1 = {lambda}")]
    NotAttained { probe: f64, lambda: f64 },

    #[error("no positive solution: lambda1 = {lambda} is not negative")]
    NoPositiveSolution { lambda: f64 },

    #[error("discrete operator is not symmetrizable at row {row}")]
    NotSymmetrizable { row: usize },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("Newton iteration stalled after {iterations} iterations (residual {residual:e})")]
    NewtonStalled { iterations: usize, residual: f64 },

    #[error("truncation length {length} too short: far-field gap {gap:e}")]
    TruncationTooShort { length: f64, gap: f64 },

    #[error("step rejected at t = {t}: {reason}")]
    StepRejected { t: f64, reason: String },

    #[error("blow-up guard tripped at t = {t}: max w = {max_w} exceeds {limit}")]
    BlowUp { t: f64, max_w: f64, limit: f64 },

    #[error("invalid bracket: {0}")]
    BracketInvalid(String),

    #[error("threshold ambiguous in [{lo}, {hi}]: classification undetermined")]
    Ambiguous { lo: f64, hi: f64 },

    #[error("exhaustion did not converge: last Cauchy gap {gap:e} at truncation {length}")]
    NotConverged { length: f64, gap: f64 },

    #[error("fit window too short: {0}")]
    WindowTooShort(String),

    #[error("window [{lo}, {hi}] lies outside the grid [0, {extent}]")]
    WindowOutsideGrid { lo: f64, hi: f64, extent: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl Error {
    /// Domain outcomes (the mathematics says "no") as opposed to numerical failures.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::NotAttained { .. }
                | Error::NoPositiveSolution { .. }
                | Error::BracketInvalid(_)
                | Error::InvalidSpec(_)
                | Error::InvalidParameter(_)
                | Error::InvalidProfile(_)
                | Error::Precondition(_)
        )
    }
}
