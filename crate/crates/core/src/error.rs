use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid digit {0}: words are strings over {{0,1,2}}")]
    InvalidDigit(char),
    #[error("operation requires a non-empty word")]
    EmptyWord,
    #[error("level mismatch: expected {expected}, found {found}")]
    LevelMismatch { expected: usize, found: usize },
    #[error("invalid level: {0}")]
    InvalidLevel(String),
    #[error("cell function of level {level} must have {expected} values, found {found}")]
    Length {
        level: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("edge ({0}, {1}) is of type I; only type-II edges have an origin")]
    NotTypeTwo(String, String),
    #[error("missing vertex value at ({0})")]
    MissingVertex(String),
    #[error("resistance must be positive, found {0}")]
    NonPositive(f64),
    #[error("invalid network: {0}")]
    Network(String),
    #[error("network is disconnected")]
    Disconnected,
    #[error("linear system is singular")]
    Singular,
    #[error("solver did not reach relative residual {target:e} (reached {reached:e})")]
    NotConverged { target: f64, reached: f64 },
    #[error("energy is zero (constant input)")]
    ZeroEnergy,
    #[error("beta = {beta} outside the admissible interval ({lo}, {hi})")]
    BetaOutOfRange { beta: f64, lo: f64, hi: f64 },
    #[error("series did not reach tolerance within {0} available levels")]
    NonConvergent(usize),
    #[error("quadrature budget exceeded: {0} pair terms")]
    Budget(usize),
    #[error("points are identical")]
    IdenticalPoints,
    #[error("no separating function found")]
    NoSeparation,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
