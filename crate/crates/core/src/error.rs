use thiserror::Error;

/// Errors produced anywhere in the estimation, testing and clustering pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("panel needs at least 2 series, got {0}")]
    TooFewSeries(usize),

    #[error("series `{id}` (index {index}) has length {found}, expected {expected}")]
    LengthMismatch {
        id: String,
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("series `{id}` (index {index}) has {found} covariates, expected {expected}")]
    DimensionMismatch {
        id: String,
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("series `{id}` (index {index}) has a non-finite {field} at t={t}")]
    NonFinite {
        id: String,
        index: usize,
        t: usize,
        field: &'static str,
    },

    #[error("series too short: need T >= {min}, got {found}")]
    TooShort { min: usize, found: usize },

    #[error("invalid location-scale point (u={u}, h={h}): {reason}")]
    InvalidPoint { u: f64, h: f64, reason: &'static str },

    #[error("location-scale grid is empty")]
    EmptyGrid,

    #[error("duplicate location-scale point (u={u}, h={h})")]
    DuplicatePoint { u: f64, h: f64 },

    #[error("degenerate kernel support at (u={u}, h={h}) for T={len}")]
    DegenerateSupport { u: f64, h: f64, len: usize },

    #[error("{name} = {value} outside its domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("differenced design of series `{id}` is numerically singular (rcond = {rcond:e})")]
    SingularDesign { id: String, rcond: f64 },

    #[error("long-run variance estimate of series `{id}` is not positive ({value})")]
    DegenerateVariance { id: String, value: f64 },

    #[error("autoregressive fit is not stationary (sum of coefficients = {sum})")]
    NonstationaryFit { sum: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{what} out of range: {value} not in {range}")]
    Range {
        what: &'static str,
        value: usize,
        range: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
