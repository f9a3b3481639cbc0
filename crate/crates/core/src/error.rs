use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid width specification: {0}")]
    InvalidWidthSpec(String),

    #[error("quadratic form is not positive definite for {parameters}")]
    NotPositiveDefinite { parameters: String },

    #[error("{parameters} is a limit value; evaluate through variances_with_limits")]
    LimitRequired { parameters: String },

    #[error("singular quadratic form (det = {det:e})")]
    Singular { det: f64 },

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("limit of {quantity} does not converge as {parameters} approach their limits (last values {previous:e}, {last:e})")]
    NonConvergent {
        quantity: &'static str,
        parameters: String,
        previous: f64,
        last: f64,
    },

    #[error("invalid variance set: {0}")]
    InvalidVariances(String),

    #[error("scaling optimization needs positive variances, got var_x = {var_x}, var_p = {var_p}")]
    NonPositiveVariance { var_x: f64, var_p: f64 },

    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("time-tag stream is not sorted at record {index} (tick {tick} after {previous})")]
    UnsortedStream {
        index: usize,
        tick: u64,
        previous: u64,
    },

    #[error("invalid channel {channel} at record {index}")]
    InvalidChannel { index: usize, channel: u8 },

    #[error("coincidence window must be positive")]
    ZeroWindow,

    #[error("malformed time-tag file at byte offset {offset}: {reason}")]
    MalformedTagFile { offset: u64, reason: String },

    #[error("insufficient statistics: {count} counts (need at least {required})")]
    InsufficientCounts { count: u64, required: u64 },

    #[error("no peak above background in {0}")]
    NoPeak(String),

    #[error("fit did not converge: {0}")]
    FitFailed(String),

    #[error("unknown reproduction section `{name}` (available: {available})")]
    UnknownSection { name: String, available: String },

    #[error("failed to parse {path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
