use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed problem specification: {0}")]
    MalformedSpec(String),

    #[error("argument {value} outside the admissible range [{lo}, {hi}] of {what}")]
    RangeExceeded {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("p = {0} is not in the image of the averaged inverse flux")]
    OutOfRange(f64),

    #[error("dyadic level {0} exceeds the maximum of 30")]
    LevelTooDeep(u32),

    #[error("increment index {index} out of range for {len} intervals")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("mean value did not converge: bracket {bracket:e} > tolerance {tolerance:e}")]
    NoConvergence { bracket: f64, tolerance: f64 },

    #[error("CFL violated: lambda * speed = {0} > 1")]
    CflViolation(f64),

    #[error("explicit diffusion unstable: dt = {dt:e} exceeds limit {limit:e}")]
    StabilityViolation { dt: f64, limit: f64 },

    #[error("velocity field not supported: {0}")]
    UnsupportedVelocityFamily(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("grid too coarse: {0}")]
    ResolutionTooCoarse(String),

    #[error("xi-grid [{lo}, {hi}] does not cover [{need_lo}, {need_hi}]")]
    GridTooNarrow {
        lo: f64,
        hi: f64,
        need_lo: f64,
        need_hi: f64,
    },

    #[error("trajectory carries no per-step records")]
    MissingStepData,

    #[error("at least {needed} paths required, got {got}")]
    InsufficientPaths { needed: usize, got: usize },

    #[error("test function unsupported: {0}")]
    UnsupportedTestFunction(String),
}
