//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum BridgeError {
    #[error("unknown schedule kind `{0}`")]
    UnknownKind(String),

    #[error("missing parameter `{name}` for schedule kind `{kind}`")]
    MissingParameter { kind: &'static str, name: &'static str },

    #[error("non-positive parameter `{name}` = {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("parameter `{name}` = {value} must be > 1 for variance-exploding schedules")]
    DiffusionBaseTooSmall { name: &'static str, value: f64 },

    #[error("unexpected parameter `{0}` for this schedule kind")]
    UnexpectedParameter(String),

    #[error("time t = {0} outside [0, 1]")]
    TimeOutOfRange(f64),

    #[error("t = {t} is singular for this operation: {reason}")]
    SingularTime { t: f64, reason: &'static str },

    #[error("degenerate marginal at t = {0} (sigma = 0)")]
    DegenerateMarginal(f64),

    #[error("exponential integral argument {0} is outside the supported domain (x < 0)")]
    EiDomain(f64),

    #[error("exponential integral has a singular argument at 0")]
    EiSingular,

    #[error("vector length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid traversal does not match the schedule's sampling direction")]
    TraversalMismatch,

    #[error("step times r = {r}, t = {t} are not ordered along the sampling direction")]
    StepOrder { r: f64, t: f64 },

    #[error("no closed-form exponential integrator for schedule kind `{0}`; use an Euler method")]
    NoClosedForm(&'static str),

    #[error("schedule kind `{0}` defines no auxiliary diffusion coefficient")]
    NoAuxiliaryDiffusion(&'static str),

    #[error("schedule kind `{0}` is not representable as a JSON parameter map")]
    NotSerializable(&'static str),

    #[error("schedule kind `{0}` is not in the Schr\u{f6}dinger-bridge family")]
    NotSbFamily(&'static str),

    #[error("predictor returned {got} samples at step {step}, expected {expected}")]
    PredictorContract { step: usize, expected: usize, got: usize },

    #[error("non-finite state encountered at step {0}; sampling aborted")]
    NonFiniteState(usize),

    #[error("quadrature failed to converge to tolerance {tol} on [{a}, {b}]")]
    QuadratureNoConverge { a: f64, b: f64, tol: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("signal too short: {got} samples, need at least {need}")]
    SignalTooShort { got: usize, need: usize },

    #[error("malformed WAV data: {0}")]
    Wav(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, BridgeError>;
