//! Gaussian-bridge schedules, dynamics, samplers, and analysis tools for
//! paired data.
//!
//! The crate models the family of Gaussian probability paths
//! p_t(x_t | s, y) = N(a_t s + b_t y, sigma_t^2 I) between a clean signal s
//! and its noisy counterpart y. From a schedule's (a_t, b_t, sigma_t) it
//! derives the sampling ODE, the forward/backward SDE family, discrete
//! samplers with pluggable data-prediction oracles, the weight
//! decomposition of the final sample, a verification suite that certifies
//! the derivations numerically, and a toy enhancement pipeline.

pub mod cli;
pub mod composition;
pub mod dynamics;
pub mod enhance;
mod error;
pub mod samplers;
pub mod schedules;
pub mod verification;

pub use error::{BridgeError, Result};
pub use schedules::{Direction, PathCoefficients, SbFunctions, Schedule, ScheduleKind};
