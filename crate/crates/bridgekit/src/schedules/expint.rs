//! Exponential integral Ei for negative arguments.
//!
//! Only x < 0 is supported: the variance-exploding schedules evaluate
//! Ei at 2(t-1)·log k and -2·log k with k > 1, which are always negative.
//! Two regimes: a power series around 0 for moderate |x|, and a continued
//! fraction for E1(-x) when x < -4.

use crate::error::{BridgeError, Result};

pub const EULER_GAMMA: f64 = 0.5772156649015329;

/// Series / continued-fraction switch point.
const SERIES_CUTOFF: f64 = -4.0;

/// Ei(x) for x < 0, accurate to ~1e-14 relative.
pub fn expint_ei(x: f64) -> Result<f64> {
    if x == 0.0 {
        return Err(BridgeError::EiSingular);
    }
    if !x.is_finite() || x > 0.0 {
        return Err(BridgeError::EiDomain(x));
    }
    if x >= SERIES_CUTOFF {
        Ok(ei_series(x))
    } else {
        Ok(-e1_continued_fraction(-x))
    }
}

/// Ei(x) = gamma + ln|x| + sum_{n>=1} x^n / (n * n!).
fn ei_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut pow_over_fact = 1.0; // x^n / n!
    for n in 1..=200u32 {
        pow_over_fact *= x / f64::from(n);
        let term = pow_over_fact / f64::from(n);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    EULER_GAMMA + (-x).ln() + sum
}

/// E1(z) for z > 0 via the modified Lentz continued fraction:
/// E1(z) = e^{-z} / (z + 1 - 1/(z + 3 - 4/(z + 5 - ...))).
fn e1_continued_fraction(z: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = tiny;
    let mut c = f;
    let mut d = 0.0;
    for j in 1..=500u32 {
        let (a, b) = if j == 1 {
            (1.0, z + 1.0)
        } else {
            let m = f64::from(j - 1);
            (-m * m, z + 2.0 * f64::from(j) - 1.0)
        };
        d = b + a * d;
        if d == 0.0 {
            d = tiny;
        }
        c = b + a / c;
        if c == 0.0 {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-z).exp() * f
}
