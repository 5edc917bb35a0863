//! Marginals, score function, and the ODE/SDE drift family of a schedule.
//!
//! All dynamics are affine in (x, s, y), so every field is exposed both as
//! an evaluated vector and as a scalar coefficient triple ([`DriftSpec`]).
//! Samplers consume the triples, keeping per-step linear algebra O(n).

use num_complex::Complex64;

use crate::error::{BridgeError, Result};
use crate::schedules::{PathCoefficients, Schedule};

/// The Gaussian marginal p_t(x_t | s, y): mean a_t·s + b_t·y, std sigma_t.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMarginal {
    pub mean: Vec<Complex64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftDirection {
    Forward,
    Backward,
    Ode,
}

/// Scalar coefficients of an affine drift: drift = state_coeff·x + s_coeff·s + y_coeff·y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSpec {
    pub state_coeff: f64,
    pub s_coeff: f64,
    pub y_coeff: f64,
    /// Diffusion coefficient in effect (0 for the ODE field).
    pub g: f64,
    pub direction: DriftDirection,
}

impl DriftSpec {
    pub fn apply(&self, x: &[Complex64], s: &[Complex64], y: &[Complex64]) -> Vec<Complex64> {
        x.iter()
            .zip(s)
            .zip(y)
            .map(|((&xi, &si), &yi)| self.state_coeff * xi + self.s_coeff * si + self.y_coeff * yi)
            .collect()
    }
}

fn check_lengths(vectors: &[&[Complex64]]) -> Result<()> {
    let expected = vectors[0].len();
    for v in vectors {
        if v.len() != expected {
            return Err(BridgeError::LengthMismatch { expected, got: v.len() });
        }
    }
    Ok(())
}

/// Coefficients at an interior time, rejecting Dirac endpoints where the
/// dynamics divide by sigma.
fn interior_coefficients(sched: &Schedule, t: f64) -> Result<PathCoefficients> {
    if sched.is_dirac(t) {
        return Err(BridgeError::SingularTime { t, reason: "Dirac endpoint (sigma = 0)" });
    }
    let coeffs = sched.coefficients(t)?;
    if coeffs.sigma <= 0.0 {
        return Err(BridgeError::DegenerateMarginal(t));
    }
    Ok(coeffs)
}

/// The Gaussian marginal at any t in [0, 1], endpoints included.
pub fn marginal(
    sched: &Schedule,
    s: &[Complex64],
    y: &[Complex64],
    t: f64,
) -> Result<GaussianMarginal> {
    check_lengths(&[s, y])?;
    let c = sched.coefficients(t)?;
    let mean = s.iter().zip(y).map(|(&si, &yi)| c.a * si + c.b * yi).collect();
    Ok(GaussianMarginal { mean, sigma: c.sigma })
}

/// Score of the Gaussian marginal, -(x - mu_t)/sigma_t^2. Requires sigma > 0.
pub fn score(
    sched: &Schedule,
    x: &[Complex64],
    s: &[Complex64],
    y: &[Complex64],
    t: f64,
) -> Result<Vec<Complex64>> {
    check_lengths(&[x, s, y])?;
    let c = interior_coefficients(sched, t)?;
    let inv_var = 1.0 / (c.sigma * c.sigma);
    Ok(x.iter()
        .zip(s)
        .zip(y)
        .map(|((&xi, &si), &yi)| -(xi - c.a * si - c.b * yi) * inv_var)
        .collect())
}

/// The ODE field triple: ((sigma'/sigma), a' - a·sigma'/sigma, b' - b·sigma'/sigma).
pub fn ode_spec(sched: &Schedule, t: f64) -> Result<DriftSpec> {
    let c = interior_coefficients(sched, t)?;
    let ratio = c.dsigma / c.sigma;
    Ok(DriftSpec {
        state_coeff: ratio,
        s_coeff: c.da - c.a * ratio,
        y_coeff: c.db - c.b * ratio,
        g: 0.0,
        direction: DriftDirection::Ode,
    })
}

/// SDE drift triple with kappa = sigma'/sigma -/+ g^2/(2 sigma^2)
/// (minus for the forward direction, plus for the backward one).
pub fn sde_spec(sched: &Schedule, t: f64, g: f64, direction: DriftDirection) -> Result<DriftSpec> {
    if g < 0.0 {
        return Err(BridgeError::InvalidInput(format!("diffusion coefficient g = {g} < 0")));
    }
    let c = interior_coefficients(sched, t)?;
    let ratio = c.dsigma / c.sigma;
    let half_gsq_over_var = g * g / (2.0 * c.sigma * c.sigma);
    let kappa = match direction {
        DriftDirection::Forward => ratio - half_gsq_over_var,
        DriftDirection::Backward => ratio + half_gsq_over_var,
        DriftDirection::Ode => ratio,
    };
    Ok(DriftSpec {
        state_coeff: kappa,
        s_coeff: c.da - c.a * kappa,
        y_coeff: c.db - c.b * kappa,
        g: if direction == DriftDirection::Ode { 0.0 } else { g },
        direction,
    })
}

/// Evaluate the ODE vector field at (x, s, y, t).
pub fn ode_field(
    sched: &Schedule,
    x: &[Complex64],
    s: &[Complex64],
    y: &[Complex64],
    t: f64,
) -> Result<Vec<Complex64>> {
    check_lengths(&[x, s, y])?;
    Ok(ode_spec(sched, t)?.apply(x, s, y))
}

/// Evaluate the forward or backward SDE drift at (x, s, y, t).
pub fn sde_drift(
    sched: &Schedule,
    x: &[Complex64],
    s: &[Complex64],
    y: &[Complex64],
    t: f64,
    g: f64,
    direction: DriftDirection,
) -> Result<Vec<Complex64>> {
    check_lengths(&[x, s, y])?;
    Ok(sde_spec(sched, t, g, direction)?.apply(x, s, y))
}
