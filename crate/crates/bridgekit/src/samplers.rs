//! Time grids, the data-prediction contract, and the discrete steppers.
//!
//! Three steppers are provided: Euler on the ODE, Euler-Maruyama on the
//! SDE, and the first-order exponential integrator, which solves the linear
//! part of each step exactly. The exponential integrator has closed-form
//! coefficients for the bridge family and OT-CFM; OUVE and BBED lack a
//! tractable closed form and must use the Euler steppers.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dynamics::{ode_spec, sde_spec, DriftDirection};
use crate::error::{BridgeError, Result};
use crate::schedules::{Direction, Schedule, ScheduleKind};

/// Sigma below this at the step start triggers the Dirac-start limit map.
const DIRAC_START_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Traversal {
    /// t_N -> t_0 (bridge family).
    Reverse,
    /// t_0 -> t_N (OT-CFM).
    Forward,
}

/// Strictly increasing grid points t_0 < t_1 < ... < t_N in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
    traversal: Traversal,
}

impl TimeGrid {
    /// Uniform grid with N steps (N+1 points) between the endpoints.
    ///
    /// Reverse grids clamp t_0 >= 1e-6 away from the singular clean endpoint.
    pub fn uniform(t_start: f64, t_end: f64, steps: usize, traversal: Traversal) -> Result<Self> {
        if steps == 0 {
            return Err(BridgeError::InvalidGrid("need at least one step".into()));
        }
        if !(0.0..=1.0).contains(&t_start) || !(0.0..=1.0).contains(&t_end) {
            return Err(BridgeError::InvalidGrid(format!(
                "endpoints ({t_start}, {t_end}) outside [0, 1]"
            )));
        }
        if t_start >= t_end {
            return Err(BridgeError::InvalidGrid(format!(
                "endpoints ({t_start}, {t_end}) must satisfy t_start < t_end"
            )));
        }
        if traversal == Traversal::Reverse && t_start < 1e-6 {
            return Err(BridgeError::InvalidGrid(format!(
                "reverse grids require t_0 >= 1e-6 (got {t_start})"
            )));
        }
        let n = steps as f64;
        let mut points: Vec<f64> =
            (0..=steps).map(|i| t_start + (i as f64 / n) * (t_end - t_start)).collect();
        points[steps] = t_end;
        Ok(Self { points, traversal })
    }

    /// Uniform grid whose traversal follows the schedule's sampling direction.
    pub fn for_schedule(sched: &Schedule, t_start: f64, t_end: f64, steps: usize) -> Result<Self> {
        let traversal = match sched.direction() {
            Direction::CleanAtT0 => Traversal::Reverse,
            Direction::CleanAtT1 => Traversal::Forward,
        };
        Self::uniform(t_start, t_end, steps, traversal)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn traversal(&self) -> Traversal {
        self.traversal
    }

    /// Number of steps N (= points - 1).
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    /// (r, t) step pairs in execution order.
    pub fn step_pairs(&self) -> Vec<(f64, f64)> {
        match self.traversal {
            Traversal::Reverse => {
                (0..self.steps()).rev().map(|i| (self.points[i + 1], self.points[i])).collect()
            }
            Traversal::Forward => {
                (0..self.steps()).map(|i| (self.points[i], self.points[i + 1])).collect()
            }
        }
    }

    /// The grid point sampling starts from (the noisy endpoint).
    pub fn start_time(&self) -> f64 {
        match self.traversal {
            Traversal::Reverse => *self.points.last().unwrap(),
            Traversal::Forward => self.points[0],
        }
    }
}

/// Data-prediction contract: (x_t, y, t) -> estimate of the clean signal.
///
/// Implementations must be deterministic and preserve vector length.
pub trait Predictor {
    fn predict(&self, x: &[Complex64], y: &[Complex64], t: f64) -> Vec<Complex64>;
}

/// The clairvoyant predictor: always returns the stored clean signal.
pub struct OraclePredictor {
    pub clean: Vec<Complex64>,
}

impl Predictor for OraclePredictor {
    fn predict(&self, _x: &[Complex64], _y: &[Complex64], _t: f64) -> Vec<Complex64> {
        self.clean.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMethod {
    EulerOde,
    EulerMaruyama,
    Exponential,
}

/// Affine step map x_t = xi·x_r + eta·s_hat + zeta·y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoefficients {
    pub xi: f64,
    pub eta: f64,
    pub zeta: f64,
}

impl StepCoefficients {
    pub fn apply(&self, x: &[Complex64], s_hat: &[Complex64], y: &[Complex64]) -> Vec<Complex64> {
        x.iter()
            .zip(s_hat)
            .zip(y)
            .map(|((&xi_v, &si), &yi)| self.xi * xi_v + self.eta * si + self.zeta * yi)
            .collect()
    }
}

/// Closed-form exponential-integrator coefficients for a step from r to t.
///
/// For the bridge family: xi = sigma_t/sigma_r and the two forcing integrals
/// evaluate to
///   eta  = (alpha_t/rho1^2) (rhobar_t^2 - rho_t rhobar_t rhobar_r / rho_r),
///   zeta = (alpha_t/(alpha_1 rho1^2)) (rho_t^2 - rho_t rhobar_t rho_r / rhobar_r).
/// When sigma_r = 0 at the noisy Dirac start, the sigma_r -> 0 limit map
/// applies: xi = 0, eta = a_t, zeta = b_t (the state is pinned to its mean).
/// For OT-CFM: xi = sigma_t/sigma_r, eta = sigma_max (t-r)/sigma_r,
/// zeta = -sigma_min (t-r)/sigma_r.
pub fn expint_coeffs(sched: &Schedule, t: f64, r: f64) -> Result<StepCoefficients> {
    match sched.kind() {
        ScheduleKind::Sbve | ScheduleKind::SbCfm | ScheduleKind::SbGeneral => {
            let funcs = sched.sb_functions()?;
            let sigma_r = sched.coefficients(r)?.sigma;
            if sigma_r < DIRAC_START_EPS {
                if (r - sched.noisy_time()).abs() < crate::schedules::DIRAC_GUARD {
                    let c = sched.coefficients(t)?;
                    return Ok(StepCoefficients { xi: 0.0, eta: c.a, zeta: c.b });
                }
                return Err(BridgeError::SingularTime {
                    t: r,
                    reason: "step cannot start at the clean Dirac endpoint",
                });
            }
            let alpha_t = (funcs.alpha)(t);
            let alpha_r = (funcs.alpha)(r);
            let alpha_1 = (funcs.alpha)(1.0);
            let rho1_sq = (funcs.rho_sq)(1.0);
            let rho_t_sq = (funcs.rho_sq)(t);
            let rho_r_sq = (funcs.rho_sq)(r);
            let rhobar_t_sq = rho1_sq - rho_t_sq;
            let rhobar_r_sq = rho1_sq - rho_r_sq;
            let (rho_t, rho_r) = (rho_t_sq.max(0.0).sqrt(), rho_r_sq.max(0.0).sqrt());
            let (rhobar_t, rhobar_r) = (rhobar_t_sq.max(0.0).sqrt(), rhobar_r_sq.max(0.0).sqrt());
            let xi = (alpha_t * rho_t * rhobar_t) / (alpha_r * rho_r * rhobar_r);
            let eta = (alpha_t / rho1_sq) * (rhobar_t_sq - rho_t * rhobar_t * rhobar_r / rho_r);
            let zeta =
                (alpha_t / (alpha_1 * rho1_sq)) * (rho_t_sq - rho_t * rhobar_t * rho_r / rhobar_r);
            Ok(StepCoefficients { xi, eta, zeta })
        }
        ScheduleKind::OtCfm => {
            let params = sched.params()?;
            let sigma_max = params["sigma_max"];
            let sigma_min = params["sigma_min"];
            let sigma_r = sched.coefficients(r)?.sigma;
            let sigma_t = sched.coefficients(t)?.sigma;
            Ok(StepCoefficients {
                xi: sigma_t / sigma_r,
                eta: sigma_max * (t - r) / sigma_r,
                zeta: -sigma_min * (t - r) / sigma_r,
            })
        }
        ScheduleKind::Ouve => Err(BridgeError::NoClosedForm("ouve")),
        ScheduleKind::Bbed => Err(BridgeError::NoClosedForm("bbed")),
    }
}

fn check_step_order(sched: &Schedule, r: f64, t: f64) -> Result<()> {
    let ok = match sched.direction() {
        Direction::CleanAtT0 => t < r,
        Direction::CleanAtT1 => t > r,
    };
    if ok {
        Ok(())
    } else {
        Err(BridgeError::StepOrder { r, t })
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// One discrete update from time r to time t.
///
/// `g` is the diffusion coefficient in effect over the step; it must be 0
/// for the deterministic methods. Euler-Maruyama draws no randomness when
/// g = 0, so it then equals the Euler ODE step bit for bit.
#[allow(clippy::too_many_arguments)]
pub fn step<R: Rng + ?Sized>(
    method: StepMethod,
    sched: &Schedule,
    x_r: &[Complex64],
    s_hat: &[Complex64],
    y: &[Complex64],
    r: f64,
    t: f64,
    g: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    check_step_order(sched, r, t)?;
    let dt = t - r;
    match method {
        StepMethod::EulerOde => {
            if g != 0.0 {
                return Err(BridgeError::InvalidInput("euler_ode requires g = 0".into()));
            }
            let spec = ode_spec(sched, r)?;
            Ok(x_r
                .iter()
                .zip(s_hat)
                .zip(y)
                .map(|((&xv, &sv), &yv)| {
                    xv + dt * (spec.state_coeff * xv + spec.s_coeff * sv + spec.y_coeff * yv)
                })
                .collect())
        }
        StepMethod::EulerMaruyama => {
            let direction = match sched.direction() {
                Direction::CleanAtT0 => DriftDirection::Backward,
                Direction::CleanAtT1 => DriftDirection::Forward,
            };
            let spec = sde_spec(sched, r, g, direction)?;
            let noise_scale = g * dt.abs().sqrt();
            Ok(x_r
                .iter()
                .zip(s_hat)
                .zip(y)
                .map(|((&xv, &sv), &yv)| {
                    let mut next =
                        xv + dt * (spec.state_coeff * xv + spec.s_coeff * sv + spec.y_coeff * yv);
                    if g != 0.0 {
                        next += noise_scale * complex_normal(rng);
                    }
                    next
                })
                .collect())
        }
        StepMethod::Exponential => {
            if g != 0.0 {
                return Err(BridgeError::InvalidInput("exponential step requires g = 0".into()));
            }
            let coeffs = expint_coeffs(sched, t, r)?;
            Ok(coeffs.apply(x_r, s_hat, y))
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampleConfig {
    pub method: StepMethod,
    /// Scale applied to the schedule's auxiliary gtilde_t; the per-step
    /// diffusion coefficient is g_scale·gtilde(r). Only Euler-Maruyama
    /// accepts a nonzero value.
    pub g_scale: f64,
    pub seed: u64,
    /// Record intermediate states and predictions in the trace.
    pub record: bool,
    /// Add N(0, sigma^2(t_start)) noise at initialization for schedules
    /// whose noisy endpoint is not Dirac (e.g. OUVE). Off by default.
    pub init_noise: bool,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            method: StepMethod::Exponential,
            g_scale: 0.0,
            seed: 0,
            record: false,
            init_noise: false,
        }
    }
}

/// States and predictions produced by one sampling run.
#[derive(Debug, Clone)]
pub struct SampleTrace {
    /// Visited states in execution order (initial state first); empty
    /// unless recording was requested.
    pub states: Vec<Vec<Complex64>>,
    /// Predictor outputs in execution order (first model call first);
    /// empty unless recording was requested.
    pub predictions: Vec<Vec<Complex64>>,
    /// Times of the recorded states in execution order.
    pub times: Vec<f64>,
    /// State at the stopping time.
    pub final_state: Vec<Complex64>,
    pub seed: u64,
}

impl SampleTrace {
    /// Predictions reordered to match the weight-profile indexing
    /// (index 0 = last model call).
    pub fn predictions_last_call_first(&self) -> Vec<Vec<Complex64>> {
        self.predictions.iter().rev().cloned().collect()
    }
}

/// Run the full sampling loop: initialize the state to y at the noisy
/// endpoint, then alternate predictor calls and discrete steps across the
/// grid. Exactly one predictor call is made per step.
pub fn sample(
    sched: &Schedule,
    y: &[Complex64],
    predictor: &dyn Predictor,
    grid: &TimeGrid,
    cfg: &SampleConfig,
) -> Result<SampleTrace> {
    let expected_traversal = match sched.direction() {
        Direction::CleanAtT0 => Traversal::Reverse,
        Direction::CleanAtT1 => Traversal::Forward,
    };
    if grid.traversal() != expected_traversal {
        return Err(BridgeError::TraversalMismatch);
    }
    if cfg.g_scale < 0.0 {
        return Err(BridgeError::InvalidInput(format!("g_scale = {} < 0", cfg.g_scale)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x: Vec<Complex64> = y.to_vec();
    let start = grid.start_time();
    if cfg.init_noise {
        let sigma = sched.coefficients(start)?.sigma;
        if sigma > 0.0 {
            for v in &mut x {
                *v += sigma * complex_normal(&mut rng);
            }
        }
    }

    let mut trace = SampleTrace {
        states: Vec::new(),
        predictions: Vec::new(),
        times: Vec::new(),
        final_state: Vec::new(),
        seed: cfg.seed,
    };
    if cfg.record {
        trace.states.push(x.clone());
        trace.times.push(start);
    }

    for (step_index, (r, t)) in grid.step_pairs().into_iter().enumerate() {
        let s_hat = predictor.predict(&x, y, r);
        if s_hat.len() != y.len() {
            return Err(BridgeError::PredictorContract {
                step: step_index + 1,
                expected: y.len(),
                got: s_hat.len(),
            });
        }
        let g = if cfg.g_scale == 0.0 {
            0.0
        } else {
            cfg.g_scale * sched.gtilde_sq(r)?.sqrt()
        };
        x = step(cfg.method, sched, &x, &s_hat, y, r, t, g, &mut rng)?;
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(BridgeError::NonFiniteState(step_index + 1));
        }
        if cfg.record {
            trace.predictions.push(s_hat);
            trace.states.push(x.clone());
            trace.times.push(t);
        }
    }
    trace.final_state = x;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use std::cell::Cell;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn uniform_grid_basics() {
        let grid = TimeGrid::uniform(1e-4, 1.0, 10, Traversal::Reverse).unwrap();
        assert_eq!(grid.points().len(), 11);
        assert_eq!(grid.points()[0], 1e-4);
        assert_eq!(*grid.points().last().unwrap(), 1.0);
        assert_relative_eq!(grid.points()[3], 1e-4 + 3.0 * (1.0 - 1e-4) / 10.0);

        let one = TimeGrid::uniform(1e-4, 1.0, 1, Traversal::Reverse).unwrap();
        assert_eq!(one.points(), &[1e-4, 1.0]);

        assert!(TimeGrid::uniform(0.5, 0.5, 4, Traversal::Reverse).is_err());
        assert!(TimeGrid::uniform(0.1, 0.9, 0, Traversal::Reverse).is_err());
        assert!(TimeGrid::uniform(-0.1, 0.9, 4, Traversal::Forward).is_err());
        assert!(TimeGrid::uniform(1e-9, 1.0, 4, Traversal::Reverse).is_err());
        // The clamp applies only to reverse grids; OT-CFM starts at 0.
        assert!(TimeGrid::uniform(0.0, 1.0, 4, Traversal::Forward).is_ok());
    }

    #[test]
    fn sb_cfm_coefficients_symmetric_pair() {
        let sched = Schedule::sb_cfm(1.0).unwrap();
        let coeffs = expint_coeffs(&sched, 0.25, 0.75).unwrap();
        assert_relative_eq!(coeffs.xi, 1.0, max_relative = 1e-13);
        assert_relative_eq!(coeffs.eta, 0.5, max_relative = 1e-13);
        assert_relative_eq!(coeffs.zeta, -0.5, max_relative = 1e-13);
    }

    #[test]
    fn ot_cfm_closed_form() {
        let sched = Schedule::ot_cfm(0.5, 0.05).unwrap();
        let (t, r) = (0.8, 0.3);
        let coeffs = expint_coeffs(&sched, t, r).unwrap();
        let sigma_r = 0.7 * 0.5 + 0.3 * 0.05;
        let sigma_t = 0.2 * 0.5 + 0.8 * 0.05;
        assert_relative_eq!(coeffs.xi, sigma_t / sigma_r, max_relative = 1e-14);
        assert_relative_eq!(coeffs.eta, 0.5 * (t - r) / sigma_r, max_relative = 1e-14);
        assert_relative_eq!(coeffs.zeta, -0.05 * (t - r) / sigma_r, max_relative = 1e-14);
    }

    #[test]
    fn no_closed_form_for_ouve_and_bbed() {
        let ouve = Schedule::ouve(1.5, 0.3, 3.0).unwrap();
        assert!(matches!(expint_coeffs(&ouve, 0.3, 0.6), Err(BridgeError::NoClosedForm("ouve"))));
        let bbed = Schedule::bbed(0.4, 2.5).unwrap();
        assert!(matches!(expint_coeffs(&bbed, 0.3, 0.6), Err(BridgeError::NoClosedForm("bbed"))));
    }

    #[test]
    fn dirac_start_limit_map() {
        let sched = Schedule::sb_cfm(1.0).unwrap();
        let coeffs = expint_coeffs(&sched, 0.4, 1.0).unwrap();
        assert_eq!(coeffs.xi, 0.0);
        assert_relative_eq!(coeffs.eta, 0.6, max_relative = 1e-14);
        assert_relative_eq!(coeffs.zeta, 0.4, max_relative = 1e-14);
        // A step may not start from the clean Dirac endpoint.
        let sbve = Schedule::sbve(0.3, 2.8).unwrap();
        assert!(matches!(
            expint_coeffs(&sbve, 0.5, 0.0),
            Err(BridgeError::SingularTime { .. })
        ));
    }

    #[test]
    fn coefficient_rows_sum_to_one() {
        // Constant-state fixed point: xi + eta + zeta = 1 for a+b = 1, alpha = 1.
        for sched in [Schedule::sb_cfm(1.4).unwrap(), Schedule::sbve(0.3, 2.8).unwrap()] {
            let grid = TimeGrid::for_schedule(&sched, 1e-4, 1.0, 16).unwrap();
            for (r, t) in grid.step_pairs() {
                let coeffs = expint_coeffs(&sched, t, r).unwrap();
                assert_abs_diff_eq!(coeffs.xi + coeffs.eta + coeffs.zeta, 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn exponential_equals_euler_for_ot_cfm() {
        let sched = Schedule::ot_cfm(0.5, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = [c(0.4), c(-1.0)];
        let s = [c(1.0), c(0.3)];
        let y = [c(-0.2), c(0.8)];
        for (r, t) in [(0.0, 0.2), (0.3, 0.55), (0.7, 1.0)] {
            let exp =
                step(StepMethod::Exponential, &sched, &x, &s, &y, r, t, 0.0, &mut rng).unwrap();
            let eul = step(StepMethod::EulerOde, &sched, &x, &s, &y, r, t, 0.0, &mut rng).unwrap();
            for i in 0..x.len() {
                assert!((exp[i] - eul[i]).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn constant_vectors_are_a_fixed_point() {
        let sched = Schedule::sb_cfm(1.0).unwrap();
        let v = [c(0.8), c(0.8)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for method in [StepMethod::EulerOde, StepMethod::EulerMaruyama, StepMethod::Exponential] {
            let out = step(method, &sched, &v, &v, &v, 0.7, 0.4, 0.0, &mut rng).unwrap();
            for value in &out {
                assert_relative_eq!(value.re, 0.8, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn euler_maruyama_with_zero_g_matches_euler_ode() {
        let sched = Schedule::sbve(0.3, 2.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = [c(0.3)];
        let s = [c(1.0)];
        let y = [c(0.1)];
        let em = step(StepMethod::EulerMaruyama, &sched, &x, &s, &y, 0.6, 0.5, 0.0, &mut rng)
            .unwrap();
        let eu = step(StepMethod::EulerOde, &sched, &x, &s, &y, 0.6, 0.5, 0.0, &mut rng).unwrap();
        assert_eq!(em, eu);
    }

    #[test]
    fn step_rejects_wrong_order() {
        let sched = Schedule::sb_cfm(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = [c(0.0)];
        assert!(matches!(
            step(StepMethod::Exponential, &sched, &v, &v, &v, 0.3, 0.6, 0.0, &mut rng),
            Err(BridgeError::StepOrder { .. })
        ));
    }

    struct CallCounter {
        clean: Vec<Complex64>,
        calls: Cell<usize>,
    }

    impl Predictor for CallCounter {
        fn predict(&self, _x: &[Complex64], _y: &[Complex64], _t: f64) -> Vec<Complex64> {
            self.calls.set(self.calls.get() + 1);
            self.clean.clone()
        }
    }

    #[test]
    fn oracle_sampling_telescopes_to_marginal_mean() {
        let sched = Schedule::sb_cfm(1.0).unwrap();
        let s = vec![c(1.0), c(-0.4)];
        let y = vec![c(0.2), c(2.0)];
        let t0 = 1e-4;
        for n in [1usize, 5, 10, 64] {
            let grid = TimeGrid::for_schedule(&sched, t0, 1.0, n).unwrap();
            let predictor = CallCounter { clean: s.clone(), calls: Cell::new(0) };
            let trace = sample(&sched, &y, &predictor, &grid, &SampleConfig::default()).unwrap();
            assert_eq!(predictor.calls.get(), n, "exactly N predictor calls");
            for i in 0..s.len() {
                let expected = (1.0 - t0) * s[i] + t0 * y[i];
                assert!(
                    (trace.final_state[i] - expected).norm() <= 1e-9,
                    "N={n} i={i}: {:?} vs {expected}",
                    trace.final_state[i]
                );
            }
        }
    }

    #[test]
    fn one_step_is_the_dirac_limit_map() {
        let sched = Schedule::sb_cfm(1.0).unwrap();
        let s = vec![c(0.9)];
        let y = vec![c(-0.5)];
        let grid = TimeGrid::for_schedule(&sched, 1e-4, 1.0, 1).unwrap();
        let predictor = OraclePredictor { clean: s.clone() };
        let trace = sample(&sched, &y, &predictor, &grid, &SampleConfig::default()).unwrap();
        let coeffs = sched.coefficients(1e-4).unwrap();
        let expected = coeffs.a * s[0] + coeffs.b * y[0];
        assert!((trace.final_state[0] - expected).norm() <= 1e-12);
    }

    struct WrongLength;

    impl Predictor for WrongLength {
        fn predict(&self, _x: &[Complex64], _y: &[Complex64], _t: f64) -> Vec<Complex64> {
            vec![c(0.0); 3]
        }
    }

    #[test]
    fn wrong_length_prediction_fails_at_step_one() {
        let sched = Schedule::sb_cfm(1.0).unwrap();
        let grid = TimeGrid::for_schedule(&sched, 1e-4, 1.0, 4).unwrap();
        let err = sample(&sched, &[c(0.0)], &WrongLength, &grid, &SampleConfig::default());
        assert!(matches!(err, Err(BridgeError::PredictorContract { step: 1, .. })));
    }

    struct NanPredictor;

    impl Predictor for NanPredictor {
        fn predict(&self, x: &[Complex64], _y: &[Complex64], _t: f64) -> Vec<Complex64> {
            vec![Complex64::new(f64::NAN, 0.0); x.len()]
        }
    }

    #[test]
    fn nan_state_aborts_with_the_step_index() {
        let sched = Schedule::sb_cfm(1.0).unwrap();
        let grid = TimeGrid::for_schedule(&sched, 1e-4, 1.0, 4).unwrap();
        let err = sample(&sched, &[c(0.5)], &NanPredictor, &grid, &SampleConfig::default());
        assert!(matches!(err, Err(BridgeError::NonFiniteState(1))));
    }

    #[test]
    fn traversal_must_match_direction() {
        let sched = Schedule::sb_cfm(1.0).unwrap();
        let grid = TimeGrid::uniform(1e-4, 1.0, 4, Traversal::Forward).unwrap();
        let predictor = OraclePredictor { clean: vec![c(1.0)] };
        assert!(matches!(
            sample(&sched, &[c(0.0)], &predictor, &grid, &SampleConfig::default()),
            Err(BridgeError::TraversalMismatch)
        ));
    }

    #[test]
    fn init_noise_flag_perturbs_non_dirac_starts_only() {
        // OUVE keeps sigma(1) > 0, so the optional start noise has effect;
        // at a Dirac start the flag is a no-op.
        let ouve = Schedule::ouve(1.5, 0.3, 3.0).unwrap();
        let grid = TimeGrid::for_schedule(&ouve, 1e-3, 1.0, 8).unwrap();
        let y = vec![c(0.4)];
        let predictor = OraclePredictor { clean: vec![c(1.0)] };
        let base = SampleConfig { method: StepMethod::EulerOde, seed: 5, ..SampleConfig::default() };
        let plain = sample(&ouve, &y, &predictor, &grid, &base).unwrap();
        let noisy_cfg = SampleConfig { init_noise: true, ..base.clone() };
        let jittered = sample(&ouve, &y, &predictor, &grid, &noisy_cfg).unwrap();
        assert_ne!(plain.final_state, jittered.final_state);
        let again = sample(&ouve, &y, &predictor, &grid, &noisy_cfg).unwrap();
        assert_eq!(jittered.final_state, again.final_state);

        let sb = Schedule::sb_cfm(1.0).unwrap();
        let grid = TimeGrid::for_schedule(&sb, 1e-4, 1.0, 4).unwrap();
        let with = SampleConfig { init_noise: true, ..SampleConfig::default() };
        let a = sample(&sb, &y, &predictor, &grid, &with).unwrap();
        let b = sample(&sb, &y, &predictor, &grid, &SampleConfig::default()).unwrap();
        assert_eq!(a.final_state, b.final_state);
    }

    #[test]
    fn euler_maruyama_trace_is_seed_deterministic() {
        let sched = Schedule::sb_cfm(1.0).unwrap();
        let s = vec![c(1.0), c(0.5)];
        let y = vec![c(0.0), c(0.2)];
        let grid = TimeGrid::for_schedule(&sched, 1e-3, 0.995, 20).unwrap();
        let predictor = OraclePredictor { clean: s };
        let cfg = SampleConfig {
            method: StepMethod::EulerMaruyama,
            g_scale: 1.0,
            seed: 42,
            record: true,
            ..SampleConfig::default()
        };
        let a = sample(&sched, &y, &predictor, &grid, &cfg).unwrap();
        let b = sample(&sched, &y, &predictor, &grid, &cfg).unwrap();
        assert_eq!(a.final_state, b.final_state);
        assert_eq!(a.states, b.states);
        assert_eq!(a.seed, 42);
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

        #[test]
        fn constant_input_sampling_returns_the_constant(
            value in -5.0f64..5.0,
            n in 1usize..12,
        ) {
            // s_hat = y and x = y: the whole loop is a fixed point. The Euler
            // grid stops short of t = 1, where the ODE field is singular.
            let sched = Schedule::sbve(0.3, 2.8).unwrap();
            let y = vec![Complex64::new(value, -value)];
            let predictor = OraclePredictor { clean: y.clone() };
            for (method, t_end) in
                [(StepMethod::Exponential, 1.0), (StepMethod::EulerOde, 0.995)]
            {
                let grid = TimeGrid::for_schedule(&sched, 1e-3, t_end, n).unwrap();
                let cfg = SampleConfig { method, ..SampleConfig::default() };
                let trace = sample(&sched, &y, &predictor, &grid, &cfg).unwrap();
                let err = (trace.final_state[0] - y[0]).norm();
                prop_assert!(err <= 1e-9 * value.abs().max(1.0), "method {method:?}: err {err}");
            }
        }
    }
}
