//! Weight decomposition of the final sample.
//!
//! Unrolling the reverse-time recursion x_{t_n} = xi_n x_{t_{n+1}} +
//! eta_n s_{t_{n+1}} + zeta_n y with x_{t_N} = y expresses the final state
//! as sum_n w_n s_{t_n} + w_y y. Indexing follows the reverse-time
//! convention: w_1 (stored at index 0) weights the LAST model call, made
//! at t_1; w_N weights the first call at t_N. Inverting this by mistake is
//! easy, so every consumer here documents the ordering it expects.

use num_complex::Complex64;

use crate::error::{BridgeError, Result};
use crate::samplers::{expint_coeffs, StepCoefficients, TimeGrid, Traversal};
use crate::schedules::Schedule;

/// Per-step weights of the final sample: final = sum w_n s_{t_n} + w_y y.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightProfile {
    /// w_1..w_N with w_1 (index 0) weighting the last model call.
    pub weights: Vec<f64>,
    /// Weight of the noisy input y.
    pub w_y: f64,
}

impl WeightProfile {
    pub fn steps(&self) -> usize {
        self.weights.len()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// CSV rows (step_index, t, weight) followed by a trailing y row.
    /// Row n carries w_n and the time of the model call it weights: t_n for
    /// reverse-time grids, t_{N-n} for forward ones (w_1 is always the last
    /// call made).
    pub fn to_csv(&self, grid: &TimeGrid) -> Result<String> {
        if grid.steps() != self.steps() {
            return Err(BridgeError::LengthMismatch {
                expected: self.steps(),
                got: grid.steps(),
            });
        }
        let n = self.steps();
        let mut out = String::from("step_index,t,weight\n");
        for (i, w) in self.weights.iter().enumerate() {
            let t = match grid.traversal() {
                Traversal::Reverse => grid.points()[i + 1],
                Traversal::Forward => grid.points()[n - 1 - i],
            };
            out.push_str(&format!("{},{},{}\n", i + 1, t, w));
        }
        out.push_str(&format!("y,,{}\n", self.w_y));
        Ok(out)
    }
}

/// Unroll step coefficients into the weight profile.
///
/// `coeffs` must be ordered in execution order: the first entry is the step
/// taken from t_N, the last one reaches t_0. The x_{t_N} = y initial state
/// contributes the full running xi-product to w_y (the zeta_N = 1
/// convention).
pub fn weights_from_coeffs(coeffs: &[StepCoefficients]) -> Result<WeightProfile> {
    if coeffs.is_empty() {
        return Err(BridgeError::EmptyInput("step coefficient list"));
    }
    let n = coeffs.len();
    let mut weights = vec![0.0; n];
    let mut w_y = 0.0;
    let mut xi_product = 1.0;
    // Walk backwards through execution order: index 0 of `weights` is the
    // last step taken, which has no xi factors in front of it.
    for (slot, step) in coeffs.iter().rev().enumerate() {
        weights[slot] = xi_product * step.eta;
        w_y += xi_product * step.zeta;
        xi_product *= step.xi;
    }
    w_y += xi_product;
    Ok(WeightProfile { weights, w_y })
}

/// Exponential-integrator step coefficients for every grid step, in
/// execution order. These are exactly the maps the exponential sampler
/// applies, so recomposing with them reproduces its final state.
pub fn grid_step_coefficients(sched: &Schedule, grid: &TimeGrid) -> Result<Vec<StepCoefficients>> {
    grid.step_pairs().into_iter().map(|(r, t)| expint_coeffs(sched, t, r)).collect()
}

/// Closed-form bridge-family weights from (alpha_t, rho_t^2):
///   w_n = (alpha_0 rho_0 rhobar_0 / rho_N^2) (rhobar_{n-1}/rho_{n-1} - rhobar_n/rho_n),
///   w_y = alpha_0 rho_0^2 / (alpha_N rho_N^2),
/// with subscripts indexing grid points. Exact (matches the recursion) when
/// the grid ends at the noisy Dirac endpoint t_N = 1.
pub fn weights_closed_form_sb(
    grid: &TimeGrid,
    alpha: impl Fn(f64) -> f64,
    rho_sq: impl Fn(f64) -> f64,
) -> Result<WeightProfile> {
    if grid.traversal() != Traversal::Reverse {
        return Err(BridgeError::InvalidGrid(
            "closed-form weights are defined for reverse-time grids".into(),
        ));
    }
    let points = grid.points();
    let n = grid.steps();
    let rho1_sq = rho_sq(1.0);
    let rho_0_sq = rho_sq(points[0]);
    if rho_0_sq <= 0.0 {
        return Err(BridgeError::SingularTime {
            t: points[0],
            reason: "closed-form weights require rho(t_0) > 0",
        });
    }
    let alpha_0 = alpha(points[0]);
    let rho_0 = rho_0_sq.sqrt();
    let rhobar_0 = (rho1_sq - rho_0_sq).max(0.0).sqrt();
    let t_n = points[n];
    let rho_n_sq = rho_sq(t_n);
    let alpha_n = alpha(t_n);

    let ratio = |t: f64| -> f64 {
        let r_sq = rho_sq(t);
        ((rho1_sq - r_sq).max(0.0) / r_sq).sqrt()
    };
    let lead = alpha_0 * rho_0 * rhobar_0 / rho_n_sq;
    let weights = (1..=n).map(|i| lead * (ratio(points[i - 1]) - ratio(points[i]))).collect();
    let w_y = alpha_0 * rho_0_sq / (alpha_n * rho_n_sq);
    Ok(WeightProfile { weights, w_y })
}

/// Closed-form weights for a bridge-family schedule.
pub fn weights_closed_form(sched: &Schedule, grid: &TimeGrid) -> Result<WeightProfile> {
    let funcs = sched.sb_functions()?;
    weights_closed_form_sb(grid, |t| (funcs.alpha)(t), |t| (funcs.rho_sq)(t))
}

/// Recombine recorded predictions with a weight profile:
/// sum_n w_n s_{t_n} + w_y y.
///
/// `predictions` must match the weight indexing: index 0 is the LAST model
/// call (see [`crate::samplers::SampleTrace::predictions_last_call_first`]).
pub fn compose_output(
    profile: &WeightProfile,
    predictions: &[Vec<Complex64>],
    y: &[Complex64],
) -> Result<Vec<Complex64>> {
    if predictions.len() != profile.steps() {
        return Err(BridgeError::LengthMismatch {
            expected: profile.steps(),
            got: predictions.len(),
        });
    }
    let mut out: Vec<Complex64> = y.iter().map(|&v| profile.w_y * v).collect();
    for (w, pred) in profile.weights.iter().zip(predictions) {
        if pred.len() != y.len() {
            return Err(BridgeError::LengthMismatch { expected: y.len(), got: pred.len() });
        }
        for (acc, &p) in out.iter_mut().zip(pred) {
            *acc += *w * p;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{sample, OraclePredictor, SampleConfig};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn sb_cfm_grid(n: usize) -> (Schedule, TimeGrid) {
        let sched = Schedule::sb_cfm(1.0).unwrap();
        let grid = TimeGrid::for_schedule(&sched, 1e-4, 1.0, n).unwrap();
        (sched, grid)
    }

    #[test]
    fn single_step_weights_are_the_endpoint_coefficients() {
        let coeffs = StepCoefficients { xi: 0.0, eta: 0.9999, zeta: 1e-4 };
        let profile = weights_from_coeffs(&[coeffs]).unwrap();
        assert_eq!(profile.weights, vec![0.9999]);
        assert_eq!(profile.w_y, 1e-4);

        let (sched, grid) = sb_cfm_grid(1);
        let closed = weights_closed_form(&sched, &grid).unwrap();
        let c0 = sched.coefficients(1e-4).unwrap();
        assert_relative_eq!(closed.weights[0], c0.a, max_relative = 1e-12);
        assert_relative_eq!(closed.w_y, c0.b, max_relative = 1e-12);
    }

    #[test]
    fn w_y_is_exactly_1e4_for_the_reference_configuration() {
        let (sched, grid) = sb_cfm_grid(10);
        let closed = weights_closed_form(&sched, &grid).unwrap();
        assert_eq!(closed.w_y, 1e-4);
        let recursion =
            weights_from_coeffs(&grid_step_coefficients(&sched, &grid).unwrap()).unwrap();
        assert_abs_diff_eq!(recursion.w_y, 1e-4, epsilon = 1e-10);
    }

    #[test]
    fn final_call_dominates() {
        let (sched, grid) = sb_cfm_grid(10);
        let profile = weights_closed_form(&sched, &grid).unwrap();
        assert!(profile.weights[0] > 0.95, "w_1 = {}", profile.weights[0]);
        assert_relative_eq!(profile.weights[0], 0.9699, max_relative = 1e-3);
        let earlier: f64 = profile.weights[1..].iter().sum();
        assert!(earlier <= 0.031, "earlier weight mass {earlier}");
        // The true shape is not fully monotone: w_n = lead * (f(t_{n-1}) -
        // f(t_n)) with f(t) = sqrt((1-t)/t), whose slope diverges at both
        // endpoints, so the differences shrink through the middle of the
        // grid and then grow again toward t = 1. The last call dominates
        // every other weight; the chain decreases only up to that tail
        // uptick, and the first call (w_N) outweighs its neighbors.
        for pair in profile.weights[..8].windows(2) {
            assert!(pair[0] > pair[1], "leading weights not decreasing: {pair:?}");
        }
        assert!(profile.weights[8] < profile.weights[9], "expected the tail uptick");
        for w in &profile.weights[1..] {
            assert!(*w < profile.weights[0] * 0.011, "w_1 does not dominate: {w}");
        }
    }

    #[test]
    fn unit_sum_and_telescoped_mass() {
        for sched in [Schedule::sb_cfm(1.0).unwrap(), Schedule::sbve(0.3, 2.8).unwrap()] {
            let funcs = sched.sb_functions().unwrap();
            for n in [1usize, 2, 5, 10, 64] {
                let grid = TimeGrid::for_schedule(&sched, 1e-4, 1.0, n).unwrap();
                let profile = weights_closed_form(&sched, &grid).unwrap();
                assert_abs_diff_eq!(profile.w_y + profile.weight_sum(), 1.0, epsilon = 1e-9);
                let rho0_sq = (funcs.rho_sq)(1e-4);
                let rho1_sq = (funcs.rho_sq)(1.0);
                let expected_mass = (funcs.alpha)(1e-4) * (1.0 - rho0_sq / rho1_sq);
                assert_abs_diff_eq!(profile.weight_sum(), expected_mass, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn closed_form_matches_recursion_per_weight() {
        for sched in [Schedule::sb_cfm(1.0).unwrap(), Schedule::sbve(0.3, 2.8).unwrap()] {
            for n in [1usize, 2, 3, 7, 16, 33, 64] {
                let grid = TimeGrid::for_schedule(&sched, 1e-4, 1.0, n).unwrap();
                let closed = weights_closed_form(&sched, &grid).unwrap();
                let recursion =
                    weights_from_coeffs(&grid_step_coefficients(&sched, &grid).unwrap()).unwrap();
                for (a, b) in closed.weights.iter().zip(&recursion.weights) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-10);
                }
                assert_abs_diff_eq!(closed.w_y, recursion.w_y, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn empty_coefficient_list_is_rejected() {
        assert!(matches!(weights_from_coeffs(&[]), Err(BridgeError::EmptyInput(_))));
    }

    #[test]
    fn closed_form_requires_positive_rho_at_t0() {
        let sched = Schedule::sb_cfm(1.0).unwrap();
        // A reverse grid cannot start below 1e-6, so drive rho_0 = 0 via a
        // custom rho that vanishes on [0, 0.01].
        let grid = TimeGrid::for_schedule(&sched, 1e-3, 1.0, 4).unwrap();
        let err = weights_closed_form_sb(&grid, |_| 1.0, |t| (t - 0.01).max(0.0));
        assert!(matches!(err, Err(BridgeError::SingularTime { .. })));
    }

    #[test]
    fn unit_sum_composition_of_constant_predictions() {
        let (sched, grid) = sb_cfm_grid(10);
        let profile = weights_closed_form(&sched, &grid).unwrap();
        let s = vec![c(1.5), c(-0.25)];
        let y = vec![c(0.1), c(0.6)];
        let predictions = vec![s.clone(); 10];
        let out = compose_output(&profile, &predictions, &y).unwrap();
        for i in 0..s.len() {
            let expected = (1.0 - 1e-4) * s[i] + 1e-4 * y[i];
            assert!((out[i] - expected).norm() <= 1e-9);
        }
    }

    #[test]
    fn recomposition_reproduces_the_sampler_output() {
        let (sched, grid) = sb_cfm_grid(8);
        let s = vec![c(0.7), c(-1.3)];
        let y = vec![c(0.05), c(0.9)];
        let predictor = OraclePredictor { clean: s };
        let cfg = SampleConfig { record: true, ..SampleConfig::default() };
        let trace = sample(&sched, &y, &predictor, &grid, &cfg).unwrap();
        let profile =
            weights_from_coeffs(&grid_step_coefficients(&sched, &grid).unwrap()).unwrap();
        let recomposed =
            compose_output(&profile, &trace.predictions_last_call_first(), &y).unwrap();
        for (a, b) in recomposed.iter().zip(&trace.final_state) {
            assert!((a - b).norm() <= 1e-9);
        }
    }

    #[test]
    fn recursion_weights_work_for_forward_traversal() {
        let sched = Schedule::ot_cfm(0.5, 0.05).unwrap();
        let grid = TimeGrid::for_schedule(&sched, 0.0, 1.0, 6).unwrap();
        let profile =
            weights_from_coeffs(&grid_step_coefficients(&sched, &grid).unwrap()).unwrap();
        let s = vec![c(0.8)];
        let y = vec![c(-0.3)];
        let predictor = OraclePredictor { clean: s };
        let cfg = SampleConfig { record: true, ..SampleConfig::default() };
        let trace = sample(&sched, &y, &predictor, &grid, &cfg).unwrap();
        let recomposed =
            compose_output(&profile, &trace.predictions_last_call_first(), &y).unwrap();
        assert!((recomposed[0] - trace.final_state[0]).norm() <= 1e-9);
        // Forward traversal: w_1 weights the call made at t_{N-1}.
        let csv = profile.to_csv(&grid).unwrap();
        let first_row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(first_row[1].parse::<f64>().unwrap(), grid.points()[5]);
    }

    #[test]
    fn csv_has_header_step_rows_and_y_row() {
        let (sched, grid) = sb_cfm_grid(10);
        let profile = weights_closed_form(&sched, &grid).unwrap();
        let csv = profile.to_csv(&grid).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 12);
        assert_eq!(lines[0], "step_index,t,weight");
        assert!(lines[1].starts_with("1,"));
        let y_row: Vec<&str> = lines[11].split(',').collect();
        assert_eq!(y_row[0], "y");
        assert_eq!(y_row[1], "");
        assert_eq!(y_row[2].parse::<f64>().unwrap(), 1e-4);
    }
}
