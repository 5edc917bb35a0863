//! Adaptive Gauss-Legendre quadrature used by the numeric oracles.

use crate::error::{BridgeError, Result};

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1],
/// computed by Newton iteration on the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 2, "need at least a 2-point rule");
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi-style initial guess for the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_n' by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
    }
    rule
}

fn panel(f: &impl Fn(f64) -> f64, a: f64, b: f64, rule: &[(f64, f64)]) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for &(x, w) in rule {
        acc += w * f(mid + half * x);
    }
    half * acc
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    whole: f64,
    rule: &[(f64, f64)],
    scale: f64,
    rel_tol: f64,
    depth: u32,
) -> Result<f64> {
    let mid = 0.5 * (a + b);
    let left = panel(f, a, mid, rule);
    let right = panel(f, mid, b, rule);
    let refined = left + right;
    if (refined - whole).abs() <= rel_tol * scale.max(refined.abs()) {
        return Ok(refined);
    }
    if depth == 0 {
        return Err(BridgeError::QuadratureNoConverge { a, b, tol: rel_tol });
    }
    let l = adaptive(f, a, mid, left, rule, scale, rel_tol, depth - 1)?;
    let r = adaptive(f, mid, b, right, rule, scale, rel_tol, depth - 1)?;
    Ok(l + r)
}

/// Adaptive integral of `f` over [a, b] (signed; a > b is allowed).
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, n_nodes: usize, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let rule = gauss_legendre(n_nodes.max(8));
    let whole = panel(&f, a, b, &rule);
    let scale = whole.abs().max(1e-300);
    adaptive(&f, a, b, whole, &rule, scale, rel_tol, 48)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nodes_integrate_polynomials_exactly() {
        // A 16-point rule is exact for degree <= 31.
        let value = integrate(|x| x.powi(7) - 3.0 * x.powi(4) + x, 0.0, 2.0, 16, 1e-13).unwrap();
        let exact = 2.0f64.powi(8) / 8.0 - 3.0 * 2.0f64.powi(5) / 5.0 + 2.0;
        assert_relative_eq!(value, exact, max_relative = 1e-14);
    }

    #[test]
    fn signed_direction() {
        let forward = integrate(|x| x.exp(), 0.0, 1.0, 16, 1e-13).unwrap();
        let backward = integrate(|x| x.exp(), 1.0, 0.0, 16, 1e-13).unwrap();
        assert_relative_eq!(forward, std::f64::consts::E - 1.0, max_relative = 1e-14);
        assert_relative_eq!(backward, -forward, max_relative = 1e-14);
    }

    #[test]
    fn resolves_sharply_peaked_integrands() {
        // int_0^1 1/(x + 1e-4) dx = ln((1 + 1e-4)/1e-4)
        let value = integrate(|x| 1.0 / (x + 1e-4), 0.0, 1.0, 24, 1e-13).unwrap();
        assert_relative_eq!(value, (1.0001f64 / 1e-4).ln(), max_relative = 1e-12);
    }
}
