//! Positive root of `W³ − a·W² − s = 0` (a = prior precision, s = Σ 1/γₘ).

use crate::error::{Error, Result};
use crate::model::CostTypeDistribution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicSolution {
    pub w: f64,
    /// λ = s·a³/27 + s²/4, the discriminant of the depressed cubic.
    pub lambda: f64,
}

/// Relative residual |W³ − aW² − s| / max(1, W³).
pub fn residual(w: f64, a: f64, s: f64) -> f64 {
    (w * w * w - a * w * w - s).abs() / (w * w * w).max(1.0)
}

/// Closed-form Cardano root followed by one Newton step.
///
/// With `A = a³/27 + s/2` the root is `a/3 + ∛(A+√λ) + ∛(A−√λ)`; the second
/// radicand is evaluated as `(a⁶/729)/(A+√λ)` to avoid cancellation.
pub fn solve_cubic(a: f64, s: f64) -> Result<CubicSolution> {
    if !(a >= 0.0 && s >= 0.0) || !(a > 0.0 || s > 0.0) || !a.is_finite() || !s.is_finite() {
        return Err(Error::domain(format!("cubic needs a >= 0, s >= 0, a + s > 0 (a={a}, s={s})")));
    }
    let a3 = a * a * a;
    let big_a = a3 / 27.0 + 0.5 * s;
    let lambda = s * a3 / 27.0 + 0.25 * s * s;
    let plus = big_a + lambda.sqrt();
    let minus = (a3 * a3 / 729.0) / plus;
    let mut w = a / 3.0 + plus.cbrt() + minus.cbrt();
    let d = 3.0 * w * w - 2.0 * a * w;
    if d > 0.0 {
        w -= (w * w * w - a * w * w - s) / d;
    }
    Ok(CubicSolution { w, lambda })
}

/// `W` for reported types: s = Σ 1/γ(θ̂ₘ).
pub fn solve_w(reported: &[f64], types: &CostTypeDistribution, precision: f64) -> Result<CubicSolution> {
    solve_cubic(precision, inverse_sum(reported, |t| types.virtual_cost(t))?)
}

/// Σ 1/g(θₘ), with a domain error when any g(θₘ) ≤ 0.
pub fn inverse_sum(thetas: &[f64], g: impl Fn(f64) -> f64) -> Result<f64> {
    thetas.iter().try_fold(0.0, |acc, &t| {
        let v = g(t);
        if v > 0.0 {
            Ok(acc + 1.0 / v)
        } else {
            Err(Error::domain(format!("cost {v} at type {t} must be positive")))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let u = CostTypeDistribution::uniform(0.0, 1.0).unwrap();
        let w = solve_w(&[0.5], &u, 0.0).unwrap().w;
        assert!((w - 1.0).abs() < 1e-14);
        let w = solve_w(&[0.5, 0.5], &u, 0.0).unwrap().w;
        assert!((w - 2f64.cbrt()).abs() < 1e-14);
        assert!((w - 1.259921).abs() < 1e-6);
        let w = solve_cubic(1.0, 0.0).unwrap().w;
        assert!((w - 1.0).abs() < 1e-15);
        assert!(solve_w(&[0.0], &u, 1.0).is_err());
        assert!(solve_cubic(0.0, 0.0).is_err());
    }

    #[test]
    fn extreme_ratios_keep_residual_small() {
        for &(a, s) in &[(1e-6, 1e6), (1e6, 1e-6), (1.0, 1e-12), (1e3, 1e3), (0.0, 1e-9)] {
            let w = solve_cubic(a, s).unwrap().w;
            assert!(residual(w, a, s) < 1e-10, "a={a} s={s} w={w}");
            assert!(w > 0.0);
        }
    }
}
