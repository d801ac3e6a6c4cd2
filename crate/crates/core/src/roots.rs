//! One-dimensional root finding and maximization.

use crate::error::{Error, Result};

/// Bisection on a sign change. Returns the midpoint of the final bracket.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::domain(format!("no sign change on [{lo}, {hi}]")));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Newton's method safeguarded by a bracket; falls back to bisection
/// whenever a Newton step leaves the bracket.
pub fn newton_bracketed<F, D>(f: F, df: D, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::domain(format!("no sign change on [{lo}, {hi}]")));
    }
    let rising = fhi > 0.0;
    let mut x = 0.5 * (lo + hi);
    for it in 0..max_iter {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == rising {
            hi = x;
        } else {
            lo = x;
        }
        let d = df(x);
        let mut next = x - fx / d;
        if !(next > lo && next < hi) || !d.is_finite() || d == 0.0 {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= tol * x.abs().max(1.0) || hi - lo <= tol * x.abs().max(1.0) {
            return Ok(next);
        }
        x = next;
        if it + 1 == max_iter {
            break;
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, detail: format!("bracket [{lo}, {hi}]") })
}

/// Doubles `hi` until `f(hi)` has the sign opposite to `f(lo)`.
pub fn expand_upper<F: Fn(f64) -> f64>(f: F, lo: f64, mut hi: f64) -> Result<f64> {
    let s = f(lo).signum();
    for _ in 0..200 {
        if f(hi).signum() != s {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(Error::domain("could not bracket a root"))
}

/// Golden-section search for the maximum of a unimodal function.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    let mid = 0.5 * (lo + hi);
    // Endpoint optimum (e.g. a corner at 0) is not interior to any bracket.
    [lo, mid, hi].into_iter().fold(mid, |best, x| if f(x) > f(best) { x } else { best })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cube_root_of_two() {
        let r = bisect(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
        let n = newton_bracketed(|x| x * x * x - 2.0, |x| 3.0 * x * x, 0.0, 2.0, 1e-15, 100).unwrap();
        assert!((n - 2f64.cbrt()).abs() < 1e-14);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100).is_err());
    }

    #[test]
    fn golden_finds_interior_and_corner() {
        let x = golden_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        let x = golden_max(|x| -x, 0.0, 1.0, 1e-12);
        assert_eq!(x, 0.0);
    }
}
