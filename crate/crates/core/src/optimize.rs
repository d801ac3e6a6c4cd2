//! Projected gradient ascent on the nonnegative orthant.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentConfig {
    /// Stop when the projected-gradient norm falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 50_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub pg_norm: f64,
}

/// Relative noise level assumed for objective values.
const NOISE_FLOOR: f64 = 1e-9;

/// Norm of the gradient projected onto the feasible directions at `x`.
pub fn projected_gradient_norm(x: &[f64], g: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| if xi <= 0.0 { gi.max(0.0) } else { gi })
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Maximizes `f` over `x ≥ 0` with Barzilai–Borwein steps and Armijo backtracking.
pub fn maximize_nonneg<F, G>(f: F, grad: G, x0: &[f64], cfg: &AscentConfig) -> Result<AscentResult>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let mut x: Vec<f64> = x0.iter().map(|v| v.max(0.0)).collect();
    let mut fx = f(&x);
    let mut g = grad(&x);
    let mut step = 1.0;
    let mut trial = vec![0.0; x.len()];
    for it in 0..cfg.max_iter {
        let pg = projected_gradient_norm(&x, &g);
        if pg < cfg.tol {
            return Ok(AscentResult { x, value: fx, iterations: it, pg_norm: pg });
        }
        let mut accepted = false;
        let mut ft = f64::NEG_INFINITY;
        for _ in 0..80 {
            for i in 0..x.len() {
                trial[i] = (x[i] + step * g[i]).max(0.0);
            }
            ft = f(&trial);
            let gain: f64 = g.iter().zip(trial.iter().zip(&x)).map(|(gi, (t, xi))| gi * (t - xi)).sum();
            if ft >= fx + 1e-4 * gain && ft.is_finite() {
                accepted = true;
                break;
            }
            // Objectives built on finite differences are noisy near 1e-10;
            // once the predicted gain is below that, Armijo cannot tell
            // progress from noise, so judge the step by the gradient instead.
            if gain <= NOISE_FLOOR * fx.abs().max(1.0)
                && ft.is_finite()
                && projected_gradient_norm(&trial, &grad(&trial)) < pg
            {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence {
                iterations: it,
                detail: format!("line search stalled, projected gradient {pg:e}"),
            });
        }
        let gt = grad(&trial);
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..x.len() {
            let s = trial[i] - x[i];
            ss += s * s;
            sy -= s * (gt[i] - g[i]);
        }
        // A move of a few ulps carries no curvature information; grow instead.
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let informative = ss > 1e-26 * (1.0 + xx);
        step = if sy > 0.0 && informative { (ss / sy).clamp(1e-12, 1e12) } else { (step * 4.0).min(1e12) };
        std::mem::swap(&mut x, &mut trial);
        fx = ft;
        g = gt;
    }
    let pg = projected_gradient_norm(&x, &g);
    Err(Error::NonConvergence { iterations: cfg.max_iter, detail: format!("projected gradient {pg:e}") })
}
