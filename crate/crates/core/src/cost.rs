//! Agent cost families: linear `C = qθ`, quadratic `C = θq²/2`, and a
//! general marginal-cost interface `C(q,θ) = ∫₀^q c(z,θ) dz`.

use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::model::CostTypeDistribution;
use crate::quadrature;

type Fun2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A cost given by its marginal `c(q, θ)`, with an optional closed-form total.
#[derive(Clone)]
pub struct GeneralCost {
    pub name: String,
    pub marginal: Fun2,
    pub total: Option<Fun2>,
}

impl GeneralCost {
    pub fn new(name: impl Into<String>, marginal: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), marginal: Arc::new(marginal), total: None }
    }

    pub fn with_total(mut self, total: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.total = Some(Arc::new(total));
        self
    }
}

impl fmt::Debug for GeneralCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralCost").field("name", &self.name).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum CostModel {
    Linear,
    Quadratic,
    General(GeneralCost),
}

pub(crate) fn fd_step(v: f64) -> f64 {
    1e-6_f64.max(1e-6 * v.abs())
}

/// Second-order differences need a wider step to keep rounding below 1e-6.
fn fd_step2(v: f64) -> f64 {
    1e-4_f64.max(1e-4 * v.abs())
}

impl CostModel {
    pub fn name(&self) -> &str {
        match self {
            CostModel::Linear => "linear",
            CostModel::Quadratic => "quadratic",
            CostModel::General(g) => &g.name,
        }
    }

    /// Marginal cost c(q, θ).
    pub fn marginal(&self, q: f64, theta: f64) -> f64 {
        match self {
            CostModel::Linear => theta,
            CostModel::Quadratic => theta * q,
            CostModel::General(g) => (g.marginal)(q, theta),
        }
    }

    /// Total cost C(q, θ); quadrature of the marginal when no closed form is given.
    pub fn total(&self, q: f64, theta: f64) -> f64 {
        if q == 0.0 {
            return 0.0;
        }
        match self {
            CostModel::Linear => q * theta,
            CostModel::Quadratic => 0.5 * theta * q * q,
            CostModel::General(g) => match &g.total {
                Some(t) => t(q, theta),
                None => quadrature::integrate(|z| (g.marginal)(z, theta), 0.0, q, 1e-12)
                    .map(|r| r.value)
                    .unwrap_or(f64::NAN),
            },
        }
    }

    /// ∂C/∂θ at (q, θ).
    pub fn d_total_d_theta(&self, q: f64, theta: f64) -> f64 {
        match self {
            CostModel::Linear => q,
            CostModel::Quadratic => 0.5 * q * q,
            CostModel::General(g) => match &g.total {
                Some(t) => {
                    let h = fd_step(theta);
                    (t(q, theta + h) - t(q, theta - h)) / (2.0 * h)
                }
                None => quadrature::integrate(|z| self.dmarginal_dtheta(z, theta), 0.0, q, 1e-12)
                    .map(|r| r.value)
                    .unwrap_or(f64::NAN),
            },
        }
    }

    /// ∂c/∂θ at (q, θ).
    pub fn dmarginal_dtheta(&self, q: f64, theta: f64) -> f64 {
        match self {
            CostModel::Linear => 1.0,
            CostModel::Quadratic => q,
            CostModel::General(g) => {
                let h = 1e-5_f64.max(1e-5 * theta.abs());
                ((g.marginal)(q, theta + h) - (g.marginal)(q, theta - h)) / (2.0 * h)
            }
        }
    }

    /// ∂c/∂q at (q, θ).
    pub fn dmarginal_dq(&self, q: f64, theta: f64) -> f64 {
        match self {
            CostModel::Linear => 0.0,
            CostModel::Quadratic => theta,
            CostModel::General(g) => {
                let h = 1e-5_f64.max(1e-5 * q.abs());
                let lo = (q - h).max(0.0);
                ((g.marginal)(q + h, theta) - (g.marginal)(lo, theta)) / (q + h - lo)
            }
        }
    }
}

/// Total cost with a support check on θ.
pub fn cost(model: &CostModel, q: f64, theta: f64, types: &CostTypeDistribution) -> Result<f64> {
    types.ensure_contains(theta)?;
    if !(q >= 0.0) {
        return Err(crate::error::Error::domain(format!("effort must be >= 0, got {q}")));
    }
    Ok(model.total(q, theta))
}

/// Sampling grid for [`check_regularity`]; cell midpoints are used.
#[derive(Debug, Clone, Copy)]
pub struct RegularityGrid {
    pub q_max: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub n_q: usize,
    pub n_theta: usize,
}

impl RegularityGrid {
    pub fn unit() -> Self {
        Self { q_max: 5.0, theta_lo: 0.0, theta_hi: 1.0, n_q: 40, n_theta: 40 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionVerdict {
    pub name: &'static str,
    /// Smallest value of the partial seen on the grid.
    pub min_value: f64,
    pub strict: bool,
    pub weak: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub conditions: Vec<ConditionVerdict>,
}

impl RegularityReport {
    pub fn all_weak(&self) -> bool {
        self.conditions.iter().all(|c| c.weak)
    }
    pub fn all_strict(&self) -> bool {
        self.conditions.iter().all(|c| c.strict)
    }
    pub fn get(&self, name: &str) -> Option<&ConditionVerdict> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

/// Finite-difference check of the four regularity conditions:
/// ∂c/∂q > 0, ∂c/∂θ > 0, ∂²c/∂θ² ≥ 0, ∂²c/∂q∂θ ≥ 0.
/// The first two get strict and weak verdicts; the last two are weak by definition.
pub fn check_regularity(model: &CostModel, grid: &RegularityGrid) -> RegularityReport {
    let c = |q: f64, t: f64| model.marginal(q, t);
    let mut mins = [f64::INFINITY; 4];
    let mut scales = [0.0_f64; 4];
    for i in 0..grid.n_q {
        let q = grid.q_max * (i as f64 + 0.5) / grid.n_q as f64;
        for j in 0..grid.n_theta {
            let t = grid.theta_lo + (grid.theta_hi - grid.theta_lo) * (j as f64 + 0.5) / grid.n_theta as f64;
            let hq = fd_step(q);
            let ht = fd_step(t);
            let h2q = fd_step2(q);
            let h2t = fd_step2(t);
            let vals = [
                (c(q + hq, t) - c(q - hq, t)) / (2.0 * hq),
                (c(q, t + ht) - c(q, t - ht)) / (2.0 * ht),
                (c(q, t + h2t) - 2.0 * c(q, t) + c(q, t - h2t)) / (h2t * h2t),
                (c(q + h2q, t + h2t) - c(q + h2q, t - h2t) - c(q - h2q, t + h2t) + c(q - h2q, t - h2t))
                    / (4.0 * h2q * h2t),
            ];
            let scale = c(q, t).abs().max(1.0);
            for k in 0..4 {
                mins[k] = mins[k].min(vals[k]);
                scales[k] = scales[k].max(scale);
            }
        }
    }
    let names = ["dc/dq", "dc/dtheta", "d2c/dtheta2", "d2c/dq_dtheta"];
    let conditions = (0..4)
        .map(|k| {
            let tol = 1e-6 * scales[k];
            let weak = mins[k] >= -tol;
            let strict = if k < 2 { mins[k] > tol } else { weak };
            ConditionVerdict { name: names[k], min_value: mins[k], strict, weak }
        })
        .collect();
    RegularityReport { conditions }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthfulnessPoint {
    pub theta: f64,
    /// None where the schedule is zero (or straddles zero) and the condition is vacuous.
    pub value: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthfulnessReport {
    pub points: Vec<TruthfulnessPoint>,
}

impl TruthfulnessReport {
    pub fn passes(&self) -> bool {
        self.points.iter().all(|p| p.pass)
    }
    pub fn worst(&self) -> f64 {
        self.points.iter().filter_map(|p| p.value).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Truthfulness condition of the general mechanism along a type grid, with
/// competitors held fixed inside `schedule`:
///
/// `∂c(Q,η)/∂η − c(Q,η)·h''(Q)/h'(Q)·∂Q/∂η ≤ 0`, `h(q) = 1/(a+q)`,
///
/// which for the Gaussian risk reads `∂c/∂η + 2c·Q'/(a+Q) ≤ 0`.
pub fn truthfulness_condition(
    model: &CostModel,
    schedule: &dyn Fn(f64) -> f64,
    precision: f64,
    theta_grid: &[f64],
) -> TruthfulnessReport {
    let points = theta_grid
        .iter()
        .map(|&t| {
            let h = fd_step(t);
            let (qm, q0, qp) = (schedule(t - h), schedule(t), schedule(t + h));
            if !(qm > 0.0 && q0 > 0.0 && qp > 0.0) {
                return TruthfulnessPoint { theta: t, value: None, pass: true };
            }
            let dq = (qp - qm) / (2.0 * h);
            let c = model.marginal(q0, t);
            let dc = model.dmarginal_dtheta(q0, t);
            let v = dc + 2.0 * c * dq / (precision + q0);
            let tol = 1e-6 * dc.abs().max(1.0);
            TruthfulnessPoint { theta: t, value: Some(v), pass: v <= tol }
        })
        .collect();
    TruthfulnessReport { points }
}
