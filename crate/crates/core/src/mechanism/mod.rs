//! Principal side of COPE: effort schedules, payment terms and the predictor.

mod general;
mod linear;
mod predictor;
mod quadratic;

pub use general::{general_k_s, AgentRisk, GaussianRisk, GeneralConfig, GeneralCope};
pub use linear::{printed_linear_pi, LinearCope};
pub use predictor::{predict, unshrink};
pub use quadratic::QuadraticCope;

use crate::cost::CostModel;
use crate::error::Result;
use crate::model::{CostTypeDistribution, GaussianPrior};
use crate::quadrature;

/// Effort request and payment terms `R = π − K·(x − ŷ)² + S` for one agent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Contract {
    pub effort: f64,
    pub pi: f64,
    pub k: f64,
    pub s: f64,
}

impl Contract {
    pub fn payment(&self, x: f64, y_hat: f64) -> f64 {
        self.pi - self.k * (x - y_hat).powi(2) + self.s
    }

    pub fn is_zero(&self) -> bool {
        self.effort == 0.0 && self.pi == 0.0 && self.k == 0.0 && self.s == 0.0
    }

    /// Expected payoff of exerting `q` at true type `theta` and reporting the
    /// posterior mean, whose expected loss is 1/(a+q).
    pub fn expected_payoff(&self, q: f64, theta: f64, cost: &CostModel, precision: f64) -> f64 {
        let risk = if self.k == 0.0 { 0.0 } else { self.k / (precision + q) };
        self.pi - risk + self.s - cost.total(q, theta)
    }
}

/// How the linear mechanism picks among tied lowest reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    LowestIndex,
    /// Uniform choice among tied agents, seeded from this value and the report vector.
    Seeded(u64),
}

pub trait Mechanism: Send + Sync {
    fn name(&self) -> &'static str;
    fn prior(&self) -> &GaussianPrior;
    fn types(&self) -> &CostTypeDistribution;
    fn cost(&self) -> &CostModel;

    /// Requested efforts Q^P(θ̂).
    fn efforts(&self, reported: &[f64]) -> Result<Vec<f64>>;

    /// Terms offered to `agent` given the full report vector.
    fn contract(&self, reported: &[f64], agent: usize) -> Result<Contract>;

    fn contracts(&self, reported: &[f64]) -> Result<Vec<Contract>> {
        (0..reported.len()).map(|n| self.contract(reported, n)).collect()
    }

    /// Terms for agent 0 reporting each value of `own`, competitors reporting `others`.
    fn contract_sweep(&self, own: &[f64], others: &[f64]) -> Result<Vec<Contract>> {
        let mut v = Vec::with_capacity(others.len() + 1);
        own.iter()
            .map(|&t| {
                v.clear();
                v.push(t);
                v.extend_from_slice(others);
                self.contract(&v, 0)
            })
            .collect()
    }

    fn predict(&self, reports: &[f64], efforts: &[f64]) -> f64 {
        predict(self.prior(), reports, efforts)
    }
}

pub(crate) fn check_reports(reported: &[f64], types: &CostTypeDistribution) -> Result<()> {
    if reported.is_empty() {
        return Err(crate::error::Error::domain("empty report vector"));
    }
    reported.iter().try_for_each(|&t| types.ensure_contains(t))
}

/// `∫_{pᵢ}^{upper} f` for every point, sharing work across sorted points.
/// Points at or above `upper` get 0.
pub(crate) fn tail_integrals<F: Fn(f64) -> f64>(
    points: &[f64],
    upper: f64,
    f: F,
    breaks: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| points[i].total_cmp(&points[j]));
    let mut out = vec![0.0; points.len()];
    let mut acc = 0.0;
    let mut right = upper;
    for &i in order.iter().rev() {
        let p = points[i];
        if p >= upper {
            continue;
        }
        if p < right {
            acc += quadrature::integrate_with_breaks(&f, p, right, breaks, tol)?.value;
            right = p;
        }
        out[i] = acc;
    }
    Ok(out)
}
