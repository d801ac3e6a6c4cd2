//! Quadratic cost: every agent works ("crowd-sourcing"), Q_n = 1/(γ_n W²).

use super::{check_reports, tail_integrals, Contract, Mechanism};
use crate::cost::CostModel;
use crate::cubic::{inverse_sum, solve_cubic};
use crate::error::Result;
use crate::model::{CostTypeDistribution, GaussianPrior};

const PI_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct QuadraticCope {
    prior: GaussianPrior,
    types: CostTypeDistribution,
}

impl QuadraticCope {
    pub fn new(prior: GaussianPrior, types: CostTypeDistribution) -> Self {
        Self { prior, types }
    }

    fn inv_gamma_sum(&self, thetas: &[f64]) -> Result<f64> {
        inverse_sum(thetas, |t| self.types.virtual_cost(t))
    }

    /// Effort of an agent reporting `theta` when the others contribute
    /// `s_others = Σ 1/γ` to the cubic.
    pub fn own_effort(&self, theta: f64, s_others: f64) -> Result<f64> {
        let g = self.types.virtual_cost(theta);
        let w = solve_cubic(self.prior.precision(), s_others + 1.0 / g)?.w;
        Ok(1.0 / (g * w * w))
    }

    fn terms(&self, theta_hat: f64, q: f64, tail: f64) -> Contract {
        let r = self.prior.precision() + q;
        Contract {
            effort: q,
            pi: 0.5 * (theta_hat * q * q + tail),
            k: r * r * theta_hat * q,
            s: r * theta_hat * q,
        }
    }

    fn tails(&self, own: &[f64], s_others: f64) -> Result<Vec<f64>> {
        let f = |z: f64| self.own_effort(z, s_others).map(|q| q * q).unwrap_or(f64::NAN);
        tail_integrals(own, self.types.theta_hi, f, &[], PI_TOL)
    }
}

impl Mechanism for QuadraticCope {
    fn name(&self) -> &'static str {
        "cope"
    }
    fn prior(&self) -> &GaussianPrior {
        &self.prior
    }
    fn types(&self) -> &CostTypeDistribution {
        &self.types
    }
    fn cost(&self) -> &CostModel {
        &CostModel::Quadratic
    }

    fn efforts(&self, reported: &[f64]) -> Result<Vec<f64>> {
        check_reports(reported, &self.types)?;
        let w = solve_cubic(self.prior.precision(), self.inv_gamma_sum(reported)?)?.w;
        Ok(reported.iter().map(|&t| 1.0 / (self.types.virtual_cost(t) * w * w)).collect())
    }

    fn contract(&self, reported: &[f64], agent: usize) -> Result<Contract> {
        check_reports(reported, &self.types)?;
        let others: Vec<f64> =
            reported.iter().enumerate().filter(|&(i, _)| i != agent).map(|(_, &v)| v).collect();
        let s_others = self.inv_gamma_sum(&others)?;
        let t = reported[agent];
        let q = self.own_effort(t, s_others)?;
        let tail = self.tails(&[t], s_others)?[0];
        Ok(self.terms(t, q, tail))
    }

    fn contract_sweep(&self, own: &[f64], others: &[f64]) -> Result<Vec<Contract>> {
        own.iter().try_for_each(|&t| self.types.ensure_contains(t))?;
        others.iter().try_for_each(|&t| self.types.ensure_contains(t))?;
        let s_others = self.inv_gamma_sum(others)?;
        let tails = self.tails(own, s_others)?;
        own.iter()
            .zip(tails)
            .map(|(&t, tail)| Ok(self.terms(t, self.own_effort(t, s_others)?, tail)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> QuadraticCope {
        QuadraticCope::new(GaussianPrior::new(0.0, f64::INFINITY).unwrap(), CostTypeDistribution::uniform(0.0, 1.0).unwrap())
    }

    #[test]
    fn efforts_examples() {
        let m = flat();
        assert!((m.efforts(&[0.5]).unwrap()[0] - 1.0).abs() < 1e-14);
        let q = m.efforts(&[0.5, 0.5]).unwrap();
        let want = 2f64.powf(-2.0 / 3.0);
        assert!(q.iter().all(|&v| (v - want).abs() < 1e-14));
        assert!((want - 0.629961).abs() < 1e-6);
    }

    #[test]
    fn contract_example_flat_prior() {
        let c = flat().contract(&[0.5], 0).unwrap();
        assert!((c.effort - 1.0).abs() < 1e-14);
        assert!((c.k - 0.5).abs() < 1e-14);
        assert!((c.s - 0.5).abs() < 1e-14);
    }

    #[test]
    fn pi_with_single_agent_matches_closed_form() {
        // a = 0, N = 1: Q(z) = (2z)^{-1/3}, ∫ Q² = 3·2^{-2/3}·(1 − t^{1/3}).
        let m = flat();
        for &t in &[0.1f64, 0.5, 0.9] {
            let q = (2.0 * t).powf(-1.0 / 3.0);
            let tail = 3.0 * 2f64.powf(-2.0 / 3.0) * (1.0 - t.cbrt());
            let c = m.contract(&[t], 0).unwrap();
            assert!((c.pi - 0.5 * (t * q * q + tail)).abs() < 1e-10);
        }
    }

    #[test]
    fn top_type_breaks_even() {
        let m = QuadraticCope::new(GaussianPrior::standard(), CostTypeDistribution::uniform(0.0, 1.0).unwrap());
        let c = m.contract(&[1.0, 0.3, 0.6], 0).unwrap();
        let u = c.expected_payoff(c.effort, 1.0, &CostModel::Quadratic, 1.0);
        assert!(u.abs() < 1e-12, "{u}");
    }

    #[test]
    fn sweep_matches_pointwise_and_pi_decreases() {
        let m = QuadraticCope::new(GaussianPrior::standard(), CostTypeDistribution::uniform(0.0, 1.0).unwrap());
        let own: Vec<f64> = (1..=25).map(|i| i as f64 / 25.0).collect();
        let sweep = m.contract_sweep(&own, &[0.2, 0.7]).unwrap();
        for (t, c) in own.iter().zip(&sweep) {
            let d = m.contract(&[*t, 0.2, 0.7], 0).unwrap();
            assert!((c.pi - d.pi).abs() < 1e-10 && (c.k - d.k).abs() < 1e-14);
        }
        assert!(sweep.windows(2).all(|w| w[1].pi < w[0].pi));
    }
}
