//! Linear cost: the lowest reported type gets the whole task ("crowd-tender").

use rand::Rng;

use super::{check_reports, tail_integrals, Contract, Mechanism, TieBreak};
use crate::cost::CostModel;
use crate::error::Result;
use crate::model::{CostTypeDistribution, GaussianPrior};
use crate::rng::{mix64, stream, Purpose};
use crate::roots;

const PI_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LinearCope {
    prior: GaussianPrior,
    types: CostTypeDistribution,
    tie: TieBreak,
    /// Type above which the requested effort is clamped to zero.
    clamp: f64,
}

impl LinearCope {
    pub fn new(prior: GaussianPrior, types: CostTypeDistribution) -> Self {
        Self::with_tie_break(prior, types, TieBreak::LowestIndex)
    }

    pub fn with_tie_break(prior: GaussianPrior, types: CostTypeDistribution, tie: TieBreak) -> Self {
        let a = prior.precision();
        let (lo, hi) = (types.theta_lo, types.theta_hi);
        // Solve γ(z) = 1/a²; beyond it (γ^{-1/2} ≤ a) effort is zero.
        let clamp = if a == 0.0 {
            f64::INFINITY
        } else {
            let target = 1.0 / (a * a);
            if types.virtual_cost(hi) <= target {
                f64::INFINITY
            } else if types.virtual_cost(lo) >= target {
                lo
            } else {
                roots::bisect(|z| types.virtual_cost(z) - target, lo, hi, 1e-15, 200).unwrap_or(hi)
            }
        };
        Self { prior, types, tie, clamp }
    }

    /// Q(θ) = max(γ(θ)^{-1/2} − a, 0) for the winning agent.
    pub fn winner_effort(&self, theta: f64) -> f64 {
        if theta >= self.clamp {
            return 0.0;
        }
        (1.0 / self.types.virtual_cost(theta).sqrt() - self.prior.precision()).max(0.0)
    }

    pub fn winner(&self, reported: &[f64]) -> usize {
        let min = reported.iter().copied().fold(f64::INFINITY, f64::min);
        let tied: Vec<usize> = (0..reported.len()).filter(|&i| reported[i] == min).collect();
        match self.tie {
            TieBreak::LowestIndex => tied[0],
            TieBreak::Seeded(seed) if tied.len() > 1 => {
                let key = reported.iter().fold(mix64(seed), |h, t| mix64(h ^ t.to_bits()));
                tied[stream(key, 0, Purpose::TieBreak).gen_range(0..tied.len())]
            }
            TieBreak::Seeded(_) => tied[0],
        }
    }

    /// π = θ̂Q(θ̂) + ∫_θ̂^U Q(z) dz, U the lowest competing report (capped at θ̄).
    fn pi(&self, theta_hat: f64, upper: f64) -> Result<f64> {
        let tail = tail_integrals(&[theta_hat], upper, |z| self.winner_effort(z), &[self.clamp], PI_TOL)?;
        Ok(theta_hat * self.winner_effort(theta_hat) + tail[0])
    }

    fn terms(&self, theta_hat: f64, pi: f64) -> Contract {
        let q = self.winner_effort(theta_hat);
        if q == 0.0 {
            return Contract::default();
        }
        let r = self.prior.precision() + q;
        Contract { effort: q, pi, k: theta_hat * r * r, s: theta_hat * r }
    }

    fn check_virtual_cost(&self, theta: f64) -> Result<()> {
        if self.types.virtual_cost(theta) > 0.0 {
            Ok(())
        } else {
            Err(crate::error::Error::Domain(format!("virtual cost at report {theta} is zero")))
        }
    }

    fn upper(&self, others: impl Iterator<Item = f64>) -> f64 {
        others.fold(self.types.theta_hi, f64::min)
    }
}

/// π as printed in the closed form with the factor 2 on the bracket and
/// without the clamp; diagnostic only.
pub fn printed_linear_pi(theta_hat: f64, theta_lo: f64, theta_hi: f64, precision: f64) -> f64 {
    theta_hat / (2.0 * theta_hat - theta_lo).sqrt() - theta_hi * precision
        + 2.0 * ((2.0 * theta_hi - theta_lo).sqrt() - (2.0 * theta_hat - theta_lo).sqrt())
}

impl Mechanism for LinearCope {
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
        &CostModel::Linear
    }

    fn efforts(&self, reported: &[f64]) -> Result<Vec<f64>> {
        check_reports(reported, &self.types)?;
        let mut q = vec![0.0; reported.len()];
        let w = self.winner(reported);
        self.check_virtual_cost(reported[w])?;
        q[w] = self.winner_effort(reported[w]);
        Ok(q)
    }

    fn contract(&self, reported: &[f64], agent: usize) -> Result<Contract> {
        check_reports(reported, &self.types)?;
        if self.winner(reported) != agent {
            return Ok(Contract::default());
        }
        let t = reported[agent];
        self.check_virtual_cost(t)?;
        if self.winner_effort(t) == 0.0 {
            return Ok(Contract::default());
        }
        let upper = self.upper(reported.iter().enumerate().filter(|&(i, _)| i != agent).map(|(_, &v)| v));
        Ok(self.terms(t, self.pi(t, upper)?))
    }

    fn contract_sweep(&self, own: &[f64], others: &[f64]) -> Result<Vec<Contract>> {
        if self.tie != TieBreak::LowestIndex {
            return default_sweep(self, own, others);
        }
        own.iter().try_for_each(|&t| self.types.ensure_contains(t))?;
        others.iter().try_for_each(|&t| self.types.ensure_contains(t))?;
        own.iter().try_for_each(|&t| self.check_virtual_cost(t))?;
        let upper = self.upper(others.iter().copied());
        let tails = tail_integrals(own, upper, |z| self.winner_effort(z), &[self.clamp], PI_TOL)?;
        Ok(own
            .iter()
            .zip(tails)
            .map(|(&t, tail)| {
                let wins = others.iter().all(|&o| t <= o);
                if wins {
                    self.terms(t, t * self.winner_effort(t) + tail)
                } else {
                    Contract::default()
                }
            })
            .collect())
    }
}

fn default_sweep<M: Mechanism + ?Sized>(m: &M, own: &[f64], others: &[f64]) -> Result<Vec<Contract>> {
    let mut v = Vec::with_capacity(others.len() + 1);
    own.iter()
        .map(|&t| {
            v.clear();
            v.push(t);
            v.extend_from_slice(others);
            m.contract(&v, 0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(var0: f64) -> LinearCope {
        LinearCope::new(GaussianPrior::new(0.0, var0).unwrap(), CostTypeDistribution::uniform(0.0, 1.0).unwrap())
    }

    #[test]
    fn efforts_examples() {
        let m = unit(1.0);
        assert_eq!(m.efforts(&[0.125, 0.9]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(m.efforts(&[0.5]).unwrap(), vec![0.0]);
        assert!(m.efforts(&[]).is_err());
        assert!(m.efforts(&[0.0, 0.5]).is_err());
        assert_eq!(m.efforts(&[0.3, 0.3]).unwrap()[1], 0.0);
    }

    #[test]
    fn effort_matches_grid_search_of_reduced_objective() {
        // maximize −1/(a+q) − qγ on a fine grid
        let (a, gamma) = (1.0, 0.25);
        let best = (0..=400_000)
            .map(|i| i as f64 * 1e-5)
            .max_by(|&x, &y| {
                let f = |q: f64| -1.0 / (a + q) - q * gamma;
                f(x).total_cmp(&f(y))
            })
            .unwrap();
        assert!((best - 1.0).abs() < 2e-5);
    }

    #[test]
    fn payment_examples() {
        // σ₀² = 4 so that θ̂ = 0.5 is strictly inside the active region.
        let m = unit(4.0);
        let c = m.contract(&[0.5, 0.9], 0).unwrap();
        assert!((c.k - 0.5).abs() < 1e-15, "{}", c.k);
        assert!((c.s - 0.5).abs() < 1e-15);
        for &t in &[0.05, 0.2, 0.6] {
            let c = m.contract(&[t], 0).unwrap();
            assert!((c.k - t / (2.0 * t)).abs() < 1e-14);
            assert!((c.s - t / (2.0 * t).sqrt()).abs() < 1e-14);
        }
        // At σ₀² = 1 the same report sits on the clamp boundary: Q = 0, the
        // tail integrand is clamped to 0 on [0.5, 1], and the rule is zero.
        let m1 = unit(1.0);
        assert_eq!(m1.winner_effort(0.5), 0.0);
        assert!(m1.pi(0.5, 1.0).unwrap().abs() < 1e-15);
        assert!(m1.contract(&[0.5], 0).unwrap().is_zero());
    }

    #[test]
    fn pi_matches_antiderivative() {
        let m = unit(4.0);
        let a = 0.25;
        // No clamp inside [θ̂, 1] since γ(1) = 2 < 16.
        for &t in &[0.05f64, 0.3, 0.7] {
            let exact = t * (1.0 / (2.0 * t).sqrt() - a) + ((2.0f64).sqrt() - (2.0 * t).sqrt()) - a * (1.0 - t);
            let got = m.contract(&[t], 0).unwrap().pi;
            assert!((got - exact).abs() < 1e-10, "{got} vs {exact}");
            let printed = printed_linear_pi(t, 0.0, 1.0, a);
            assert!((printed - exact - ((2.0f64).sqrt() - (2.0 * t).sqrt())).abs() < 1e-12);
        }
    }

    #[test]
    fn pi_at_top_is_cost_of_requested_effort() {
        let m = unit(16.0);
        let c = m.contract(&[1.0], 0).unwrap();
        assert!((c.pi - m.winner_effort(1.0)).abs() < 1e-15);
        let payoff = c.expected_payoff(c.effort, 1.0, &CostModel::Linear, 1.0 / 16.0);
        assert!(payoff.abs() < 1e-12, "{payoff}");
    }

    #[test]
    fn pi_stops_at_lowest_competitor() {
        let m = unit(4.0);
        let solo = m.contract(&[0.2], 0).unwrap().pi;
        let duo = m.contract(&[0.2, 0.4], 0).unwrap().pi;
        let gap = crate::quadrature::integrate(|z| m.winner_effort(z), 0.4, 1.0, 1e-12).unwrap().value;
        assert!((solo - duo - gap).abs() < 1e-10);
    }

    #[test]
    fn sweep_matches_pointwise() {
        let m = unit(2.0);
        let own: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
        let others = [0.45, 0.8];
        let sweep = m.contract_sweep(&own, &others).unwrap();
        for (t, c) in own.iter().zip(sweep) {
            let d = m.contract(&[*t, 0.45, 0.8], 0).unwrap();
            assert!((c.pi - d.pi).abs() < 1e-10 && c.k == d.k && c.s == d.s, "{t}");
        }
    }

    #[test]
    fn seeded_ties_are_reproducible_and_spread() {
        let m = LinearCope::with_tie_break(
            GaussianPrior::standard(),
            CostTypeDistribution::uniform(0.0, 1.0).unwrap(),
            TieBreak::Seeded(3),
        );
        let r = [0.1, 0.1, 0.1];
        assert_eq!(m.winner(&r), m.winner(&r));
        let picks: std::collections::BTreeSet<usize> = (0..50)
            .map(|s| {
                LinearCope::with_tie_break(
                    GaussianPrior::standard(),
                    CostTypeDistribution::uniform(0.0, 1.0).unwrap(),
                    TieBreak::Seeded(s),
                )
                .winner(&r)
            })
            .collect();
        assert_eq!(picks.len(), 3);
    }
}
