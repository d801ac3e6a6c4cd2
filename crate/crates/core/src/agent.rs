//! Agent-side strategy and brute-force best-response oracles.

use crate::cost::CostModel;
use crate::error::Result;
use crate::mechanism::{Contract, Mechanism};
use crate::model::{draw_world, noise_draw, observe_with, GaussianPrior, Scenario, TYPE_FLOOR};
use crate::quadrature;
use crate::rng::{mix64, trial_seed};
use crate::roots;
use crate::stats::Welford;

/// Posterior mean of x given the agent's own observation; μ₀ without one.
pub fn truthful_report_obs(y: Option<f64>, q: f64, prior: &GaussianPrior) -> f64 {
    match y {
        Some(y) if q > 0.0 => {
            let a = prior.precision();
            (prior.mu0 * a + y * q) / (a + q)
        }
        _ => prior.mu0,
    }
}

/// Effort maximizing π − K/(a+q) + S − C(q,θ): the root of K/(a+q)² = c(q,θ),
/// or zero when even the first unit does not pay.
pub fn optimal_effort(contract: &Contract, theta: f64, cost: &CostModel, precision: f64) -> Result<f64> {
    let k = contract.k;
    if k <= 0.0 {
        return Ok(0.0);
    }
    let g = |q: f64| k / (precision + q).powi(2) - cost.marginal(q, theta);
    if g(0.0) <= 0.0 {
        return Ok(0.0);
    }
    let start = contract.effort.max(1e-3) * 2.0;
    let hi = roots::expand_upper(g, 0.0, start)?;
    roots::bisect(g, 0.0, hi, 1e-15 * hi, 400)
}

/// Golden-section maximizer of the analytic interim payoff over [0, q_max].
pub fn best_response_effort(contract: &Contract, theta: f64, cost: &CostModel, precision: f64) -> f64 {
    if contract.k == 0.0 {
        return 0.0;
    }
    let q_max = 10.0 * (1.0 + contract.effort + (contract.k / theta.max(TYPE_FLOOR)).sqrt());
    roots::golden_max(|q| contract.expected_payoff(q, theta, cost, precision), 0.0, q_max, 1e-13 * q_max)
}

/// Central-difference slope of the analytic payoff at `q`.
pub fn payoff_slope(contract: &Contract, q: f64, theta: f64, cost: &CostModel, precision: f64) -> f64 {
    let h = crate::cost::fd_step(q);
    let lo = (q - h).max(0.0);
    let f = |v: f64| contract.expected_payoff(v, theta, cost, precision);
    (f(q + h) - f(lo)) / (q + h - lo)
}

/// How the deviating agent picks effort after receiving his contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffortPolicy {
    /// Exert the requested effort.
    Requested,
    /// Exert the payoff-maximizing effort for his true type.
    Optimal,
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: u64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let mut w = Welford::default();
        xs.iter().for_each(|&x| w.push(x));
        Self { mean: w.mean(), se: w.se(), n: w.count() }
    }

    /// True when `value` lies within `k` standard errors.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.se + 1e-12 * value.abs().max(1.0)
    }
}

/// Draws shared by every candidate report: competitors' types, x and the
/// agent's own noise, one set per Monte-Carlo sample.
struct Draws {
    others: Vec<Vec<f64>>,
    x: Vec<f64>,
    z: Vec<f64>,
}

fn draw_samples(scenario: &Scenario, n_mc: usize, seed: u64) -> Result<Draws> {
    let mut others = Vec::with_capacity(n_mc);
    let mut x = Vec::with_capacity(n_mc);
    let mut z = Vec::with_capacity(n_mc);
    let base = mix64(seed ^ 0xA5A5_5A5A);
    for s in 0..n_mc as u64 {
        let ts = trial_seed(base, s);
        let (xs, types) = draw_world(scenario, ts)?;
        // Agent 0 is the deviator; only the competitors' types are used.
        others.push(types[1..].to_vec());
        x.push(xs);
        z.push(noise_draw(ts, 0));
    }
    Ok(Draws { others, x, z })
}

/// Per-sample payoffs `[candidate][sample]` for agent 0 with true type `theta`.
fn payoff_matrix(
    theta: f64,
    candidates: &[f64],
    policy: EffortPolicy,
    mech: &dyn Mechanism,
    draws: &Draws,
) -> Result<Vec<Vec<f64>>> {
    let prior = *mech.prior();
    let a = prior.precision();
    let cost = mech.cost();
    let mut out = vec![Vec::with_capacity(draws.x.len()); candidates.len()];
    for s in 0..draws.x.len() {
        let contracts = mech.contract_sweep(candidates, &draws.others[s])?;
        for (j, c) in contracts.iter().enumerate() {
            let q = match policy {
                EffortPolicy::Requested => c.effort,
                EffortPolicy::Optimal => optimal_effort(c, theta, cost, a)?,
            };
            let u = if c.is_zero() && q == 0.0 {
                0.0
            } else {
                let obs = observe_with(draws.x[s], q, draws.z[s])?;
                let y_hat = truthful_report_obs(obs.value, q, &prior);
                c.payment(draws.x[s], y_hat) - cost.total(q, theta)
            };
            out[j].push(u);
        }
    }
    Ok(out)
}

/// Interim expected payoff of an agent of type `theta` reporting `theta_hat`,
/// competitors truthful, averaged over their types, x and his own noise.
pub fn interim_payoff(
    theta: f64,
    theta_hat: f64,
    policy: EffortPolicy,
    mech: &dyn Mechanism,
    scenario: &Scenario,
    n_mc: usize,
    seed: u64,
) -> Result<Estimate> {
    let draws = draw_samples(scenario, n_mc, seed)?;
    let m = payoff_matrix(theta, &[theta_hat], policy, mech, &draws)?;
    Ok(Estimate::from_samples(&m[0]))
}

/// Information rent ∫_θ^θ̄ E[∂C/∂η(Q(η, θ₋ₙ), η)] dη, averaged over
/// independent competitor draws; the envelope value of truthful play.
pub fn information_rent(theta: f64, mech: &dyn Mechanism, scenario: &Scenario, n_mc: usize, seed: u64) -> Result<Estimate> {
    let draws = draw_samples(scenario, n_mc, seed)?;
    let cost = mech.cost();
    let hi = scenario.types.theta_hi;
    let mut vals = Vec::with_capacity(n_mc);
    for others in &draws.others {
        let f = |z: f64| {
            let mut v = Vec::with_capacity(others.len() + 1);
            v.push(z);
            v.extend_from_slice(others);
            mech.efforts(&v).map(|q| cost.d_total_d_theta(q[0], z)).unwrap_or(f64::NAN)
        };
        vals.push(quadrature::integrate_with_breaks(f, theta, hi, others, 1e-9)?.value);
    }
    Ok(Estimate::from_samples(&vals))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub grid: usize,
    pub n_mc: usize,
    /// Re-search one decade finer around the coarse argmax.
    pub refine: bool,
    /// Width of the statistical band, in standard errors.
    pub band: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { grid: 101, n_mc: 10_000, refine: true, band: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub theta: f64,
    /// Report with the highest sample-mean payoff.
    pub argmax: f64,
    /// Reports whose payoff is within `band` paired standard errors of the best.
    pub argmax_set: Vec<f64>,
    pub grid_step: f64,
    pub truthful: Estimate,
    pub best: Estimate,
    /// Gain of the best report over the truthful one, with paired SE.
    pub gain: Estimate,
}

impl BestResponse {
    /// Truthful reporting is a best response up to one grid step or the MC band.
    pub fn consistent_with_truth(&self) -> bool {
        (self.argmax - self.theta).abs() <= self.grid_step + 1e-12 || self.argmax_set.contains(&self.theta)
    }
}

fn paired(a: &[f64], b: &[f64]) -> Estimate {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Estimate::from_samples(&d)
}

/// Grid search for the payoff-maximizing type report. Every candidate is
/// scored on the same draws (common random numbers); the agent plays his
/// optimal effort and truthful observation report after each candidate.
pub fn best_response_type(
    theta: f64,
    mech: &dyn Mechanism,
    scenario: &Scenario,
    cfg: &OracleConfig,
    seed: u64,
) -> Result<BestResponse> {
    let types = &scenario.types;
    let (lo, hi) = (types.theta_lo + TYPE_FLOOR, types.theta_hi);
    let g = cfg.grid.max(2);
    let step = (hi - lo) / (g - 1) as f64;
    let mut cands: Vec<f64> = (0..g).map(|i| lo + step * i as f64).collect();
    cands.push(theta);
    let draws = draw_samples(scenario, cfg.n_mc, seed)?;
    let mut payoffs = payoff_matrix(theta, &cands, EffortPolicy::Optimal, mech, &draws)?;

    if cfg.refine {
        let means: Vec<f64> = payoffs.iter().map(|p| Estimate::from_samples(p).mean).collect();
        let best = cands[argmax(&means)];
        let fine: Vec<f64> = (-10..=10)
            .map(|k| best + step * k as f64 / 10.0)
            .filter(|&t| t >= lo && t <= hi && !cands.contains(&t))
            .collect();
        let extra = payoff_matrix(theta, &fine, EffortPolicy::Optimal, mech, &draws)?;
        cands.extend(fine);
        payoffs.extend(extra);
    }

    let means: Vec<f64> = payoffs.iter().map(|p| Estimate::from_samples(p).mean).collect();
    let b = argmax(&means);
    let truth_idx = g; // θ itself was appended right after the coarse grid
    let argmax_set = cands
        .iter()
        .zip(&payoffs)
        .filter(|(_, p)| {
            let d = paired(&payoffs[b], p);
            d.mean <= cfg.band * d.se + 1e-12 * means[b].abs().max(1.0)
        })
        .map(|(&c, _)| c)
        .collect();
    Ok(BestResponse {
        theta,
        argmax: cands[b],
        argmax_set,
        grid_step: step,
        truthful: Estimate::from_samples(&payoffs[truth_idx]),
        best: Estimate::from_samples(&payoffs[b]),
        gain: paired(&payoffs[b], &payoffs[truth_idx]),
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut b = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[b] {
            b = i;
        }
    }
    b
}
