//! Property suites backing `cope verify`: randomized instances, each check
//! reported with its measured deviation, tolerance and instance seed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{best_response_effort, best_response_type, information_rent, interim_payoff, EffortPolicy, OracleConfig};
use crate::cost::CostModel;
use crate::cubic::{residual, solve_cubic};
use crate::error::{Error, Result};
use crate::mechanism::{GeneralConfig, GeneralCope, LinearCope, Mechanism, QuadraticCope};
use crate::model::{CostTypeDistribution, GaussianPrior, Scenario};
use crate::rng::{stream, trial_seed, Purpose};
use crate::roots::newton_bracketed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Bic,
    Bir,
    Monotonicity,
    Cubic,
    ClosedForms,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Bic, Suite::Bir, Suite::Monotonicity, Suite::Cubic, Suite::ClosedForms];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Bic => "bic",
            Suite::Bir => "bir",
            Suite::Monotonicity => "monotonicity",
            Suite::Cubic => "cubic",
            Suite::ClosedForms => "closed-forms",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Cost families for the agent-side suites.
    pub costs: Vec<CostModel>,
    /// Random instances per cost family (cubic: per 500 residual checks).
    pub instances: usize,
    pub seed: u64,
    pub oracle: OracleConfig,
    /// Monte-Carlo samples for BIR payoff and rent estimates.
    pub n_mc: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            costs: vec![CostModel::Linear, CostModel::Quadratic],
            instances: 20,
            seed: 2024,
            oracle: OracleConfig::default(),
            n_mc: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub instance: String,
    pub seed: u64,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    fn push(&mut self, suite: Suite, name: &str, instance: String, seed: u64, measured: f64, tolerance: f64) {
        self.push_with(suite, name, instance, seed, measured, tolerance, measured <= tolerance);
    }

    #[allow(clippy::too_many_arguments)]
    fn push_with(&mut self, suite: Suite, name: &str, instance: String, seed: u64, measured: f64, tolerance: f64, pass: bool) {
        self.checks.push(Check { suite: suite.name(), name: name.into(), instance, seed, measured, tolerance, pass });
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut r = VerifyReport::default();
    match suite {
        Suite::Bic => bic(opts, &mut r)?,
        Suite::Bir => bir(opts, &mut r)?,
        Suite::Monotonicity => monotonicity(opts, &mut r)?,
        Suite::Cubic => cubic(opts, &mut r)?,
        Suite::ClosedForms => closed_forms(opts, &mut r)?,
    }
    Ok(r)
}

fn unit_types() -> CostTypeDistribution {
    CostTypeDistribution::uniform(0.0, 1.0).expect("valid support")
}

fn cope(cost: &CostModel, prior: GaussianPrior) -> Box<dyn Mechanism> {
    match cost {
        CostModel::Linear => Box::new(LinearCope::new(prior, unit_types())),
        CostModel::Quadratic => Box::new(QuadraticCope::new(prior, unit_types())),
        CostModel::General(_) => Box::new(GeneralCope::new(prior, unit_types(), cost.clone(), GeneralConfig::default())),
    }
}

/// A random agent-side instance: N, σ₀², own type and competitors' types.
struct Instance {
    seed: u64,
    scenario: Scenario,
    theta: f64,
    others: Vec<f64>,
}

impl Instance {
    fn draw(cost: &CostModel, master: u64, i: usize, theta: Option<f64>) -> Result<Self> {
        let seed = trial_seed(master, i as u64);
        let mut rng = stream(seed, 0, Purpose::Oracle);
        let n = rng.gen_range(2..=5);
        let var0 = rng.gen_range(1.0..4.0);
        let theta = theta.unwrap_or_else(|| rng.gen_range(0.02..1.0));
        let others = (1..n).map(|_| rng.gen_range(0.02..1.0)).collect();
        let scenario = Scenario::new(GaussianPrior::new(0.0, var0)?, unit_types(), n, cost.clone())?;
        Ok(Self { seed, scenario, theta, others })
    }

    fn label(&self) -> String {
        format!("{} N={} var0={:.3} theta={:.4}", self.scenario.cost.name(), self.scenario.n_agents, self.scenario.prior.var0, self.theta)
    }

    fn reports(&self) -> Vec<f64> {
        std::iter::once(self.theta).chain(self.others.iter().copied()).collect()
    }
}

fn bic(opts: &VerifyOptions, r: &mut VerifyReport) -> Result<()> {
    for cost in &opts.costs {
        for i in 0..opts.instances {
            let inst = Instance::draw(cost, opts.seed, i, None)?;
            let mech = cope(cost, inst.scenario.prior);
            let br = best_response_type(inst.theta, mech.as_ref(), &inst.scenario, &opts.oracle, inst.seed)?;
            // Zero when truth is statistically tied with the best report.
            let miss = if br.argmax_set.contains(&br.theta) { 0.0 } else { (br.argmax - br.theta).abs() };
            r.push_with(Suite::Bic, "type report", inst.label(), inst.seed, miss, br.grid_step, br.consistent_with_truth());
            // Effort against the truthful contract at a fixed competitor profile.
            let c = mech.contract(&inst.reports(), 0)?;
            let q = best_response_effort(&c, inst.theta, cost, inst.scenario.prior.precision());
            // Relative error, floored so that Q = 0 is judged on an absolute scale.
            r.push(Suite::Bic, "effort", inst.label(), inst.seed, (q - c.effort).abs() / c.effort.max(1e-6), 1e-4);
        }
    }
    Ok(())
}

fn bir(opts: &VerifyOptions, r: &mut VerifyReport) -> Result<()> {
    for cost in &opts.costs {
        for i in 0..opts.instances {
            // The last instance of each family sits at the top type.
            let top = (i + 1 == opts.instances).then_some(1.0);
            let inst = Instance::draw(cost, opts.seed, i, top)?;
            let mech = cope(cost, inst.scenario.prior);
            let u = interim_payoff(inst.theta, inst.theta, EffortPolicy::Requested, mech.as_ref(), &inst.scenario, opts.n_mc, inst.seed)?;
            let slack = 1e-12 * u.mean.abs().max(1.0);
            r.push(Suite::Bir, "nonnegative", inst.label(), inst.seed, -u.mean, 3.0 * u.se + slack);
            let rent = information_rent(inst.theta, mech.as_ref(), &inst.scenario, opts.n_mc, inst.seed)?;
            let se = u.se.hypot(rent.se);
            r.push(Suite::Bir, "information rent", inst.label(), inst.seed, (u.mean - rent.mean).abs(), 3.0 * se + slack);
            if top.is_some() {
                r.push(Suite::Bir, "zero at top", inst.label(), inst.seed, u.mean.abs(), 3.0 * u.se + slack);
            }
        }
    }
    Ok(())
}

/// Sample cost outside the closed-form families: c = θ(1 + q), convex in q.
pub fn affine_marginal_cost() -> CostModel {
    CostModel::General(
        crate::cost::GeneralCost::new("affine", |q, t| t * (1.0 + q)).with_total(|q, t| t * (q + 0.5 * q * q)),
    )
}

fn monotonicity(opts: &VerifyOptions, r: &mut VerifyReport) -> Result<()> {
    const POINTS: usize = 200;
    let mut costs = opts.costs.clone();
    if !costs.iter().any(|c| matches!(c, CostModel::General(_))) {
        costs.push(affine_marginal_cost());
    }
    for cost in &costs {
        // The general solver is costly; a few profiles suffice there.
        let count = if matches!(cost, CostModel::General(_)) { opts.instances.min(3) } else { opts.instances };
        for i in 0..count {
            let inst = Instance::draw(cost, opts.seed, i, None)?;
            let mech = cope(cost, inst.scenario.prior);
            let mut worst = 0.0f64;
            let mut prev = f64::INFINITY;
            let mut v = inst.reports();
            for k in 0..POINTS {
                v[0] = (k as f64 + 0.5) / POINTS as f64;
                let q = mech.efforts(&v)?[0];
                worst = worst.max(q - prev);
                prev = q;
            }
            r.push(Suite::Monotonicity, "own effort nonincreasing", inst.label(), inst.seed, worst, 1e-7);
        }
    }
    Ok(())
}

fn cubic(opts: &VerifyOptions, r: &mut VerifyReport) -> Result<()> {
    let total = opts.instances.max(1) * 500;
    let seed = opts.seed;
    let mut rng = stream(seed, 0, Purpose::Oracle);
    let mut worst_res = 0.0f64;
    let mut worst_cross = 0.0f64;
    let mut at = String::new();
    for k in 0..total {
        // Log-uniform scales, with the flat-prior edge a = 0 mixed in.
        let a = if k % 50 == 0 { 0.0 } else { 10f64.powf(rng.gen_range(-4.0..4.0)) };
        let s = 10f64.powf(rng.gen_range(-6.0..6.0));
        let w = solve_cubic(a, s)?.w;
        let res = residual(w, a, s);
        // Independent root: W ≥ a and W³ ≥ s bracket the root from below,
        // and W = a + ∛s + 1 from above.
        let f = |x: f64| x * x * x - a * x * x - s;
        let df = |x: f64| 3.0 * x * x - 2.0 * a * x;
        let lo = a.max(0.0);
        let hi = a + s.cbrt() + 1.0;
        let w2 = newton_bracketed(f, df, lo, hi, 1e-15 * hi, 500)?;
        let cross = (w - w2).abs() / w2.max(1e-300);
        if res > worst_res {
            worst_res = res;
            at = format!("a={a:e} s={s:e}");
        }
        worst_cross = worst_cross.max(cross);
    }
    r.push(Suite::Cubic, "max relative residual", format!("{total} instances, worst at {at}"), seed, worst_res, 1e-10);
    r.push(Suite::Cubic, "agrees with bracketed Newton", format!("{total} instances"), seed, worst_cross, 1e-10);
    Ok(())
}

fn closed_forms(opts: &VerifyOptions, r: &mut VerifyReport) -> Result<()> {
    const VECTORS: usize = 50;
    for cost in [CostModel::Linear, CostModel::Quadratic] {
        for i in 0..VECTORS {
            let seed = trial_seed(opts.seed ^ 0xC105ED, i as u64);
            let mut rng = stream(seed, 0, Purpose::Oracle);
            let n = rng.gen_range(1..=6);
            let prior = GaussianPrior::new(0.0, rng.gen_range(0.5..8.0))?;
            let reported: Vec<f64> = (0..n).map(|_| rng.gen_range(0.02..1.0)).collect();
            let special = cope(&cost, prior);
            let general = GeneralCope::new(prior, unit_types(), cost.clone(), GeneralConfig::default());
            let label = format!("{} N={n} var0={:.3}", cost.name(), prior.var0);
            let qs = special.efforts(&reported)?;
            let qg = general.efforts(&reported)?;
            let dq = qs.iter().zip(&qg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            r.push(Suite::ClosedForms, "effort", label.clone(), seed, dq, 1e-6);
            let cs = special.contracts(&reported)?;
            let cg = general.contracts(&reported)?;
            let dks = cs
                .iter()
                .zip(&cg)
                .map(|(a, b)| (a.k - b.k).abs().max((a.s - b.s).abs()) / a.k.abs().max(1.0))
                .fold(0.0, f64::max);
            r.push(Suite::ClosedForms, "K and S", label, seed, dks, 1e-8);
        }
    }
    Ok(())
}
