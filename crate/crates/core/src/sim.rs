//! Seeded Monte-Carlo engine.
//!
//! Each trial draws the world from `trial_seed(master, t)` only, so the same
//! trial index sees the same truth, types and observation noise under every
//! mechanism (common random numbers). Trials are processed in fixed-size
//! blocks whose accumulators are merged in block order, which makes results
//! identical for any thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{best_response_type, optimal_effort, truthful_report_obs, OracleConfig};
use crate::benchmarks::{
    centralized_efforts, expected_network_profit, homogeneous_agent_response, homogeneous_contract,
    homogeneous_engages, homogeneous_predict, AlphaRule, Denominator, HomogeneousContract,
};
use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::mechanism::{GeneralConfig, GeneralCope, LinearCope, Mechanism, QuadraticCope, TieBreak};
use crate::model::{draw_world, noise_draw, observe_with, posterior_mean_var, Scenario};
use crate::rng::{mix64, trial_seed};
use crate::stats::Welford;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MechanismKind {
    CopeLinear,
    CopeQuadratic,
    CopeGeneral,
    Centralized,
    Homogeneous { theta_dagger: f64 },
}

impl MechanismKind {
    /// The COPE variant with closed forms for this cost, else the general one.
    pub fn cope_for(cost: &CostModel) -> Self {
        match cost {
            CostModel::Linear => MechanismKind::CopeLinear,
            CostModel::Quadratic => MechanismKind::CopeQuadratic,
            CostModel::General(_) => MechanismKind::CopeGeneral,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            MechanismKind::CopeLinear | MechanismKind::CopeQuadratic | MechanismKind::CopeGeneral => "cope",
            MechanismKind::Centralized => "centralized",
            MechanismKind::Homogeneous { .. } => "homogeneous",
        }
    }

    pub fn theta_dagger(&self) -> Option<f64> {
        match self {
            MechanismKind::Homogeneous { theta_dagger } => Some(*theta_dagger),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AgentMode {
    /// Report the true type, exert the requested effort, report the posterior mean.
    Truthful,
    /// Choose the type report with the best-response oracle, then the optimal effort.
    BestResponse(OracleConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimOptions {
    pub tie: TieBreak,
    pub general: GeneralConfig,
    pub alpha: AlphaRule,
    pub denominator: Denominator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub x: f64,
    pub types: Vec<f64>,
    pub reported_types: Vec<f64>,
    pub efforts: Vec<f64>,
    pub observations: Vec<Option<f64>>,
    pub reports: Vec<f64>,
    pub prediction: f64,
    pub payments: Vec<f64>,
    pub agent_payoffs: Vec<f64>,
    pub principal_payoff: f64,
    pub network_profit: f64,
    pub prediction_sq_error: f64,
    /// 1/(a + Σq): expected squared error of the Bayes predictor at these efforts.
    pub bayes_risk: f64,
    /// −1/(a+Σq) − ΣC(q,θ): network profit in expectation over x and noise.
    pub expected_network_profit: f64,
}

/// Per-trial scalar metrics, in [`METRICS`] order.
pub type TrialMetrics = [f64; 7];

pub const METRICS: [&str; 7] = [
    "principal_payoff",
    "network_profit",
    "prediction_sq_error",
    "bayes_risk",
    "total_payment",
    "total_cost",
    "active_agents",
];

/// Scales payoffs so that predicting μ₀ and paying nothing scores −1 on average.
pub fn normalize_payoff(raw: f64, var0: f64) -> f64 {
    raw / var0
}

impl TrialRecord {
    pub fn metrics(&self, var0: f64) -> TrialMetrics {
        let cost = self.agent_payoffs.iter().zip(&self.payments).map(|(u, p)| p - u).sum::<f64>();
        [
            normalize_payoff(self.principal_payoff, var0),
            normalize_payoff(self.network_profit, var0),
            self.prediction_sq_error,
            self.bayes_risk,
            self.payments.iter().sum(),
            cost,
            self.efforts.iter().filter(|&&q| q > 0.0).count() as f64,
        ]
    }
}

enum Built {
    Cope(Box<dyn Mechanism>),
    Centralized,
    Homogeneous(HomogeneousContract),
}

/// A mechanism bound to a scenario, ready to run trials.
pub struct Runner {
    scenario: Scenario,
    kind: MechanismKind,
    opts: SimOptions,
    built: Built,
    fixed_types: Option<Vec<f64>>,
}

impl Runner {
    pub fn new(scenario: &Scenario, kind: MechanismKind, opts: SimOptions) -> Result<Self> {
        let prior = scenario.prior;
        let types = scenario.types.clone();
        let mismatch = |want: &str| {
            Err(Error::domain(format!("{kind:?} needs {want} cost, scenario has {}", scenario.cost.name())))
        };
        let built = match kind {
            MechanismKind::CopeLinear => match scenario.cost {
                CostModel::Linear => Built::Cope(Box::new(LinearCope::with_tie_break(prior, types, opts.tie))),
                _ => return mismatch("linear"),
            },
            MechanismKind::CopeQuadratic => match scenario.cost {
                CostModel::Quadratic => Built::Cope(Box::new(QuadraticCope::new(prior, types))),
                _ => return mismatch("quadratic"),
            },
            MechanismKind::CopeGeneral => {
                Built::Cope(Box::new(GeneralCope::new(prior, types, scenario.cost.clone(), opts.general)))
            }
            MechanismKind::Centralized => Built::Centralized,
            MechanismKind::Homogeneous { theta_dagger } => Built::Homogeneous(homogeneous_contract(
                theta_dagger,
                scenario.n_agents,
                &scenario.cost,
                &prior,
                opts.alpha,
            )?),
        };
        Ok(Self { scenario: scenario.clone(), kind, opts, built, fixed_types: None })
    }

    /// Hold the type vector fixed across trials instead of redrawing it.
    pub fn with_fixed_types(mut self, types: Vec<f64>) -> Result<Self> {
        if types.len() != self.scenario.n_agents {
            return Err(Error::domain("fixed type vector length differs from N"));
        }
        types.iter().try_for_each(|&t| self.scenario.types.ensure_contains(t))?;
        self.fixed_types = Some(types);
        Ok(self)
    }

    pub fn kind(&self) -> MechanismKind {
        self.kind
    }

    pub fn run_trial(&self, mode: AgentMode, seed: u64) -> Result<TrialRecord> {
        let (x, drawn) = draw_world(&self.scenario, seed)?;
        let types = self.fixed_types.clone().unwrap_or(drawn);
        match &self.built {
            Built::Cope(m) => self.cope_trial(m.as_ref(), mode, seed, x, types),
            Built::Centralized => self.centralized_trial(seed, x, types),
            Built::Homogeneous(c) => self.homogeneous_trial(c, seed, x, types),
        }
    }

    fn cope_trial(&self, m: &dyn Mechanism, mode: AgentMode, seed: u64, x: f64, types: Vec<f64>) -> Result<TrialRecord> {
        let prior = self.scenario.prior;
        let a = prior.precision();
        let cost = &self.scenario.cost;
        let reported = match mode {
            AgentMode::Truthful => types.clone(),
            AgentMode::BestResponse(cfg) => types
                .iter()
                .enumerate()
                .map(|(n, &t)| {
                    best_response_type(t, m, &self.scenario, &cfg, mix64(seed ^ n as u64)).map(|b| b.argmax)
                })
                .collect::<Result<_>>()?,
        };
        let contracts = m.contracts(&reported)?;
        let requested: Vec<f64> = contracts.iter().map(|c| c.effort).collect();
        let efforts: Vec<f64> = match mode {
            AgentMode::Truthful => requested.clone(),
            AgentMode::BestResponse(_) => contracts
                .iter()
                .zip(&types)
                .map(|(c, &t)| optimal_effort(c, t, cost, a))
                .collect::<Result<_>>()?,
        };
        let (observations, reports) = self.observe(seed, x, &efforts)?;
        let prediction = m.predict(&reports, &requested);
        let payments: Vec<f64> = contracts.iter().zip(&reports).map(|(c, &y)| if c.is_zero() { 0.0 } else { c.payment(x, y) }).collect();
        Ok(self.settle(x, types, reported, efforts, observations, reports, prediction, payments))
    }

    fn centralized_trial(&self, seed: u64, x: f64, types: Vec<f64>) -> Result<TrialRecord> {
        let prior = self.scenario.prior;
        let efforts = centralized_efforts(&types, &self.scenario.cost, &prior, &self.scenario.types)?.efforts;
        let (observations, reports) = self.observe(seed, x, &efforts)?;
        let raw: Vec<(f64, f64)> =
            observations.iter().zip(&efforts).filter_map(|(y, &q)| y.map(|y| (y, q))).collect();
        let prediction = posterior_mean_var(&prior, &raw).0;
        let payments = vec![0.0; types.len()];
        Ok(self.settle(x, types.clone(), types, efforts, observations, reports, prediction, payments))
    }

    fn homogeneous_trial(&self, c: &HomogeneousContract, seed: u64, x: f64, types: Vec<f64>) -> Result<TrialRecord> {
        let prior = self.scenario.prior;
        let cost = &self.scenario.cost;
        let n = types.len();
        let responses: Vec<(f64, bool)> =
            types.iter().map(|&t| homogeneous_agent_response(t, c, cost, &prior)).collect::<Result<_>>()?;
        let k = responses.iter().filter(|r| r.1).count();
        let engaged = homogeneous_engages(c, k, &prior);
        let efforts: Vec<f64> = responses.iter().map(|&(q, p)| if engaged && p { q } else { 0.0 }).collect();
        let (observations, reports) = self.observe(seed, x, &efforts)?;
        let participants: Vec<f64> =
            reports.iter().zip(&responses).filter(|(_, r)| engaged && r.1).map(|(&y, _)| y).collect();
        let denominator = match self.opts.denominator {
            Denominator::Participants => participants.len(),
            Denominator::Full => n,
        };
        let prediction = if engaged { homogeneous_predict(c, &participants, &prior, denominator) } else { prior.mu0 };
        let payments: Vec<f64> = reports
            .iter()
            .zip(&responses)
            .map(|(&y, r)| if engaged && r.1 { c.alpha - c.beta * (x - y).powi(2) } else { 0.0 })
            .collect();
        // Types are not elicited; record θ† as the principal's working belief.
        let believed = vec![c.theta_dagger; n];
        Ok(self.settle(x, types, believed, efforts, observations, reports, prediction, payments))
    }

    fn observe(&self, seed: u64, x: f64, efforts: &[f64]) -> Result<(Vec<Option<f64>>, Vec<f64>)> {
        let prior = self.scenario.prior;
        let mut obs = Vec::with_capacity(efforts.len());
        let mut rep = Vec::with_capacity(efforts.len());
        for (n, &q) in efforts.iter().enumerate() {
            let o = observe_with(x, q, noise_draw(seed, n))?;
            rep.push(truthful_report_obs(o.value, q, &prior));
            obs.push(o.value);
        }
        Ok((obs, rep))
    }

    #[allow(clippy::too_many_arguments)]
    fn settle(
        &self,
        x: f64,
        types: Vec<f64>,
        reported_types: Vec<f64>,
        efforts: Vec<f64>,
        observations: Vec<Option<f64>>,
        reports: Vec<f64>,
        prediction: f64,
        payments: Vec<f64>,
    ) -> TrialRecord {
        let prior = self.scenario.prior;
        let cost = &self.scenario.cost;
        let costs: Vec<f64> = efforts.iter().zip(&types).map(|(&q, &t)| cost.total(q, t)).collect();
        let sq = (x - prediction).powi(2);
        let agent_payoffs = payments.iter().zip(&costs).map(|(p, c)| p - c).collect();
        TrialRecord {
            principal_payoff: -sq - payments.iter().sum::<f64>(),
            network_profit: -sq - costs.iter().sum::<f64>(),
            prediction_sq_error: sq,
            bayes_risk: 1.0 / (prior.precision() + efforts.iter().sum::<f64>()),
            expected_network_profit: expected_network_profit(&efforts, &types, cost, &prior),
            x,
            types,
            reported_types,
            efforts,
            observations,
            reports,
            prediction,
            payments,
            agent_payoffs,
        }
    }
}

/// One trial of `kind` in `scenario`; `seed` is the trial seed.
pub fn run_trial(
    scenario: &Scenario,
    kind: MechanismKind,
    mode: AgentMode,
    opts: SimOptions,
    seed: u64,
) -> Result<TrialRecord> {
    Runner::new(scenario, kind, opts)?.run_trial(mode, seed)
}

/// Trials per block; blocks are the unit of parallel work and of merging.
const BLOCK: usize = 512;

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Per-trial metrics for trials `0..n_trials`, in trial order.
pub fn cell_samples(runner: &Runner, mode: AgentMode, n_trials: usize, master: u64, threads: usize) -> Result<Vec<TrialMetrics>> {
    let var0 = runner.scenario.prior.var0;
    let blocks = n_trials.div_ceil(BLOCK);
    let parts: Vec<Vec<TrialMetrics>> = with_pool(threads, || {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                (b * BLOCK..((b + 1) * BLOCK).min(n_trials))
                    .map(|t| {
                        runner
                            .run_trial(mode, trial_seed(master, t as u64))
                            .map(|r| r.metrics(var0))
                            .map_err(|e| Error::Trial { trial: t as u64, source: Box::new(e) })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(parts.into_iter().flatten().collect())
}

fn cell_stats(runner: &Runner, mode: AgentMode, n_trials: usize, master: u64, threads: usize) -> Result<[Welford; 7]> {
    let var0 = runner.scenario.prior.var0;
    let blocks = n_trials.div_ceil(BLOCK);
    let parts: Vec<[Welford; 7]> = with_pool(threads, || {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut acc = [Welford::default(); 7];
                for t in b * BLOCK..((b + 1) * BLOCK).min(n_trials) {
                    let r = runner
                        .run_trial(mode, trial_seed(master, t as u64))
                        .map_err(|e| Error::Trial { trial: t as u64, source: Box::new(e) })?;
                    for (w, v) in acc.iter_mut().zip(r.metrics(var0)) {
                        w.push(v);
                    }
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut total = [Welford::default(); 7];
    for p in &parts {
        for (t, w) in total.iter_mut().zip(p) {
            t.merge(w);
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub mechanism: String,
    pub cost: String,
    pub n_agents: usize,
    pub theta_dagger: Option<f64>,
    pub n_trials: usize,
    pub metrics: Vec<MetricSummary>,
}

impl ExperimentResult {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

/// What to sweep. Every (cost, N, mechanism) combination is one cell.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub base: Scenario,
    pub costs: Vec<CostModel>,
    pub n_values: Vec<usize>,
    pub mechanisms: Vec<MechanismKind>,
    pub n_trials: usize,
    pub master_seed: u64,
    pub threads: usize,
    pub options: SimOptions,
    pub fixed_types: Option<Vec<f64>>,
}

/// Runs every cell of the plan. `progress` is called after each cell.
pub fn run_experiment(plan: &ExperimentPlan, mut progress: impl FnMut(&ExperimentResult)) -> Result<Vec<ExperimentResult>> {
    if plan.n_trials == 0 {
        return Err(Error::domain("n_trials must be >= 1"));
    }
    let mut out = Vec::new();
    for cost in &plan.costs {
        for &n in &plan.n_values {
            let scenario = Scenario::new(plan.base.prior, plan.base.types.clone(), n, cost.clone())?;
            for &kind in &plan.mechanisms {
                // A generic COPE entry resolves to the closed-form variant for this cost.
                let kind = match kind {
                    MechanismKind::CopeLinear | MechanismKind::CopeQuadratic | MechanismKind::CopeGeneral
                        if !matches!(cost, CostModel::General(_)) =>
                    {
                        MechanismKind::cope_for(cost)
                    }
                    k => k,
                };
                let mut runner = Runner::new(&scenario, kind, plan.options)?;
                if let Some(t) = &plan.fixed_types {
                    runner = runner.with_fixed_types(t.clone())?;
                }
                let stats = cell_stats(&runner, AgentMode::Truthful, plan.n_trials, plan.master_seed, plan.threads)?;
                let res = ExperimentResult {
                    mechanism: kind.label().to_string(),
                    cost: cost.name().to_string(),
                    n_agents: n,
                    theta_dagger: kind.theta_dagger(),
                    n_trials: plan.n_trials,
                    metrics: METRICS
                        .iter()
                        .zip(stats)
                        .map(|(name, w)| MetricSummary { name: name.to_string(), mean: w.mean(), se: w.se() })
                        .collect(),
                };
                progress(&res);
                out.push(res);
            }
        }
    }
    Ok(out)
}
