//! Comparison systems: the integrated planner who knows every type, and the
//! homogeneous mechanism that treats every agent as having type θ†.

use serde::{Deserialize, Serialize};

use crate::agent::optimal_effort;
use crate::cost::CostModel;
use crate::cubic::{inverse_sum, solve_cubic};
use crate::error::{Error, Result};
use crate::mechanism::{Contract, GeneralConfig, GeneralCope, Mechanism};
use crate::model::{CostTypeDistribution, GaussianPrior};
use crate::roots;

#[derive(Debug, Clone, PartialEq)]
pub struct CentralizedSolution {
    pub efforts: Vec<f64>,
    /// Root of the planner's cubic (quadratic cost only).
    pub w_o: Option<f64>,
}

/// Efforts maximizing −1/(a+Σq) − ΣC(qₙ,θₙ) with the true types.
pub fn centralized_efforts(
    theta: &[f64],
    cost: &CostModel,
    prior: &GaussianPrior,
    types: &CostTypeDistribution,
) -> Result<CentralizedSolution> {
    if theta.is_empty() {
        return Err(Error::domain("empty type vector"));
    }
    if let Some(&bad) = theta.iter().find(|&&t| !(t > 0.0)) {
        return Err(Error::domain(format!("centralized program needs positive types, got {bad}")));
    }
    let a = prior.precision();
    match cost {
        CostModel::Linear => {
            let mut q = vec![0.0; theta.len()];
            let w = (0..theta.len()).fold(0, |b, i| if theta[i] < theta[b] { i } else { b });
            q[w] = (1.0 / theta[w].sqrt() - a).max(0.0);
            Ok(CentralizedSolution { efforts: q, w_o: None })
        }
        CostModel::Quadratic => {
            let w = solve_cubic(a, inverse_sum(theta, |t| t)?)?.w;
            Ok(CentralizedSolution { efforts: theta.iter().map(|&t| 1.0 / (t * w * w)).collect(), w_o: Some(w) })
        }
        CostModel::General(_) => {
            let planner = GeneralCope::planner(*prior, types.clone(), cost.clone(), GeneralConfig::default());
            Ok(CentralizedSolution { efforts: planner.solve(theta)?.x, w_o: None })
        }
    }
}

/// Expected network profit −1/(a+Σq) − ΣC(qₙ,θₙ) given the types.
pub fn expected_network_profit(q: &[f64], theta: &[f64], cost: &CostModel, prior: &GaussianPrior) -> f64 {
    let risk = 1.0 / (prior.precision() + q.iter().sum::<f64>());
    -risk - q.iter().zip(theta).map(|(&qn, &t)| cost.total(qn, t)).sum::<f64>()
}

/// How α is set for the linear homogeneous contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaRule {
    /// α = β/(a+q†) + C(q†,θ†): a type-θ† agent exactly breaks even.
    #[default]
    BreakEven,
    /// α = (a+q†)θ†q† + θ†q† for linear cost, as printed.
    AsPrinted,
}

/// Denominator of the homogeneous predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Denominator {
    #[default]
    Participants,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousContract {
    pub theta_dagger: f64,
    pub q_dagger: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl HomogeneousContract {
    /// A contract with q† = 0 asks for nothing; the principal stays out.
    pub fn is_active(&self) -> bool {
        self.q_dagger > 0.0
    }

    pub fn as_contract(&self) -> Contract {
        Contract { effort: self.q_dagger, pi: self.alpha, k: self.beta, s: 0.0 }
    }
}

/// Contract for believed type θ† and N agents. The principal's effort target
/// solves 1/(a + Nq)² = c(q, θ†); β makes it the agent's best response.
pub fn homogeneous_contract(
    theta_dagger: f64,
    n: usize,
    cost: &CostModel,
    prior: &GaussianPrior,
    rule: AlphaRule,
) -> Result<HomogeneousContract> {
    if !(theta_dagger > 0.0) {
        return Err(Error::domain(format!("theta_dagger must be positive, got {theta_dagger}")));
    }
    if n == 0 {
        return Err(Error::domain("need at least one agent"));
    }
    let a = prior.precision();
    let nf = n as f64;
    let q = match cost {
        CostModel::Linear => ((1.0 / theta_dagger.sqrt() - a) / nf).max(0.0),
        _ => {
            let g = |q: f64| 1.0 / (a + nf * q).powi(2) - cost.marginal(q, theta_dagger);
            if g(0.0) <= 0.0 {
                0.0
            } else {
                let hi = roots::expand_upper(g, 0.0, 1.0)?;
                roots::newton_bracketed(
                    g,
                    |q| -2.0 * nf / (a + nf * q).powi(3) - cost.dmarginal_dq(q, theta_dagger),
                    0.0,
                    hi,
                    1e-15,
                    200,
                )?
            }
        }
    };
    let beta = cost.marginal(q, theta_dagger) * (a + q).powi(2);
    let alpha = match (rule, cost) {
        (AlphaRule::AsPrinted, CostModel::Linear) => (a + q) * theta_dagger * q + theta_dagger * q,
        _ => beta / (a + q) + cost.total(q, theta_dagger),
    };
    Ok(HomogeneousContract { theta_dagger, q_dagger: q, alpha, beta })
}

/// Effort and participation decision of an agent of true type θ.
pub fn homogeneous_agent_response(
    theta: f64,
    contract: &HomogeneousContract,
    cost: &CostModel,
    prior: &GaussianPrior,
) -> Result<(f64, bool)> {
    if !contract.is_active() {
        return Ok((0.0, false));
    }
    let a = prior.precision();
    let q = match cost {
        CostModel::Linear => ((contract.beta / theta).sqrt() - a).max(0.0),
        _ => optimal_effort(&contract.as_contract(), theta, cost, a)?,
    };
    let payoff = contract.alpha - contract.beta / (a + q) - cost.total(q, theta);
    // An agent exactly at break-even (type θ†) joins; allow for rounding.
    Ok((q, payoff >= -1e-12 * contract.alpha.abs().max(1.0)))
}

/// Principal's expected payoff when `k` agents take the contract, evaluated
/// under her own belief that each exerts q†.
pub fn homogeneous_principal_value(contract: &HomogeneousContract, k: usize, prior: &GaussianPrior) -> f64 {
    let a = prior.precision();
    let kf = k as f64;
    -1.0 / (a + kf * contract.q_dagger) - kf * (contract.alpha - contract.beta / (a + contract.q_dagger))
}

/// Whether running the contract beats predicting μ₀ and paying nothing,
/// whose expected payoff is −σ₀².
pub fn homogeneous_engages(contract: &HomogeneousContract, k: usize, prior: &GaussianPrior) -> bool {
    contract.is_active() && k > 0 && homogeneous_principal_value(contract, k, prior) >= -prior.var0
}

/// ξ = (μ₀a + q†·Σ g(ŷₙ)) / (a + D·q†) over the participants' reports, with
/// D the participant count or N.
pub fn homogeneous_predict(
    contract: &HomogeneousContract,
    reports: &[f64],
    prior: &GaussianPrior,
    denominator: usize,
) -> f64 {
    let q = contract.q_dagger;
    if q <= 0.0 || reports.is_empty() {
        return prior.mu0;
    }
    let a = prior.precision();
    let sum_g: f64 = reports.iter().map(|&y| crate::mechanism::unshrink(prior, y, q)).sum();
    (prior.mu0 * a + q * sum_g) / (a + denominator as f64 * q)
}

/// The homogeneous contract seen through the [`Mechanism`] interface; it
/// ignores type reports entirely.
#[derive(Debug, Clone)]
pub struct HomogeneousMechanism {
    pub prior: GaussianPrior,
    pub types: CostTypeDistribution,
    pub cost: CostModel,
    pub contract: HomogeneousContract,
}

impl Mechanism for HomogeneousMechanism {
    fn name(&self) -> &'static str {
        "homogeneous"
    }
    fn prior(&self) -> &GaussianPrior {
        &self.prior
    }
    fn types(&self) -> &CostTypeDistribution {
        &self.types
    }
    fn cost(&self) -> &CostModel {
        &self.cost
    }
    fn efforts(&self, reported: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![self.contract.q_dagger; reported.len()])
    }
    fn contract(&self, _reported: &[f64], _agent: usize) -> Result<Contract> {
        if self.contract.is_active() {
            Ok(self.contract.as_contract())
        } else {
            Ok(Contract::default())
        }
    }
    fn predict(&self, reports: &[f64], efforts: &[f64]) -> f64 {
        let active: Vec<f64> = reports.iter().zip(efforts).filter(|(_, &q)| q > 0.0).map(|(&y, _)| y).collect();
        homogeneous_predict(&self.contract, &active, &self.prior, active.len())
    }
}
