//! General cost: efforts from the principal's concave program, payments from
//! the envelope integral of ∂C/∂θ.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{check_reports, Contract, Mechanism};
use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::model::{CostTypeDistribution, GaussianPrior};
use crate::optimize::{maximize_nonneg, AscentConfig, AscentResult};
use crate::quadrature;

/// The agent's Bayes risk as a function of his own effort.
pub trait AgentRisk: Send + Sync {
    fn risk(&self, q: f64) -> f64;
    fn d_risk(&self, q: f64) -> f64;
}

/// h(q) = 1/(a + q).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianRisk {
    pub precision: f64,
}

impl AgentRisk for GaussianRisk {
    fn risk(&self, q: f64) -> f64 {
        1.0 / (self.precision + q)
    }
    fn d_risk(&self, q: f64) -> f64 {
        -1.0 / (self.precision + q).powi(2)
    }
}

/// K = −c/h'(Q), S = −c·h(Q)/h'(Q). Zero when the marginal cost vanishes.
pub fn general_k_s(cost: &CostModel, q: f64, theta_hat: f64, risk: &dyn AgentRisk) -> Result<(f64, f64)> {
    let c = cost.marginal(q, theta_hat);
    if c == 0.0 {
        return Ok((0.0, 0.0));
    }
    let d = risk.d_risk(q);
    if d == 0.0 || !d.is_finite() {
        return Err(Error::SingularRule(format!("dh/dq = {d} at q = {q}")));
    }
    Ok((-c / d, -c * risk.risk(q) / d))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralConfig {
    pub ascent: AscentConfig,
    pub starts: usize,
    /// Absolute tolerance of the π integral; its integrand is itself an
    /// optimizer output, so it cannot be asked for more than that accuracy.
    pub pi_tol: f64,
    /// Re-solve on a type sweep after each solve and fail if some agent's
    /// effort increases with his own report.
    pub check_monotone: bool,
    pub sweep_points: usize,
}

impl Default for GeneralConfig {
    fn default() -> Self {
        Self { ascent: AscentConfig::default(), starts: 8, pi_tol: 1e-7, check_monotone: false, sweep_points: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct GeneralCope {
    prior: GaussianPrior,
    types: CostTypeDistribution,
    cost: CostModel,
    cfg: GeneralConfig,
    /// false: drop the information-rent term (the integrated planner's problem).
    information_rent: bool,
}

impl GeneralCope {
    pub fn new(prior: GaussianPrior, types: CostTypeDistribution, cost: CostModel, cfg: GeneralConfig) -> Self {
        Self { prior, types, cost, cfg, information_rent: true }
    }

    /// The same program with true types and no information rent.
    pub fn planner(prior: GaussianPrior, types: CostTypeDistribution, cost: CostModel, cfg: GeneralConfig) -> Self {
        Self { prior, types, cost, cfg, information_rent: false }
    }

    fn rent(&self, theta: f64) -> f64 {
        if self.information_rent {
            self.types.inv_hazard(theta)
        } else {
            0.0
        }
    }

    /// −1/(a+Σq) − Σ [C(qₙ,θ̂ₙ) + ∂C/∂θ(qₙ,θ̂ₙ)·F/f(θ̂ₙ)]
    pub fn objective(&self, reported: &[f64], q: &[f64]) -> f64 {
        let a = self.prior.precision();
        let total: f64 = q.iter().sum();
        let costs: f64 = q
            .iter()
            .zip(reported)
            .map(|(&qn, &t)| {
                if qn == 0.0 {
                    0.0
                } else {
                    self.cost.total(qn, t) + self.cost.d_total_d_theta(qn, t) * self.rent(t)
                }
            })
            .sum();
        -1.0 / (a + total) - costs
    }

    pub fn gradient(&self, reported: &[f64], q: &[f64]) -> Vec<f64> {
        let a = self.prior.precision();
        let h = 1.0 / (a + q.iter().sum::<f64>());
        q.iter()
            .zip(reported)
            .map(|(&qn, &t)| h * h - self.cost.marginal(qn, t) - self.cost.dmarginal_dtheta(qn, t) * self.rent(t))
            .collect()
    }

    /// Multistart solve; returns the best converged run.
    pub fn solve(&self, reported: &[f64]) -> Result<AscentResult> {
        check_reports(reported, &self.types)?;
        let n = reported.len();
        let scales = [1.0, 0.1, 3.0, 0.01, 10.0, 0.3, 30.0, 0.03];
        let mut best: Option<AscentResult> = None;
        let mut last_err = None;
        for k in 0..self.cfg.starts.max(1) {
            let scale = scales[k % scales.len()] * (1.0 + (k / scales.len()) as f64);
            let x0: Vec<f64> =
                (0..n).map(|i| scale * (1.0 + 0.25 * ((i + k) % 3) as f64) / n as f64).collect();
            match maximize_nonneg(|q| self.objective(reported, q), |q| self.gradient(reported, q), &x0, &self.cfg.ascent)
            {
                Ok(r) => {
                    if best.as_ref().map_or(true, |b| r.value > b.value) {
                        best = Some(r);
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        best.ok_or_else(|| last_err.expect("at least one start"))
    }

    /// Ex-post check that each agent's effort is nonincreasing in his own
    /// report on a sweep over cell midpoints of the support, others fixed.
    pub fn monotone_on_sweep(&self, reported: &[f64]) -> Result<bool> {
        let m = self.cfg.sweep_points.max(2);
        let (lo, hi) = (self.types.theta_lo, self.types.theta_hi);
        let mut v = reported.to_vec();
        for n in 0..reported.len() {
            let mut prev = f64::INFINITY;
            for i in 0..m {
                v[n] = lo + (hi - lo) * (i as f64 + 0.5) / m as f64;
                let q = self.solve(&v)?.x[n];
                if q > prev + 1e-7 * prev.max(1.0) {
                    return Ok(false);
                }
                prev = q;
            }
            v[n] = reported[n];
        }
        Ok(true)
    }

    /// Eigenvalues of the objective's Hessian at `q`, by central differences
    /// of the gradient (one-sided at the bound).
    pub fn hessian_eigenvalues(&self, reported: &[f64], q: &[f64]) -> Vec<f64> {
        let n = q.len();
        let mut hm = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let h = 1e-5_f64.max(1e-5 * q[j].abs());
            let mut up = q.to_vec();
            let mut dn = q.to_vec();
            up[j] += h;
            dn[j] = (dn[j] - h).max(0.0);
            let width = up[j] - dn[j];
            let gu = self.gradient(reported, &up);
            let gd = self.gradient(reported, &dn);
            for i in 0..n {
                hm[(i, j)] = (gu[i] - gd[i]) / width;
            }
        }
        let sym = (&hm + hm.transpose()) * 0.5;
        SymmetricEigen::new(sym).eigenvalues.iter().copied().collect()
    }

    fn efforts_checked(&self, reported: &[f64]) -> Result<Vec<f64>> {
        let r = self.solve(reported)?;
        if self.cfg.check_monotone && !self.monotone_on_sweep(reported)? {
            return Err(Error::Domain("effort schedule is not monotone in own report".into()));
        }
        Ok(r.x)
    }
}

impl Mechanism for GeneralCope {
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
        &self.cost
    }

    fn efforts(&self, reported: &[f64]) -> Result<Vec<f64>> {
        self.efforts_checked(reported)
    }

    fn contract(&self, reported: &[f64], agent: usize) -> Result<Contract> {
        let q = self.solve(reported)?.x[agent];
        if q == 0.0 {
            return Ok(Contract::default());
        }
        let t = reported[agent];
        let (k, s) = general_k_s(&self.cost, q, t, &GaussianRisk { precision: self.prior.precision() })?;
        let breaks: Vec<f64> = reported.iter().enumerate().filter(|&(i, _)| i != agent).map(|(_, &v)| v).collect();
        let integrand = |z: f64| {
            let mut v = reported.to_vec();
            v[agent] = z;
            match self.solve(&v) {
                Ok(r) => self.cost.d_total_d_theta(r.x[agent], z),
                Err(_) => f64::NAN,
            }
        };
        let tail = quadrature::integrate_with_breaks(integrand, t, self.types.theta_hi, &breaks, self.cfg.pi_tol)
            .map_err(|e| Error::NonConvergence { iterations: 0, detail: format!("payment integral: {e}") })?;
        Ok(Contract { effort: q, pi: self.cost.total(q, t) + tail.value, k, s })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::GeneralCost;
    use crate::mechanism::{LinearCope, QuadraticCope};

    fn unit() -> CostTypeDistribution {
        CostTypeDistribution::uniform(0.0, 1.0).unwrap()
    }

    #[test]
    fn reproduces_linear_schedule() {
        let m = GeneralCope::new(GaussianPrior::standard(), unit(), CostModel::Linear, GeneralConfig::default());
        let q = m.efforts(&[0.125, 0.9]).unwrap();
        assert!((q[0] - 1.0).abs() < 1e-6 && q[1].abs() < 1e-6, "{q:?}");
    }

    #[test]
    fn reproduces_quadratic_schedule_flat_prior() {
        let prior = GaussianPrior::new(0.0, f64::INFINITY).unwrap();
        let m = GeneralCope::new(prior, unit(), CostModel::Quadratic, GeneralConfig::default());
        let q = m.efforts(&[0.5]).unwrap();
        assert!((q[0] - 1.0).abs() < 1e-6, "{q:?}");
    }

    #[test]
    fn all_zero_when_clamped() {
        let m = GeneralCope::new(GaussianPrior::standard(), unit(), CostModel::Linear, GeneralConfig::default());
        let q = m.efforts(&[0.6, 0.8, 0.95]).unwrap();
        assert!(q.iter().all(|&v| v == 0.0), "{q:?}");
    }

    #[test]
    fn k_s_reduce_to_closed_forms() {
        // Linear at θ̂ = 0.5, σ₀² = 4: Q = 1 − 1/4 > 0, K = θ̂/(2θ̂) = 0.5.
        let a = 0.25;
        let q = 1.0 / (1.0f64).sqrt() - a;
        let (k, s) = general_k_s(&CostModel::Linear, q, 0.5, &GaussianRisk { precision: a }).unwrap();
        assert!((k - 0.5).abs() < 1e-12 && (s - 0.5).abs() < 1e-12);
        // Quadratic, flat prior, θ̂ = [0.5]: Q = 1.
        let (k, s) = general_k_s(&CostModel::Quadratic, 1.0, 0.5, &GaussianRisk { precision: 0.0 }).unwrap();
        assert!((k - 0.5).abs() < 1e-12 && (s - 0.5).abs() < 1e-12);
        let free = CostModel::General(GeneralCost::new("free", |_, _| 0.0));
        assert_eq!(general_k_s(&free, 1.0, 0.5, &GaussianRisk { precision: 1.0 }).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn singular_risk_is_an_error() {
        struct Flat;
        impl AgentRisk for Flat {
            fn risk(&self, _: f64) -> f64 {
                1.0
            }
            fn d_risk(&self, _: f64) -> f64 {
                0.0
            }
        }
        assert!(matches!(general_k_s(&CostModel::Linear, 1.0, 0.5, &Flat), Err(Error::SingularRule(_))));
    }

    #[test]
    fn contracts_match_specialized_rules() {
        let prior = GaussianPrior::new(0.0, 4.0).unwrap();
        let reported = [0.3, 0.55];
        let lin = GeneralCope::new(prior, unit(), CostModel::Linear, GeneralConfig::default());
        let c = lin.contract(&reported, 0).unwrap();
        let d = LinearCope::new(prior, unit()).contract(&reported, 0).unwrap();
        assert!((c.k - d.k).abs() < 1e-8 && (c.s - d.s).abs() < 1e-8);
        assert!((c.pi - d.pi).abs() < 1e-6, "{} vs {}", c.pi, d.pi);

        let quad = GeneralCope::new(prior, unit(), CostModel::Quadratic, GeneralConfig::default());
        let c = quad.contract(&reported, 1).unwrap();
        let d = QuadraticCope::new(prior, unit()).contract(&reported, 1).unwrap();
        assert!((c.k - d.k).abs() < 1e-8 && (c.s - d.s).abs() < 1e-8);
        assert!((c.pi - d.pi).abs() < 1e-6);
    }

    #[test]
    fn hessian_definiteness() {
        let prior = GaussianPrior::standard();
        let reported = [0.2, 0.4, 0.7];
        let quad = GeneralCope::new(prior, unit(), CostModel::Quadratic, GeneralConfig::default());
        let q = quad.solve(&reported).unwrap().x;
        assert!(quad.hessian_eigenvalues(&reported, &q).iter().all(|&e| e < 0.0));
        let lin = GeneralCope::new(prior, unit(), CostModel::Linear, GeneralConfig::default());
        let q = lin.solve(&reported).unwrap().x;
        let eig = lin.hessian_eigenvalues(&reported, &q);
        assert!(eig.iter().all(|&e| e <= 1e-6));
        assert!(eig.iter().filter(|&&e| e < -1e-3).count() == 1);
    }

    #[test]
    fn monotone_sweep() {
        let cfg = GeneralConfig { sweep_points: 40, check_monotone: true, ..GeneralConfig::default() };
        let m = GeneralCope::new(GaussianPrior::standard(), unit(), CostModel::Quadratic, cfg);
        assert!(m.efforts(&[0.3, 0.6]).is_ok());
    }
}
