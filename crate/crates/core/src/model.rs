//! Prior, noise and cost-type model shared by every mechanism.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::roots;

/// Prior `x ~ N(mu0, var0)`. `var0 = +inf` gives a flat prior (precision 0),
/// which the closed forms accept but the samplers do not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPrior {
    pub mu0: f64,
    pub var0: f64,
}

impl GaussianPrior {
    pub fn new(mu0: f64, var0: f64) -> Result<Self> {
        if !(var0 > 0.0) || !mu0.is_finite() {
            return Err(Error::domain(format!("prior needs var0 > 0, got ({mu0}, {var0})")));
        }
        Ok(Self { mu0, var0 })
    }

    pub fn standard() -> Self {
        Self { mu0: 0.0, var0: 1.0 }
    }

    /// 1/σ₀², zero for a flat prior.
    pub fn precision(&self) -> f64 {
        if self.var0.is_infinite() {
            0.0
        } else {
            1.0 / self.var0
        }
    }
}

type Fun = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied type law: cdf, density and inverse hazard F/f.
#[derive(Clone)]
pub struct CustomLaw {
    pub name: String,
    pub cdf: Fun,
    pub pdf: Fun,
    pub inv_hazard: Fun,
}

impl fmt::Debug for CustomLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomLaw").field("name", &self.name).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum TypeLaw {
    Uniform,
    Custom(CustomLaw),
}

/// Law of the private cost type θ on `[theta_lo, theta_hi]`.
#[derive(Debug, Clone)]
pub struct CostTypeDistribution {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub law: TypeLaw,
}

/// Smallest type ever drawn above the lower edge; keeps 1/θ finite.
pub const TYPE_FLOOR: f64 = 1e-12;

impl CostTypeDistribution {
    pub fn uniform(theta_lo: f64, theta_hi: f64) -> Result<Self> {
        Self::check_support(theta_lo, theta_hi)?;
        Ok(Self { theta_lo, theta_hi, law: TypeLaw::Uniform })
    }

    pub fn custom(theta_lo: f64, theta_hi: f64, law: CustomLaw) -> Result<Self> {
        Self::check_support(theta_lo, theta_hi)?;
        Ok(Self { theta_lo, theta_hi, law: TypeLaw::Custom(law) })
    }

    /// Exponential with the given rate, truncated to the support.
    pub fn truncated_exponential(theta_lo: f64, theta_hi: f64, rate: f64) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(Error::domain("exponential rate must be positive"));
        }
        let mass = -(-rate * (theta_hi - theta_lo)).exp_m1();
        let law = CustomLaw {
            name: format!("truncexp({rate})"),
            cdf: Arc::new(move |t| -(-rate * (t - theta_lo)).exp_m1() / mass),
            pdf: Arc::new(move |t| rate * (-rate * (t - theta_lo)).exp() / mass),
            inv_hazard: Arc::new(move |t| (rate * (t - theta_lo)).exp_m1() / rate),
        };
        Self::custom(theta_lo, theta_hi, law)
    }

    fn check_support(lo: f64, hi: f64) -> Result<()> {
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::domain(format!("type support must satisfy 0 <= lo < hi < inf, got [{lo}, {hi}]")));
        }
        Ok(())
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.theta_lo && theta <= self.theta_hi
    }

    pub fn ensure_contains(&self, theta: f64) -> Result<()> {
        if self.contains(theta) {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "type {theta} outside support [{}, {}]",
                self.theta_lo, self.theta_hi
            )))
        }
    }

    pub fn cdf(&self, theta: f64) -> f64 {
        match &self.law {
            TypeLaw::Uniform => ((theta - self.theta_lo) / (self.theta_hi - self.theta_lo)).clamp(0.0, 1.0),
            TypeLaw::Custom(c) => (c.cdf)(theta),
        }
    }

    pub fn pdf(&self, theta: f64) -> f64 {
        match &self.law {
            TypeLaw::Uniform => 1.0 / (self.theta_hi - self.theta_lo),
            TypeLaw::Custom(c) => (c.pdf)(theta),
        }
    }

    /// F/f, defined as 0 at the lower edge.
    pub fn inv_hazard(&self, theta: f64) -> f64 {
        if theta <= self.theta_lo {
            return 0.0;
        }
        match &self.law {
            TypeLaw::Uniform => theta - self.theta_lo,
            TypeLaw::Custom(c) => (c.inv_hazard)(theta),
        }
    }

    /// Virtual cost γ(θ) = θ + F(θ)/f(θ).
    pub fn virtual_cost(&self, theta: f64) -> f64 {
        theta + self.inv_hazard(theta)
    }

    /// Quantile function, clamped to `[theta_lo + TYPE_FLOOR, theta_hi]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let lo = self.theta_lo;
        let hi = self.theta_hi;
        let t = match &self.law {
            TypeLaw::Uniform => lo + u * (hi - lo),
            TypeLaw::Custom(_) => {
                roots::bisect(|t| self.cdf(t) - u, lo, hi, 1e-15 * hi.max(1.0), 200).unwrap_or(lo)
            }
        };
        t.clamp(lo + TYPE_FLOOR, hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.gen::<f64>())
    }

    /// Checks that F/f is nondecreasing on a grid (equivalently, log F is
    /// concave), which is what makes γ monotone.
    pub fn check_log_concave(&self, points: usize) -> LogConcavityReport {
        let n = points.max(3);
        let w = self.theta_hi - self.theta_lo;
        let grid: Vec<f64> = (0..n).map(|i| self.theta_lo + w * (i as f64 + 0.5) / n as f64).collect();
        let ratio: Vec<f64> = grid.iter().map(|&t| self.cdf(t) / self.pdf(t)).collect();
        let mut worst_drop = 0.0_f64;
        let mut at = None;
        for i in 1..n {
            let drop = ratio[i - 1] - ratio[i];
            let tol = 1e-9 * ratio[i - 1].abs().max(1e-12);
            if drop > tol && drop > worst_drop {
                worst_drop = drop;
                at = Some(grid[i]);
            }
        }
        LogConcavityReport { log_concave: at.is_none(), worst_drop, at }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogConcavityReport {
    pub log_concave: bool,
    /// Largest decrease of F/f between neighbouring grid points.
    pub worst_drop: f64,
    pub at: Option<f64>,
}

/// Everything a trial needs to know about the environment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub prior: GaussianPrior,
    pub types: CostTypeDistribution,
    pub n_agents: usize,
    pub cost: CostModel,
}

impl Scenario {
    pub fn new(prior: GaussianPrior, types: CostTypeDistribution, n_agents: usize, cost: CostModel) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::domain("need at least one agent"));
        }
        Ok(Self { prior, types, n_agents, cost })
    }

    /// μ₀=0, σ₀²=1, θ ~ Uniform[0,1].
    pub fn standard(n_agents: usize, cost: CostModel) -> Self {
        Self {
            prior: GaussianPrior::standard(),
            types: CostTypeDistribution::uniform(0.0, 1.0).expect("valid support"),
            n_agents,
            cost,
        }
    }
}

/// An observation. `value` is `None` when no effort was exerted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub value: Option<f64>,
    pub effort: f64,
}

/// Draws the truth and the type vector of one trial.
pub fn draw_world(scenario: &Scenario, seed: u64) -> Result<(f64, Vec<f64>)> {
    let prior = scenario.prior;
    if !prior.var0.is_finite() {
        return Err(Error::domain("cannot sample x from a flat prior"));
    }
    let z: f64 = stream(seed, 0, Purpose::World).sample(StandardNormal);
    let x = prior.mu0 + prior.var0.sqrt() * z;
    let types = (0..scenario.n_agents)
        .map(|n| scenario.types.sample(&mut stream(seed, n as u64, Purpose::Type)))
        .collect();
    Ok((x, types))
}

/// Standard-normal noise draw for agent `agent` of the trial with this seed.
pub fn noise_draw(seed: u64, agent: usize) -> f64 {
    stream(seed, agent as u64, Purpose::Noise).sample(StandardNormal)
}

/// `x + z/√q` for a given standard-normal `z`.
pub fn observe_with(x: f64, effort: f64, z: f64) -> Result<Observation> {
    if !(effort >= 0.0) {
        return Err(Error::domain(format!("effort must be >= 0, got {effort}")));
    }
    let value = (effort > 0.0).then(|| x + z / effort.sqrt());
    Ok(Observation { value, effort })
}

pub fn draw_observation(x: f64, effort: f64, seed: u64) -> Result<Observation> {
    observe_with(x, effort, noise_draw(seed, 0))
}

/// Conjugate update from `(y, q)` pairs; zero-precision entries are skipped.
pub fn posterior_mean_var(prior: &GaussianPrior, reports: &[(f64, f64)]) -> (f64, f64) {
    let a = prior.precision();
    let mut num = prior.mu0 * a;
    let mut den = a;
    for &(y, q) in reports {
        if q > 0.0 {
            num += y * q;
            den += q;
        }
    }
    if den == 0.0 {
        return (prior.mu0, f64::INFINITY);
    }
    (num / den, 1.0 / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scen(n: usize) -> Scenario {
        Scenario::standard(n, CostModel::Linear)
    }

    #[test]
    fn world_is_deterministic_and_in_range() {
        let s = scen(3);
        let a = draw_world(&s, 99).unwrap();
        let b = draw_world(&s, 99).unwrap();
        assert_eq!(a, b);
        assert!(a.0.abs() < 6.0);
        assert!(a.1.iter().all(|t| (0.0..=1.0).contains(t)));
    }

    #[test]
    fn world_mean_is_prior_mean() {
        let s = scen(1);
        let n = 100_000;
        let mean: f64 = (0..n).map(|i| draw_world(&s, i).unwrap().0).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "{mean}");
    }

    #[test]
    fn observation_noise() {
        let o = draw_observation(2.0, 1e12, 5).unwrap();
        assert!((o.value.unwrap() - 2.0).abs() < 1e-5);
        assert_eq!(draw_observation(0.0, 0.0, 5).unwrap().value, None);
        assert!(draw_observation(0.0, -1.0, 5).is_err());

        let n = 100_000u64;
        let ys: Vec<f64> = (0..n).map(|s| draw_observation(0.0, 1.0, s).unwrap().value.unwrap()).collect();
        let m = ys.iter().sum::<f64>() / n as f64;
        let v = ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((v - 1.0).abs() < 0.02, "{v}");
    }

    #[test]
    fn posterior_examples() {
        let p = GaussianPrior::standard();
        assert_eq!(posterior_mean_var(&p, &[]), (0.0, 1.0));
        let (m, v) = posterior_mean_var(&p, &[(2.0, 1.0)]);
        assert!((m - 1.0).abs() < 1e-15 && (v - 0.5).abs() < 1e-15);
        let p2 = GaussianPrior::new(1.0, 2.0).unwrap();
        let (m, v) = posterior_mean_var(&p2, &[(1.0, 5.0)]);
        assert!((m - 1.0).abs() < 1e-15 && (v - 1.0 / 5.5).abs() < 1e-15);
        let (m, _) = posterior_mean_var(&p, &[(2.0, 1.0), (100.0, 0.0)]);
        assert!((m - 1.0).abs() < 1e-15);
    }

    #[test]
    fn posterior_variance_is_empirical_mse() {
        // x ~ N(0,1), two observers with precisions 1 and 3: risk 1/5.
        let p = GaussianPrior::standard();
        let s = scen(1);
        let n = 100_000u64;
        let mut acc = Vec::with_capacity(n as usize);
        for t in 0..n {
            let (x, _) = draw_world(&s, t).unwrap();
            let y1 = observe_with(x, 1.0, noise_draw(t, 0)).unwrap().value.unwrap();
            let y2 = observe_with(x, 3.0, noise_draw(t, 1)).unwrap().value.unwrap();
            let (m, _) = posterior_mean_var(&p, &[(y1, 1.0), (y2, 3.0)]);
            acc.push((x - m).powi(2));
        }
        let mean = acc.iter().sum::<f64>() / n as f64;
        let sd = (acc.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((mean - 0.2).abs() < 3.0 * sd / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn uniform_virtual_cost() {
        let d = CostTypeDistribution::uniform(0.2, 1.0).unwrap();
        assert!((d.virtual_cost(0.6) - 1.0).abs() < 1e-15);
        assert_eq!(d.inv_hazard(0.2), 0.0);
        assert!(CostTypeDistribution::uniform(1.0, 1.0).is_err());
    }

    #[test]
    fn log_concavity_checker() {
        assert!(CostTypeDistribution::uniform(0.0, 1.0).unwrap().check_log_concave(400).log_concave);
        assert!(CostTypeDistribution::truncated_exponential(0.0, 1.0, 3.0).unwrap().check_log_concave(400).log_concave);
        let bad = CustomLaw {
            name: "mix".into(),
            cdf: Arc::new(|t| 0.1 * t + 0.9 * t.powi(8)),
            pdf: Arc::new(|t| 0.1 + 7.2 * t.powi(7)),
            inv_hazard: Arc::new(|t| (0.1 * t + 0.9 * t.powi(8)) / (0.1 + 7.2 * t.powi(7))),
        };
        let r = CostTypeDistribution::custom(0.0, 1.0, bad).unwrap().check_log_concave(400);
        assert!(!r.log_concave);
    }

    #[test]
    fn custom_quantile_inverts_cdf() {
        let d = CostTypeDistribution::truncated_exponential(0.0, 2.0, 1.5).unwrap();
        for u in [0.1, 0.5, 0.9] {
            assert!((d.cdf(d.quantile(u)) - u).abs() < 1e-12);
        }
        let t = 0.7;
        assert!((d.inv_hazard(t) - d.cdf(t) / d.pdf(t)).abs() < 1e-12);
    }
}
