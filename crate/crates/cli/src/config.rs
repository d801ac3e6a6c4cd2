//! Declarative experiment configuration (TOML). Every field has a default,
//! so an empty file reproduces the standard sweep.

use std::path::{Path, PathBuf};

use cope_core::benchmarks::{AlphaRule, Denominator};
use cope_core::cost::CostModel;
use cope_core::mechanism::TieBreak;
use cope_core::model::{CostTypeDistribution, GaussianPrior, Scenario};
use cope_core::sim::{ExperimentPlan, MechanismKind, SimOptions};
use cope_core::verify::affine_marginal_cost;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub mu0: f64,
    pub var0: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { mu0: 0.0, var0: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeLawName {
    Uniform,
    TruncatedExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TypesConfig {
    pub law: TypeLawName,
    pub theta_lo: f64,
    pub theta_hi: f64,
    /// Rate of the truncated exponential; ignored for the uniform law.
    pub rate: f64,
}

impl Default for TypesConfig {
    fn default() -> Self {
        Self { law: TypeLawName::Uniform, theta_lo: 0.0, theta_hi: 1.0, rate: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostName {
    Linear,
    Quadratic,
    /// c = θ(1 + q), solved by the general optimizer.
    Affine,
}

impl CostName {
    pub fn model(self) -> CostModel {
        match self {
            CostName::Linear => CostModel::Linear,
            CostName::Quadratic => CostModel::Quadratic,
            CostName::Affine => affine_marginal_cost(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismName {
    Cope,
    Centralized,
    /// One entry per value of `theta_dagger`.
    Homogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub path: PathBuf,
    pub manifest: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { path: "results.csv".into(), manifest: "manifest.json".into(), format: OutputFormat::Csv }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomogeneousConfig {
    pub alpha_rule: AlphaRule,
    pub denominator: Denominator,
}

impl Default for HomogeneousConfig {
    fn default() -> Self {
        Self { alpha_rule: AlphaRule::BreakEven, denominator: Denominator::Participants }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CopeConfig {
    /// Seed for uniform tie-breaking among equal lowest reports; none means lowest index.
    pub tie_break_seed: Option<u64>,
}

#[allow(clippy::derivable_impls)]
impl Default for CopeConfig {
    fn default() -> Self {
        Self { tie_break_seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_trials: usize,
    pub n_values: Vec<usize>,
    pub theta_dagger: Vec<f64>,
    pub costs: Vec<CostName>,
    pub mechanisms: Vec<MechanismName>,
    /// Hold these types fixed in every trial instead of redrawing them.
    pub fixed_types: Option<Vec<f64>>,
    pub prior: PriorConfig,
    pub types: TypesConfig,
    pub cope: CopeConfig,
    pub homogeneous: HomogeneousConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            n_trials: 50_000,
            n_values: (3..=19).collect(),
            theta_dagger: vec![0.2, 0.5, 0.8],
            costs: vec![CostName::Linear, CostName::Quadratic],
            mechanisms: vec![MechanismName::Cope, MechanismName::Centralized, MechanismName::Homogeneous],
            fixed_types: None,
            prior: PriorConfig::default(),
            types: TypesConfig::default(),
            cope: CopeConfig::default(),
            homogeneous: HomogeneousConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = Self::parse(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1".into());
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return bad("n_values must be a nonempty list of positive integers".into());
        }
        if self.mechanisms.is_empty() || self.costs.is_empty() {
            return bad("mechanisms and costs must be nonempty".into());
        }
        let types = self.type_distribution()?;
        self.prior()?;
        if self.mechanisms.contains(&MechanismName::Homogeneous) {
            if self.theta_dagger.is_empty() {
                return bad("homogeneous mechanism needs at least one theta_dagger".into());
            }
            if let Some(t) = self.theta_dagger.iter().find(|&&t| !types.contains(t) || t <= 0.0) {
                return bad(format!("theta_dagger {t} outside the type support"));
            }
        }
        if let Some(f) = &self.fixed_types {
            if self.n_values.iter().any(|&n| n != f.len()) {
                return bad("fixed_types length must equal every entry of n_values".into());
            }
            if let Some(t) = f.iter().find(|&&t| !types.contains(t)) {
                return bad(format!("fixed type {t} outside the type support"));
            }
        }
        Ok(())
    }

    pub fn prior(&self) -> Result<GaussianPrior, CliError> {
        GaussianPrior::new(self.prior.mu0, self.prior.var0).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn type_distribution(&self) -> Result<CostTypeDistribution, CliError> {
        let t = &self.types;
        match t.law {
            TypeLawName::Uniform => CostTypeDistribution::uniform(t.theta_lo, t.theta_hi),
            TypeLawName::TruncatedExponential => CostTypeDistribution::truncated_exponential(t.theta_lo, t.theta_hi, t.rate),
        }
        .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Mechanism list with one homogeneous entry per θ†.
    pub fn mechanism_kinds(&self) -> Vec<MechanismKind> {
        let mut out = Vec::new();
        for m in &self.mechanisms {
            match m {
                MechanismName::Cope => out.push(MechanismKind::CopeGeneral),
                MechanismName::Centralized => out.push(MechanismKind::Centralized),
                MechanismName::Homogeneous => {
                    out.extend(self.theta_dagger.iter().map(|&t| MechanismKind::Homogeneous { theta_dagger: t }))
                }
            }
        }
        out
    }

    pub fn plan(&self, threads: usize) -> Result<ExperimentPlan, CliError> {
        let costs: Vec<CostModel> = self.costs.iter().map(|c| c.model()).collect();
        let n0 = self.n_values[0];
        let base = Scenario::new(self.prior()?, self.type_distribution()?, n0, costs[0].clone())
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(ExperimentPlan {
            base,
            costs,
            n_values: self.n_values.clone(),
            mechanisms: self.mechanism_kinds(),
            n_trials: self.n_trials,
            master_seed: self.seed,
            threads,
            options: SimOptions {
                tie: self.cope.tie_break_seed.map_or(TieBreak::LowestIndex, TieBreak::Seeded),
                alpha: self.homogeneous.alpha_rule,
                denominator: self.homogeneous.denominator,
                ..SimOptions::default()
            },
            fixed_types: self.fixed_types.clone(),
        })
    }
}
