//! JSON experiment configurations, one schema per subcommand.

use serde::{Deserialize, Serialize};

use mixrank_core::sparse_tensor::AnisotropyWeights;
use mixrank_core::testbed::{
    isotropic_kink, matern_kernel, mixed_smooth_synthetic, power_coefficients, separable_oracle, FitWindow,
    OracleFunction,
};

use crate::error::CliError;

/// `α` directly, or the bivariate `σ` giving `α = (σ, 1/σ)`, or uniform
/// weights when neither is set.
pub fn resolve_weights(alpha: &Option<Vec<f64>>, sigma: Option<f64>, m: usize) -> Result<AnisotropyWeights, CliError> {
    let weights = match (alpha, sigma) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either alpha or sigma, not both".into())),
        (Some(a), None) => AnisotropyWeights::new(a.clone())?,
        (None, Some(s)) => AnisotropyWeights::from_sigma(s)?,
        (None, None) => AnisotropyWeights::uniform(m),
    };
    if weights.m() != m {
        return Err(CliError::Config(format!("{} weights for {m} subdomains", weights.m())));
    }
    Ok(weights)
}

/// Oracle functions by name and parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    /// `Σ_k k^{−p} sin(kπx) sin(kπy)` with `terms` summands.
    Separable {
        p: f64,
        terms: usize,
    },
    Matern {
        nu: f64,
    },
    /// `exp(−|x−y|^γ)`.
    Kink {
        gamma: f64,
    },
    Synthetic {
        s: Vec<f64>,
        delta: f64,
        modes: usize,
        seed: u64,
    },
}

impl OracleSpec {
    pub fn build(&self) -> Result<OracleFunction, CliError> {
        Ok(match self {
            OracleSpec::Separable { p, terms } => separable_oracle(power_coefficients(*p, *terms))?,
            OracleSpec::Matern { nu } => matern_kernel(*nu)?,
            OracleSpec::Kink { gamma } => isotropic_kink(*gamma)?,
            OracleSpec::Synthetic { s, delta, modes, seed } => mixed_smooth_synthetic(s, *delta, *modes, *seed)?,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimConfig {
    pub n: Vec<usize>,
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
    #[serde(default)]
    pub sigma: Option<f64>,
    pub budgets: Vec<f64>,
    /// Also write every index set to `index_sets.json`.
    #[serde(default)]
    pub index_sets: bool,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    /// SVD of the sample matrix.
    #[default]
    Dense,
    /// Haar analysis, matricization, SVD.
    Pipeline,
}

/// Smoothness used for the predicted rate of a decay run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionSpec {
    pub n: Vec<usize>,
    pub s: Vec<f64>,
    /// Fit with the `(log R)^q` factor of the prediction.
    #[serde(default)]
    pub log_correction: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayRun {
    pub name: String,
    pub oracle: OracleSpec,
    #[serde(default)]
    pub prediction: Option<PredictionSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub level: usize,
    #[serde(default = "default_split")]
    pub split: usize,
    pub max_rank: usize,
    #[serde(default)]
    pub method: SpectrumMethod,
    /// Defaults to all ranks but the two smallest.
    #[serde(default)]
    pub window: Option<FitWindow>,
    pub runs: Vec<DecayRun>,
}

fn default_split() -> usize {
    1
}

/// Bivariate test functions for the sparse convergence study.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// `sin(πx) sin(πy)`.
    SinProduct,
    Constant {
        value: f64,
    },
    Oracle {
        oracle: OracleSpec,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseConvergenceConfig {
    pub function: FunctionSpec,
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
    #[serde(default)]
    pub sigma: Option<f64>,
    pub budgets: Vec<f64>,
    pub ref_level: usize,
    /// Power of `log 2^J` in the fitted model.
    #[serde(default)]
    pub log_power: Option<f64>,
    #[serde(default)]
    pub predicted: Option<f64>,
    /// Window over `2^J`; defaults to all but the two smallest budgets.
    #[serde(default)]
    pub window: Option<FitWindow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TtInput {
    /// Haar coefficients of an oracle sampled with `2^level` points per variable.
    Oracle { oracle: OracleSpec, level: usize },
    /// Outer product of the given vectors.
    RankOne { factors: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TtPolicySpec {
    Full,
    Fixed {
        ranks: Vec<usize>,
    },
    /// Rank schedule from smoothness `s` with `n = 1`; `s` defaults to the
    /// synthetic oracle's.
    Schedule {
        #[serde(default)]
        s: Option<Vec<f64>>,
    },
    StepTolerance,
    TotalTolerance,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TtConfig {
    pub input: TtInput,
    pub policy: TtPolicySpec,
    /// Accuracies for the schedule and tolerance policies; one run each.
    #[serde(default)]
    pub eps: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub n: Vec<usize>,
    pub s: Vec<f64>,
    #[serde(default)]
    pub r: Option<Vec<f64>>,
    /// Defaults to the optimal `σ` for two subdomains.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default = "default_split")]
    pub split: usize,
    #[serde(default)]
    pub eps: Option<f64>,
    /// Level budget for the rank bounds.
    #[serde(default)]
    pub budget: Option<f64>,
}
