//! Experiment configuration and its TOML file format.
//!
//! The file has top-level run settings, an `[env]` table mirroring
//! [`SyntheticSpec`], an optional `[sweep]` table, and one `[[policy]]`
//! entry per policy. Policy tuning keys are optional; anything omitted
//! falls back to the experimental constants derived from the environment
//! (`λ₀ = d`, `c₁ = √d`, `a = √(dN)`, `γ = 0.1`, 50 FairX samples).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cab_core::env::SyntheticSpec;
use cab_core::policy::{PolicyConfig, PolicyKind};
use serde::Deserialize;

use crate::error::HarnessError;

/// Fully resolved experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub env: SyntheticSpec,
    pub policies: Vec<(PolicyKind, PolicyConfig)>,
    pub n_seeds: usize,
    pub base_seed: u64,
    pub sweep: Option<Sweep>,
    pub output_dir: PathBuf,
    pub emit_per_round: bool,
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    /// All six learning/baseline policies with experimental constants plus
    /// the two reference policies, on the given environment.
    pub fn standard(env: SyntheticSpec, n_seeds: usize, output_dir: PathBuf) -> Self {
        let cfg = PolicyConfig::experimental(env.dim, env.n_users);
        let mut policies: Vec<(PolicyKind, PolicyConfig)> = PolicyKind::NON_ORACLE
            .iter()
            .map(|kind| (*kind, cfg))
            .collect();
        policies.push((PolicyKind::OracleSatisfaction, cfg));
        policies.push((PolicyKind::OracleMatch, cfg));
        ExperimentConfig {
            env,
            policies,
            n_seeds,
            base_seed: 0,
            sweep: None,
            output_dir,
            emit_per_round: false,
            jobs: None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.env
            .validate()
            .map_err(|e| HarnessError::config(e.to_string()))?;
        if self.n_seeds == 0 {
            return Err(HarnessError::config("n_seeds must be at least 1"));
        }
        if self.policies.is_empty() {
            return Err(HarnessError::config("at least one policy is required"));
        }
        for (kind, cfg) in &self.policies {
            cfg.validate()
                .map_err(|e| HarnessError::config(format!("policy {kind}: {e}")))?;
        }
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
        }
        Ok(())
    }

    /// The seeds this configuration runs.
    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n_seeds as u64).map(|s| self.base_seed + s)
    }

    /// Loads and resolves a TOML config file.
    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let raw: RawConfig = toml::from_str(text)
            .map_err(|e| HarnessError::config(format!("invalid config: {e}")))?;
        raw.resolve()
    }
}

/// Parameter swept across cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Beta,
    Lambda,
    K,
    Gamma,
}

impl SweepParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParam::Beta => "beta",
            SweepParam::Lambda => "lambda",
            SweepParam::K => "K",
            SweepParam::Gamma => "gamma",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParam {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "beta" => Ok(SweepParam::Beta),
            "lambda" => Ok(SweepParam::Lambda),
            "K" | "k" => Ok(SweepParam::K),
            "gamma" => Ok(SweepParam::Gamma),
            other => Err(HarnessError::config(format!(
                "unknown sweep parameter `{other}` (expected beta, lambda, K, or gamma)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.values.is_empty() {
            return Err(HarnessError::config("sweep needs at least one value"));
        }
        for &v in &self.values {
            match self.param {
                SweepParam::Beta if v.is_nan() || v <= 0.0 => {
                    return Err(HarnessError::config(format!("beta value {v} must be > 0")))
                }
                SweepParam::Lambda if !(0.0..=1.0).contains(&v) => {
                    return Err(HarnessError::config(format!(
                        "lambda value {v} must lie in [0,1]"
                    )))
                }
                SweepParam::K if v.fract() != 0.0 || v < 1.0 => {
                    return Err(HarnessError::config(format!(
                        "K value {v} must be a positive integer"
                    )))
                }
                SweepParam::Gamma if v.is_nan() || v <= 0.0 => {
                    return Err(HarnessError::config(format!("gamma value {v} must be > 0")))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Applies one sweep value to a cell's environment and policy configs.
    pub fn apply(
        &self,
        value: f64,
        env: &mut SyntheticSpec,
        policies: &mut [(PolicyKind, PolicyConfig)],
    ) {
        match self.param {
            SweepParam::Beta => env.beta = value,
            SweepParam::Lambda => env.popularity = value,
            SweepParam::K => env.n_arms = value as usize,
            SweepParam::Gamma => {
                for (_, cfg) in policies.iter_mut() {
                    cfg.gamma = value;
                }
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    env: SyntheticSpec,
    #[serde(default = "default_seeds")]
    n_seeds: usize,
    #[serde(default)]
    base_seed: u64,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
    #[serde(default)]
    emit_per_round: bool,
    #[serde(default)]
    jobs: Option<usize>,
    #[serde(default)]
    sweep: Option<RawSweep>,
    #[serde(default, rename = "policy")]
    policies: Vec<RawPolicy>,
}

fn default_seeds() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    param: String,
    values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    name: String,
    lambda0: Option<f64>,
    c1: Option<f64>,
    a: Option<f64>,
    gamma: Option<f64>,
    delta: Option<f64>,
    fairx_samples: Option<usize>,
    use_theorem_constants: Option<bool>,
    incremental_h: Option<bool>,
    shuffle_greedy_order: Option<bool>,
}

impl RawConfig {
    fn resolve(self) -> Result<ExperimentConfig, HarnessError> {
        if self.policies.is_empty() {
            return Err(HarnessError::config("config lists no [[policy]] entries"));
        }
        let base = PolicyConfig::experimental(self.env.dim, self.env.n_users);
        let mut policies = Vec::with_capacity(self.policies.len());
        for raw in self.policies {
            let kind: PolicyKind = raw
                .name
                .parse()
                .map_err(|e: cab_core::CabError| HarnessError::config(e.to_string()))?;
            if policies.iter().any(|(k, _)| *k == kind) {
                return Err(HarnessError::config(format!(
                    "policy `{kind}` is listed twice"
                )));
            }
            let cfg = PolicyConfig {
                lambda0: raw.lambda0.unwrap_or(base.lambda0),
                c1: raw.c1.unwrap_or(base.c1),
                a: raw.a.unwrap_or(base.a),
                gamma: raw.gamma.unwrap_or(base.gamma),
                delta: raw.delta.unwrap_or(base.delta),
                fairx_samples: raw.fairx_samples.unwrap_or(base.fairx_samples),
                use_theorem_constants: raw
                    .use_theorem_constants
                    .unwrap_or(base.use_theorem_constants),
                incremental_h: raw.incremental_h.unwrap_or(base.incremental_h),
                shuffle_greedy_order: raw
                    .shuffle_greedy_order
                    .unwrap_or(base.shuffle_greedy_order),
            };
            policies.push((kind, cfg));
        }
        let sweep = match self.sweep {
            Some(raw) => Some(Sweep {
                param: raw.param.parse()?,
                values: raw.values,
            }),
            None => None,
        };
        let config = ExperimentConfig {
            env: self.env,
            policies,
            n_seeds: self.n_seeds,
            base_seed: self.base_seed,
            sweep,
            output_dir: self.output_dir,
            emit_per_round: self.emit_per_round,
            jobs: self.jobs,
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
n_seeds = 3
base_seed = 7
output_dir = "out"
emit_per_round = true

[env]
n_users = 10
n_arms = 4
dim = 3
horizon = 20
popularity = 0.25
beta = 2.0

[sweep]
param = "beta"
values = [1.0, 2.0]

[[policy]]
name = "cab_ucb"
c1 = 0.5

[[policy]]
name = "random"
"#;

    #[test]
    fn parses_and_resolves_defaults() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.n_seeds, 3);
        assert_eq!(cfg.base_seed, 7);
        assert_eq!(cfg.env.n_users, 10);
        assert_eq!(cfg.policies.len(), 2);
        let (kind, ucb) = cfg.policies[0];
        assert_eq!(kind, PolicyKind::CabUcb);
        assert_eq!(ucb.c1, 0.5);
        // Unset keys take the experimental defaults for d=3, N=10.
        assert_eq!(ucb.lambda0, 3.0);
        assert!((ucb.a - (30.0f64).sqrt()).abs() < 1e-12);
        assert_eq!(cfg.sweep.as_ref().unwrap().param, SweepParam::Beta);
        assert_eq!(cfg.seeds().collect::<Vec<_>>(), vec![7, 8, 9]);
    }

    #[test]
    fn rejects_unknown_policy_and_duplicates() {
        let bad = SAMPLE.replace("random", "bogus");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
        let dup = SAMPLE.replace("random", "cab_ucb");
        assert!(ExperimentConfig::from_toml_str(&dup).is_err());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_sweeps() {
        let unknown = format!("{SAMPLE}\nnot_a_key = 1\n");
        assert!(ExperimentConfig::from_toml_str(&unknown).is_err());

        let bad_sweep = SAMPLE.replace("param = \"beta\"", "param = \"zeta\"");
        assert!(ExperimentConfig::from_toml_str(&bad_sweep).is_err());

        let bad_value = SAMPLE.replace("values = [1.0, 2.0]", "values = [-1.0]");
        assert!(ExperimentConfig::from_toml_str(&bad_value).is_err());
    }

    #[test]
    fn sweep_application_touches_the_right_knob() {
        let mut env = SyntheticSpec::default();
        let mut policies = vec![(
            PolicyKind::Fairx,
            PolicyConfig::experimental(env.dim, env.n_users),
        )];

        Sweep {
            param: SweepParam::K,
            values: vec![],
        }
        .apply(7.0, &mut env, &mut policies);
        assert_eq!(env.n_arms, 7);

        Sweep {
            param: SweepParam::Gamma,
            values: vec![],
        }
        .apply(0.4, &mut env, &mut policies);
        assert_eq!(policies[0].1.gamma, 0.4);

        Sweep {
            param: SweepParam::Lambda,
            values: vec![],
        }
        .apply(0.75, &mut env, &mut policies);
        assert!((env.popularity - 0.75).abs() < 1e-15);
    }
}
