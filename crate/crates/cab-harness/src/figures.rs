//! Canned experiment configurations for the five result panels.

use std::path::PathBuf;

use cab_core::env::SyntheticSpec;

use crate::config::{ExperimentConfig, Sweep, SweepParam};
use crate::error::HarnessError;

/// Default replication count for the canned panels.
pub const DEFAULT_FIGURE_SEEDS: usize = 10;

/// Builds the configuration for one panel:
///
/// - `2a`: default setting, per-round satisfaction/match curves;
/// - `2b`: sweep over the satisfaction cap `β ∈ {1, 2, 5, 10, 20}`;
/// - `2c`: sweep over arm popularity `λ ∈ {0, 0.25, 0.5, 0.75, 1}`;
/// - `2d`/`2e`: the fully popularity-ordered setting `λ = 1`, where the
///   per-arm selection probabilities and expected-match sums live in
///   `selection.csv`.
pub fn figure_config(
    panel: &str,
    n_seeds: usize,
    output_dir: PathBuf,
) -> Result<ExperimentConfig, HarnessError> {
    let env = SyntheticSpec::default();
    let config = match panel {
        "2a" => {
            let mut c = ExperimentConfig::standard(env, n_seeds, output_dir);
            c.emit_per_round = true;
            c
        }
        "2b" => {
            let mut c = ExperimentConfig::standard(env, n_seeds, output_dir);
            c.sweep = Some(Sweep {
                param: SweepParam::Beta,
                values: vec![1.0, 2.0, 5.0, 10.0, 20.0],
            });
            c
        }
        "2c" => {
            let mut c = ExperimentConfig::standard(env, n_seeds, output_dir);
            c.sweep = Some(Sweep {
                param: SweepParam::Lambda,
                values: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            });
            c
        }
        "2d" | "2e" => {
            let mut env = env;
            env.popularity = 1.0;
            ExperimentConfig::standard(env, n_seeds, output_dir)
        }
        other => {
            return Err(HarnessError::config(format!(
                "unknown figure panel `{other}` (expected 2a, 2b, 2c, 2d, or 2e)"
            )))
        }
    };
    config.validate()?;
    Ok(config)
}
