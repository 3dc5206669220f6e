//! Command-line interface.
//!
//! Subcommands: `run` (a TOML config file), `sweep` (a parameter sweep over
//! the default setting or a base config), `figure` (canned panel configs),
//! and `replay` (run policies on an exported instance file). Exit codes:
//! 0 success, 1 configuration error, 2 runtime error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use cab_core::env::read_instance;
use cab_core::policy::{PolicyConfig, PolicyKind};
use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, Sweep};
use crate::csvout::write_outputs;
use crate::error::HarnessError;
use crate::figures::{figure_config, DEFAULT_FIGURE_SEEDS};
use crate::runner::{
    policies_with_references, run_on_instance, run_suite, CellResult, RunOutput, SuiteResult,
};

#[derive(Parser)]
#[command(
    name = "cab",
    about = "Seeded allocation-bandit experiments: runs, sweeps, figure panels, and instance replay",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonFlags {
    /// Base seed; runs use consecutive seeds starting here.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeds (replications).
    #[arg(long)]
    seeds: Option<usize>,
    /// Output directory for the CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel run bound; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
}

impl CommonFlags {
    fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            config.base_seed = seed;
        }
        if let Some(seeds) = self.seeds {
            config.n_seeds = seeds;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        if let Some(jobs) = self.jobs {
            config.jobs = Some(jobs);
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Execute one experiment config file.
    Run {
        /// Path to the TOML configuration.
        config: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Sweep one parameter over a list of values.
    Sweep {
        /// Parameter to sweep: beta, lambda, K, or gamma.
        #[arg(long)]
        param: String,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Optional base config; defaults to the standard six-policy setup.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Reproduce one canned result panel (2a, 2b, 2c, 2d, or 2e).
    Figure {
        panel: String,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Re-run policies on an exported environment instance.
    Replay {
        /// Instance file written by a previous export.
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated policy names; defaults to all six methods.
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<String>>,
        #[command(flatten)]
        flags: CommonFlags,
    },
}

/// Entry point used by both the binary and the CLI tests.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // Clap renders its own usage text; --help and --version are
            // successful exits.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<String, HarnessError> {
    match command {
        Command::Run { config, flags } => {
            let mut config = ExperimentConfig::from_path(&config)?;
            flags.apply(&mut config);
            execute(&config)
        }
        Command::Sweep {
            param,
            values,
            config,
            flags,
        } => {
            let mut config = match config {
                Some(path) => ExperimentConfig::from_path(&path)?,
                None => ExperimentConfig::standard(
                    Default::default(),
                    DEFAULT_FIGURE_SEEDS,
                    PathBuf::from("results"),
                ),
            };
            config.sweep = Some(Sweep {
                param: param.parse()?,
                values,
            });
            flags.apply(&mut config);
            execute(&config)
        }
        Command::Figure { panel, flags } => {
            let mut config = figure_config(
                &panel,
                flags.seeds.unwrap_or(DEFAULT_FIGURE_SEEDS),
                flags
                    .out
                    .clone()
                    .unwrap_or_else(|| PathBuf::from("results")),
            )?;
            flags.apply(&mut config);
            execute(&config)
        }
        Command::Replay {
            instance,
            policies,
            flags,
        } => replay(&instance, policies, &flags),
    }
}

fn execute(config: &ExperimentConfig) -> Result<String, HarnessError> {
    config.validate()?;
    let suite = run_suite(config)?;
    write_outputs(&suite, config)?;
    let runs: usize = suite.cells.iter().map(|c| c.runs.len()).sum();
    Ok(format!(
        "wrote {} (aggregate.csv, selection.csv{}) from {} runs",
        config.output_dir.display(),
        if config.emit_per_round {
            ", per_round.csv"
        } else {
            ""
        },
        runs
    ))
}

fn replay(
    instance_path: &Path,
    policy_names: Option<Vec<String>>,
    flags: &CommonFlags,
) -> Result<String, HarnessError> {
    let instance = read_instance(instance_path)
        .map_err(|e| HarnessError::config(format!("cannot load instance: {e}")))?;
    instance
        .spec
        .validate()
        .map_err(|e| HarnessError::config(e.to_string()))?;

    let kinds: Vec<PolicyKind> = match policy_names {
        Some(names) => names
            .iter()
            .map(|n| {
                n.parse()
                    .map_err(|e: cab_core::CabError| HarnessError::config(e.to_string()))
            })
            .collect::<Result<_, _>>()?,
        None => PolicyKind::NON_ORACLE.to_vec(),
    };
    let base_cfg = PolicyConfig::experimental(instance.spec.dim, instance.spec.n_users);
    let requested: Vec<(PolicyKind, PolicyConfig)> = kinds.iter().map(|k| (*k, base_cfg)).collect();
    let policies = policies_with_references(&requested, &instance.spec);

    let config = ExperimentConfig {
        env: instance.spec,
        policies: policies.clone(),
        n_seeds: flags.seeds.unwrap_or(1),
        base_seed: flags.seed.unwrap_or(0),
        sweep: None,
        output_dir: flags
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("results")),
        emit_per_round: true,
        jobs: flags.jobs,
    };
    config.validate()?;

    let mut runs = Vec::new();
    for seed in config.seeds() {
        for &(kind, cfg) in &policies {
            runs.push(RunOutput {
                policy: kind,
                seed,
                records: run_on_instance(&instance, kind, cfg, seed)?,
            });
        }
    }
    let cell = CellResult {
        sweep_value: None,
        env: instance.spec,
        runs,
    };
    let kinds: Vec<PolicyKind> = policies.iter().map(|(k, _)| *k).collect();
    let aggregates = crate::aggregate::aggregate_cell(&cell, &kinds, &config)?;
    let suite = SuiteResult {
        cells: vec![cell],
        aggregates,
    };
    write_outputs(&suite, &config)?;
    Ok(format!(
        "replayed {} policies on {} for {} seed(s); wrote {}",
        kinds.len(),
        instance_path.display(),
        config.n_seeds,
        config.output_dir.display()
    ))
}
