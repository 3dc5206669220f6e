//! Seeded execution of single runs and whole suites.

use cab_core::env::{
    generate_instance, sample_feedback, score_round, EnvironmentInstance, RoundRecord,
    SyntheticSpec,
};
use cab_core::policy::{PolicyConfig, PolicyKind};
use rayon::prelude::*;

use crate::aggregate::{aggregate_cell, AggregateRecord};
use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::seeding::derive_rng;

/// One policy's trajectory on one instance.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub policy: PolicyKind,
    pub seed: u64,
    pub records: Vec<RoundRecord>,
}

impl RunOutput {
    pub fn cumulative_satisfaction(&self) -> f64 {
        self.records.iter().map(|r| r.satisfaction).sum()
    }

    pub fn cumulative_matches(&self) -> f64 {
        self.records.iter().map(|r| r.matches).sum()
    }
}

/// One sweep cell: the resolved environment and every (seed, policy) run.
#[derive(Debug, Clone)]
pub struct CellResult {
    /// `None` when the suite has no sweep.
    pub sweep_value: Option<f64>,
    pub env: SyntheticSpec,
    pub runs: Vec<RunOutput>,
}

impl CellResult {
    pub fn run(&self, policy: PolicyKind, seed: u64) -> Option<&RunOutput> {
        self.runs
            .iter()
            .find(|r| r.policy == policy && r.seed == seed)
    }
}

/// Everything a suite produced, before and after aggregation.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<AggregateRecord>,
}

/// Runs one policy for one seed: regenerates the instance from the seed and
/// plays the full horizon.
pub fn run_single(
    env: &SyntheticSpec,
    policy: PolicyKind,
    policy_cfg: PolicyConfig,
    seed: u64,
) -> Result<Vec<RoundRecord>, HarnessError> {
    let mut spec = *env;
    spec.seed = seed;
    spec.validate()?;
    let mut instance_rng = derive_rng(seed, "instance");
    let instance = generate_instance(&spec, &mut instance_rng)?;
    run_on_instance(&instance, policy, policy_cfg, seed)
}

/// Plays one policy over a pre-generated instance. The policy and feedback
/// streams are derived from `(seed, role/policy-name)`, so adding or removing
/// other policies never perturbs this run.
pub fn run_on_instance(
    instance: &EnvironmentInstance,
    policy: PolicyKind,
    policy_cfg: PolicyConfig,
    seed: u64,
) -> Result<Vec<RoundRecord>, HarnessError> {
    let spec = &instance.spec;
    let model = spec.model();
    let sat = spec.satisfaction()?;
    let mut cfg = policy_cfg;
    if cfg.use_theorem_constants {
        cfg.apply_theorem_constants(&model, &sat, spec.dim, spec.n_users, spec.horizon)?;
    }

    let mut agent = policy.build(spec.dim, model, sat, cfg, Some(&instance.theta_star))?;
    let mut policy_rng = derive_rng(seed, &format!("policy/{policy}"));
    let mut feedback_rng = derive_rng(seed, &format!("feedback/{policy}"));

    let fail = |round: usize| {
        move |source: cab_core::CabError| HarnessError::RunFailed {
            policy: policy.to_string(),
            round,
            source,
        }
    };

    let mut records = Vec::with_capacity(spec.horizon);
    for round in 1..=spec.horizon {
        let slate = &instance.slates[round - 1];
        let alloc = agent.select(slate, &mut policy_rng).map_err(fail(round))?;
        let feedback = sample_feedback(
            slate,
            &alloc,
            &instance.theta_star,
            &model,
            &mut feedback_rng,
        )
        .map_err(fail(round))?;
        agent
            .update(slate, &alloc, &feedback)
            .map_err(fail(round))?;
        records.push(
            score_round(
                slate,
                &alloc,
                &feedback,
                &instance.theta_star,
                &model,
                &sat,
                round,
            )
            .map_err(fail(round))?,
        );
    }
    Ok(records)
}

/// The policies a suite actually executes per cell: everything requested,
/// plus the two full-information references used for normalization.
pub fn policies_with_references(
    requested: &[(PolicyKind, PolicyConfig)],
    env: &SyntheticSpec,
) -> Vec<(PolicyKind, PolicyConfig)> {
    let mut all = requested.to_vec();
    let reference_cfg = PolicyConfig::experimental(env.dim, env.n_users);
    for oracle in [PolicyKind::OracleSatisfaction, PolicyKind::OracleMatch] {
        if !all.iter().any(|(k, _)| *k == oracle) {
            all.push((oracle, reference_cfg));
        }
    }
    all
}

/// Runs the full grid (sweep values × seeds × policies, plus references),
/// then aggregates with paired normalization. No files are touched; see
/// [`crate::csvout`] for emission.
pub fn run_suite(config: &ExperimentConfig) -> Result<SuiteResult, HarnessError> {
    config.validate()?;

    // Resolve every cell up front.
    struct Cell {
        sweep_value: Option<f64>,
        env: SyntheticSpec,
        policies: Vec<(PolicyKind, PolicyConfig)>,
    }
    let mut cells = Vec::new();
    match &config.sweep {
        Some(sweep) => {
            for &value in &sweep.values {
                let mut env = config.env;
                let mut policies = config.policies.clone();
                sweep.apply(value, &mut env, &mut policies);
                env.validate()?;
                cells.push(Cell {
                    sweep_value: Some(value),
                    env,
                    policies: policies_with_references(&policies, &env),
                });
            }
        }
        None => cells.push(Cell {
            sweep_value: None,
            env: config.env,
            policies: policies_with_references(&config.policies, &config.env),
        }),
    }

    // Flatten into independent tasks; keep indices so results regroup in a
    // deterministic order regardless of the thread schedule.
    let mut tasks = Vec::new();
    for (cell_idx, cell) in cells.iter().enumerate() {
        for seed in config.seeds() {
            for &(kind, cfg) in &cell.policies {
                tasks.push((cell_idx, seed, kind, cfg));
            }
        }
    }

    let execute = || {
        tasks
            .par_iter()
            .map(|&(cell_idx, seed, kind, cfg)| {
                let records = run_single(&cells[cell_idx].env, kind, cfg, seed)?;
                Ok((
                    cell_idx,
                    RunOutput {
                        policy: kind,
                        seed,
                        records,
                    },
                ))
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    };
    let outputs = match config.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| HarnessError::config(format!("cannot build thread pool: {e}")))?
            .install(execute),
        None => execute(),
    }?;

    let mut cell_results: Vec<CellResult> = cells
        .iter()
        .map(|c| CellResult {
            sweep_value: c.sweep_value,
            env: c.env,
            runs: Vec::new(),
        })
        .collect();
    for (cell_idx, output) in outputs {
        cell_results[cell_idx].runs.push(output);
    }

    let mut aggregates = Vec::new();
    for (cell, spec) in cell_results.iter().zip(cells.iter()) {
        let kinds: Vec<PolicyKind> = spec.policies.iter().map(|(k, _)| *k).collect();
        aggregates.extend(aggregate_cell(cell, &kinds, config)?);
    }

    Ok(SuiteResult {
        cells: cell_results,
        aggregates,
    })
}
