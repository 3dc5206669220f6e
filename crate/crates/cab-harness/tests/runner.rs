//! Runner and aggregation behavior on small environments.

use cab_core::env::SyntheticSpec;
use cab_core::policy::{PolicyConfig, PolicyKind};
use cab_harness::config::ExperimentConfig;
use cab_harness::runner::{run_single, run_suite};

fn tiny_env() -> SyntheticSpec {
    SyntheticSpec {
        n_users: 6,
        n_arms: 3,
        dim: 2,
        horizon: 10,
        beta: 1.5,
        ..SyntheticSpec::default()
    }
}

fn tiny_config(policies: Vec<PolicyKind>, n_seeds: usize) -> ExperimentConfig {
    let env = tiny_env();
    let cfg = PolicyConfig::experimental(env.dim, env.n_users);
    let mut config = ExperimentConfig::standard(env, n_seeds, std::env::temp_dir());
    config.policies = policies.into_iter().map(|k| (k, cfg)).collect();
    config
}

#[test]
fn single_round_run_produces_one_record() {
    let env = SyntheticSpec {
        horizon: 1,
        ..tiny_env()
    };
    let cfg = PolicyConfig::experimental(env.dim, env.n_users);
    let records = run_single(&env, PolicyKind::Random, cfg, 3).unwrap();
    assert_eq!(records.len(), 1);
    assert!(records[0].matches >= 0.0 && records[0].matches <= env.n_users as f64);
    assert_eq!(
        records[0].selection_counts.iter().sum::<usize>(),
        env.n_users
    );
}

#[test]
fn runs_are_deterministic_per_seed() {
    let env = tiny_env();
    let cfg = PolicyConfig::experimental(env.dim, env.n_users);
    for kind in PolicyKind::ALL {
        let a = run_single(&env, kind, cfg, 11).unwrap();
        let b = run_single(&env, kind, cfg, 11).unwrap();
        assert_eq!(a, b, "policy {kind} diverged across identical runs");
        let c = run_single(&env, kind, cfg, 12).unwrap();
        assert_ne!(a, c, "policy {kind} ignored the seed");
    }
}

#[test]
fn single_seed_aggregate_equals_the_run_with_zero_se() {
    let config = tiny_config(vec![PolicyKind::CabUcb], 1);
    let suite = run_suite(&config).unwrap();
    let cell = &suite.cells[0];
    let run = cell.run(PolicyKind::CabUcb, config.base_seed).unwrap();

    let agg = suite
        .aggregates
        .iter()
        .find(|a| a.policy == PolicyKind::CabUcb)
        .unwrap();
    assert!((agg.mean_cum_satisfaction - run.cumulative_satisfaction()).abs() < 1e-12);
    assert!((agg.mean_cum_matches - run.cumulative_matches()).abs() < 1e-12);
    assert_eq!(agg.se_cum_satisfaction, 0.0);
    assert_eq!(agg.se_norm_matches, 0.0);
}

#[test]
fn satisfaction_oracle_normalizes_to_exactly_one() {
    let config = tiny_config(vec![PolicyKind::OracleSatisfaction, PolicyKind::Random], 3);
    let suite = run_suite(&config).unwrap();
    let agg = suite
        .aggregates
        .iter()
        .find(|a| a.policy == PolicyKind::OracleSatisfaction)
        .unwrap();
    assert_eq!(agg.mean_norm_satisfaction, 1.0);
    assert_eq!(agg.se_norm_satisfaction, 0.0);

    let match_agg = suite
        .aggregates
        .iter()
        .find(|a| a.policy == PolicyKind::OracleMatch)
        .unwrap();
    assert_eq!(match_agg.mean_norm_matches, 1.0);
}

#[test]
fn sweep_produces_one_aggregate_row_per_cell_and_policy() {
    let mut config = tiny_config(vec![PolicyKind::CabUcb, PolicyKind::Random], 2);
    config.sweep = Some(cab_harness::Sweep {
        param: cab_harness::SweepParam::Beta,
        values: vec![1.0, 2.0, 5.0, 10.0, 20.0],
    });
    let suite = run_suite(&config).unwrap();
    assert_eq!(suite.cells.len(), 5);
    // Two requested policies plus the two references per cell.
    assert_eq!(suite.aggregates.len(), 5 * 4);
    for value in [1.0, 2.0, 5.0, 10.0, 20.0] {
        let rows = suite
            .aggregates
            .iter()
            .filter(|a| a.sweep_value == Some(value))
            .count();
        assert_eq!(rows, 4);
    }
}

#[test]
fn selection_probabilities_sum_to_one() {
    let config = tiny_config(vec![PolicyKind::Fairx, PolicyKind::MaxMatch], 2);
    let suite = run_suite(&config).unwrap();
    for agg in &suite.aggregates {
        let total: f64 = agg.selection_probabilities.iter().sum();
        assert!(
            (total - 1.0).abs() < 1e-12,
            "policy {} selection probabilities sum to {total}",
            agg.policy
        );
    }
}

#[test]
fn cumulative_metrics_are_nondecreasing() {
    let env = tiny_env();
    let cfg = PolicyConfig::experimental(env.dim, env.n_users);
    for kind in [PolicyKind::CabTsEps, PolicyKind::Fairx, PolicyKind::Random] {
        let records = run_single(&env, kind, cfg, 5).unwrap();
        let mut cum_sat = 0.0;
        let mut cum_matches = 0.0;
        for record in &records {
            assert!(record.satisfaction >= 0.0);
            assert!(record.matches >= 0.0);
            let next_sat = cum_sat + record.satisfaction;
            let next_matches = cum_matches + record.matches;
            assert!(next_sat >= cum_sat && next_matches >= cum_matches);
            cum_sat = next_sat;
            cum_matches = next_matches;
            // The per-round satisfaction respects the cap structure.
            assert!(record.satisfaction <= env.n_arms as f64 * env.beta + 1e-12);
        }
    }
}

#[test]
fn theorem_mode_runs_end_to_end() {
    let env = tiny_env();
    let mut cfg = PolicyConfig::experimental(env.dim, env.n_users);
    cfg.use_theorem_constants = true;
    let records = run_single(&env, PolicyKind::CabUcb, cfg, 1).unwrap();
    assert_eq!(records.len(), env.horizon);
}

#[test]
fn jobs_bound_does_not_change_results() {
    let mut config = tiny_config(vec![PolicyKind::CabUcb, PolicyKind::Random], 2);
    let serial = run_suite(&config).unwrap();
    config.jobs = Some(2);
    let parallel = run_suite(&config).unwrap();
    assert_eq!(serial.cells.len(), parallel.cells.len());
    for (a, b) in serial.cells.iter().zip(parallel.cells.iter()) {
        for (ra, rb) in a.runs.iter().zip(b.runs.iter()) {
            assert_eq!(ra.policy, rb.policy);
            assert_eq!(ra.seed, rb.seed);
            assert_eq!(ra.records, rb.records);
        }
    }
}
