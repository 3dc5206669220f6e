//! Across-seed aggregation with paired optimal-policy normalization.

use cab_core::policy::PolicyKind;

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::runner::CellResult;

/// Per-(sweep value, policy) summary over seeds.
///
/// Normalized columns divide each seed's cumulative value by the matching
/// reference policy run on the same instance and seed: the satisfaction
/// oracle for satisfaction, the match oracle for matches.
#[derive(Debug, Clone)]
pub struct AggregateRecord {
    pub sweep_value: Option<f64>,
    pub policy: PolicyKind,
    pub mean_cum_satisfaction: f64,
    pub se_cum_satisfaction: f64,
    pub mean_cum_matches: f64,
    pub se_cum_matches: f64,
    pub mean_norm_satisfaction: f64,
    pub se_norm_satisfaction: f64,
    pub mean_norm_matches: f64,
    pub se_norm_matches: f64,
    /// Empirical probability of assigning a user to each arm.
    pub selection_probabilities: Vec<f64>,
    /// Mean over seeds of the last-10-round average per-arm expected-match
    /// sums.
    pub last10_expected_match_sums: Vec<f64>,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Aggregates one cell for the listed policies (reference runs must be
/// present among `cell.runs`).
pub fn aggregate_cell(
    cell: &CellResult,
    kinds: &[PolicyKind],
    config: &ExperimentConfig,
) -> Result<Vec<AggregateRecord>, HarnessError> {
    let seeds: Vec<u64> = config.seeds().collect();
    let n_arms = cell.env.n_arms;
    let horizon = cell.env.horizon;
    let n_users = cell.env.n_users;
    let window = horizon.min(10);

    let reference = |policy: PolicyKind, seed: u64| {
        cell.run(policy, seed).ok_or_else(|| {
            HarnessError::config(format!("missing reference run {policy} for seed {seed}"))
        })
    };

    let mut out = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let mut cum_sat = Vec::with_capacity(seeds.len());
        let mut cum_match = Vec::with_capacity(seeds.len());
        let mut norm_sat = Vec::with_capacity(seeds.len());
        let mut norm_match = Vec::with_capacity(seeds.len());
        let mut sel_prob = vec![0.0; n_arms];
        let mut last10 = vec![0.0; n_arms];

        for &seed in &seeds {
            let run = reference(kind, seed)?;
            let sat_ref = reference(PolicyKind::OracleSatisfaction, seed)?;
            let match_ref = reference(PolicyKind::OracleMatch, seed)?;

            let sat = run.cumulative_satisfaction();
            let matches = run.cumulative_matches();
            cum_sat.push(sat);
            cum_match.push(matches);
            norm_sat.push(sat / sat_ref.cumulative_satisfaction());
            norm_match.push(matches / match_ref.cumulative_matches());

            for record in &run.records {
                for (dst, count) in sel_prob.iter_mut().zip(&record.selection_counts) {
                    *dst += *count as f64;
                }
            }
            for record in &run.records[horizon - window..] {
                for (dst, sum) in last10.iter_mut().zip(&record.per_arm_expected_match_sum) {
                    *dst += sum;
                }
            }
        }

        let total_assignments = (seeds.len() * horizon * n_users) as f64;
        for p in &mut sel_prob {
            *p /= total_assignments;
        }
        for s in &mut last10 {
            *s /= (seeds.len() * window) as f64;
        }

        let (mean_cum_satisfaction, se_cum_satisfaction) = mean_and_se(&cum_sat);
        let (mean_cum_matches, se_cum_matches) = mean_and_se(&cum_match);
        let (mean_norm_satisfaction, se_norm_satisfaction) = mean_and_se(&norm_sat);
        let (mean_norm_matches, se_norm_matches) = mean_and_se(&norm_match);
        out.push(AggregateRecord {
            sweep_value: cell.sweep_value,
            policy: kind,
            mean_cum_satisfaction,
            se_cum_satisfaction,
            mean_cum_matches,
            se_cum_matches,
            mean_norm_satisfaction,
            se_norm_satisfaction,
            mean_norm_matches,
            se_norm_matches,
            selection_probabilities: sel_prob,
            last10_expected_match_sums: last10,
        });
    }
    Ok(out)
}
