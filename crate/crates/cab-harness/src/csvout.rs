//! CSV emission.
//!
//! Three files per suite, UTF-8 with a header row, `.` decimal separator,
//! and shortest round-trip-exact float formatting:
//!
//! - `per_round.csv`: `run_id,seed,policy,sweep_value,round,satisfaction,
//!   cum_satisfaction,matches,cum_matches` (gated by `emit_per_round`);
//! - `aggregate.csv`: one row per (sweep value, policy) with means and
//!   standard errors plus flattened per-arm columns;
//! - `selection.csv`: tall per-arm view `sweep_value,policy,arm,probability,
//!   last10_expected_match_sum`.
//!
//! `sweep_value` is the literal `default` when the suite has no sweep. Files
//! are written only after the whole suite has completed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::runner::SuiteResult;

fn fmt_f64(value: f64) -> String {
    // `Display` for f64 prints the shortest representation that parses back
    // to the same bits.
    format!("{value}")
}

fn sweep_label(value: Option<f64>) -> String {
    match value {
        Some(v) => fmt_f64(v),
        None => "default".to_string(),
    }
}

/// Renders `per_round.csv`.
pub fn per_round_csv(suite: &SuiteResult) -> String {
    let mut out = String::from(
        "run_id,seed,policy,sweep_value,round,satisfaction,cum_satisfaction,matches,cum_matches\n",
    );
    let mut run_id = 0usize;
    for cell in &suite.cells {
        let label = sweep_label(cell.sweep_value);
        for run in &cell.runs {
            let mut cum_sat = 0.0;
            let mut cum_matches = 0.0;
            for record in &run.records {
                cum_sat += record.satisfaction;
                cum_matches += record.matches;
                let _ = writeln!(
                    out,
                    "{run_id},{seed},{policy},{label},{round},{sat},{cum_sat},{matches},{cum_matches}",
                    seed = run.seed,
                    policy = run.policy,
                    round = record.round,
                    sat = fmt_f64(record.satisfaction),
                    cum_sat = fmt_f64(cum_sat),
                    matches = fmt_f64(record.matches),
                    cum_matches = fmt_f64(cum_matches),
                );
            }
            run_id += 1;
        }
    }
    out
}

/// Renders `aggregate.csv`. Per-arm columns are flattened with one-based arm
/// indices.
pub fn aggregate_csv(suite: &SuiteResult) -> String {
    let n_arms = suite.cells.iter().map(|c| c.env.n_arms).max().unwrap_or(0);
    let mut out = String::from(
        "sweep_value,policy,mean_cum_satisfaction,se_cum_satisfaction,mean_cum_matches,\
         se_cum_matches,mean_norm_satisfaction,se_norm_satisfaction,mean_norm_matches,\
         se_norm_matches",
    );
    for arm in 1..=n_arms {
        let _ = write!(out, ",sel_prob_arm{arm}");
    }
    for arm in 1..=n_arms {
        let _ = write!(out, ",last10_match_sum_arm{arm}");
    }
    out.push('\n');

    for record in &suite.aggregates {
        let _ = write!(
            out,
            "{label},{policy},{a},{b},{c},{d},{e},{f},{g},{h}",
            label = sweep_label(record.sweep_value),
            policy = record.policy,
            a = fmt_f64(record.mean_cum_satisfaction),
            b = fmt_f64(record.se_cum_satisfaction),
            c = fmt_f64(record.mean_cum_matches),
            d = fmt_f64(record.se_cum_matches),
            e = fmt_f64(record.mean_norm_satisfaction),
            f = fmt_f64(record.se_norm_satisfaction),
            g = fmt_f64(record.mean_norm_matches),
            h = fmt_f64(record.se_norm_matches),
        );
        for arm in 0..n_arms {
            let p = record.selection_probabilities.get(arm).copied();
            match p {
                Some(p) => {
                    let _ = write!(out, ",{}", fmt_f64(p));
                }
                None => out.push(','),
            }
        }
        for arm in 0..n_arms {
            match record.last10_expected_match_sums.get(arm).copied() {
                Some(s) => {
                    let _ = write!(out, ",{}", fmt_f64(s));
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

/// Renders `selection.csv` (one row per sweep value, policy, and arm).
pub fn selection_csv(suite: &SuiteResult) -> String {
    let mut out = String::from("sweep_value,policy,arm,probability,last10_expected_match_sum\n");
    for record in &suite.aggregates {
        let label = sweep_label(record.sweep_value);
        for (arm, (p, s)) in record
            .selection_probabilities
            .iter()
            .zip(record.last10_expected_match_sums.iter())
            .enumerate()
        {
            let _ = writeln!(
                out,
                "{label},{policy},{arm},{p},{s}",
                policy = record.policy,
                arm = arm + 1,
                p = fmt_f64(*p),
                s = fmt_f64(*s),
            );
        }
    }
    out
}

/// Writes the suite's CSV files under `config.output_dir`.
pub fn write_outputs(suite: &SuiteResult, config: &ExperimentConfig) -> Result<(), HarnessError> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir.clone(), e))?;
    let write = |name: &str, content: String| -> Result<(), HarnessError> {
        let path: &Path = &dir.join(name);
        fs::write(path, content).map_err(|e| HarnessError::io(path.to_path_buf(), e))
    };
    if config.emit_per_round {
        write("per_round.csv", per_round_csv(suite))?;
    }
    write("aggregate.csv", aggregate_csv(suite))?;
    write("selection.csv", selection_csv(suite))?;
    Ok(())
}
