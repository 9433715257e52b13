//! Structured-text reports: per-run step logs, per-window activity tables,
//! the per-cell summary, and the per-agent aggregate.
//!
//! Everything is line-delimited, comma-separated text chosen for
//! diff-ability; identical runs produce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{Aggregate, GridResults, RunOutput};
use crate::ingest::Dataset;
use crate::num::Scalar;

/// Summary-header caveat: the benchmark has no held-out split, and cohort
/// embeddings are typically fit on the full dataset, so scores overstate
/// generalization to unseen units.
const SUMMARY_CAVEAT: &str = "# caution: no held-out validation split; feature embeddings are \
typically fit on the complete cohort, so agent scores are optimistic for unseen units";

/// One row of `summary.csv`.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub mode: String,
    pub reward: String,
    pub agent: String,
    pub seed: u64,
    pub horizon: usize,
    pub cum_reward: String,
    pub oracle_reward: String,
    pub regret: String,
    pub normalized: Option<f64>,
}

impl SummaryRow {
    pub fn from_output<S: Scalar>(out: &RunOutput<S>, normalized: Option<f64>) -> SummaryRow {
        SummaryRow {
            mode: out.result.mode.to_string(),
            reward: out.result.reward_kind.to_string(),
            agent: out.result.agent.clone(),
            seed: out.result.seed,
            horizon: out.result.horizon,
            cum_reward: out.result.cum_reward.to_string(),
            oracle_reward: out.result.oracle_reward.to_string(),
            regret: out.result.regret.to_string(),
            normalized,
        }
    }
}

fn create(path: &Path) -> std::io::Result<fs::File> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::File::create(path)
}

/// Filename-safe form of a cell label.
pub fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '-' })
        .collect()
}

/// Base name for one cell's artifacts.
pub fn cell_stem<S: Scalar>(out: &RunOutput<S>) -> String {
    format!(
        "{}_{}_{}_s{}",
        out.result.mode,
        out.result.reward_kind,
        sanitize(&out.result.agent),
        out.result.seed
    )
}

/// Writes one record per step: `t,unit,action,reward,instant_regret,
/// cum_reward,cum_regret`. Line count equals the horizon.
pub fn write_step_log<S: Scalar>(path: &Path, dataset: &Dataset<S>, out: &RunOutput<S>) -> std::io::Result<()> {
    let mut text = String::from("t,unit,action,reward,instant_regret,cum_reward,cum_regret\n");
    for s in &out.steps {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.t,
            dataset.unit_name(s.unit),
            dataset.drug_name(s.action),
            s.reward,
            s.instant_regret,
            s.cum_reward,
            s.cum_regret
        ));
    }
    create(path)?.write_all(text.as_bytes())
}

/// Per-window action counts for activity plots: one row per window with one
/// count column per drug; counts in a full window sum to the window size.
pub fn write_activity<S: Scalar>(
    path: &Path,
    dataset: &Dataset<S>,
    out: &RunOutput<S>,
    window: usize,
) -> std::io::Result<()> {
    assert!(window >= 1);
    let mut text = String::from("window,t_start,t_end");
    for d in dataset.drugs() {
        text.push_str(&format!(",{d}"));
    }
    text.push('\n');
    let k = dataset.n_drugs();
    let mut start = 0;
    let mut widx = 0;
    while start < out.steps.len() {
        let end = (start + window).min(out.steps.len());
        let mut counts = vec![0usize; k];
        for s in &out.steps[start..end] {
            counts[s.action.0] += 1;
        }
        text.push_str(&format!("{widx},{start},{end}"));
        for c in counts {
            text.push_str(&format!(",{c}"));
        }
        text.push('\n');
        start = end;
        widx += 1;
    }
    create(path)?.write_all(text.as_bytes())
}

/// Writes `summary.csv`: caveat header plus one row per cell.
pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> std::io::Result<()> {
    let mut text = String::new();
    text.push_str(SUMMARY_CAVEAT);
    text.push('\n');
    text.push_str("mode,reward,agent,seed,horizon,cum_reward,oracle_reward,regret,normalized_score\n");
    for r in rows {
        let norm = r.normalized.map(|v| v.to_string()).unwrap_or_default();
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.mode, r.reward, r.agent, r.seed, r.horizon, r.cum_reward, r.oracle_reward, r.regret, norm
        ));
    }
    create(path)?.write_all(text.as_bytes())
}

/// Writes `aggregate.csv`: mean ± sd over seeds per (mode, reward, agent).
pub fn write_aggregate(path: &Path, rows: &[Aggregate]) -> std::io::Result<()> {
    let mut text = String::from("mode,reward,agent,n_seeds,mean_regret,sd_regret,mean_normalized,sd_normalized\n");
    for a in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            a.mode, a.reward, a.agent, a.n_seeds, a.mean_regret, a.sd_regret, a.mean_normalized, a.sd_normalized
        ));
    }
    create(path)?.write_all(text.as_bytes())
}

/// A grid cell that failed, for caller-side error listings.
pub struct FailedCell {
    pub label: String,
    pub error: String,
}

/// Writes all grid artifacts into `dir`: per-run step logs and activity
/// tables, `summary.csv`, and `aggregate.csv`. Returns the failed cells.
pub fn emit_reports<S: Scalar>(
    dir: &Path,
    dataset: &Dataset<S>,
    results: &GridResults<S>,
    window: usize,
) -> std::io::Result<Vec<FailedCell>> {
    fs::create_dir_all(dir)?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for cell in &results.cells {
        match &cell.outcome {
            Ok(out) => {
                let stem = cell_stem(out);
                write_step_log(&dir.join(format!("steps_{stem}.csv")), dataset, out)?;
                write_activity(&dir.join(format!("activity_{stem}.csv")), dataset, out, window)?;
                rows.push(SummaryRow::from_output(out, cell.normalized_score));
            }
            Err(err) => failures.push(FailedCell {
                label: format!(
                    "{}/{}/{}/s{}",
                    cell.cell.mode,
                    cell.cell.reward,
                    cell.cell.agent.display_string(),
                    cell.cell.seed
                ),
                error: err.to_string(),
            }),
        }
    }
    write_summary(&dir.join("summary.csv"), &rows)?;
    write_aggregate(&dir.join("aggregate.csv"), &results.aggregate())?;
    Ok(failures)
}

/// Convenience for `run`: emits one run's artifacts (step log, activity,
/// single-row summary) and returns the paths written.
pub fn emit_single_run<S: Scalar>(
    dir: &Path,
    dataset: &Dataset<S>,
    out: &RunOutput<S>,
    window: usize,
) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let stem = cell_stem(out);
    let steps = dir.join(format!("steps_{stem}.csv"));
    let activity = dir.join(format!("activity_{stem}.csv"));
    let summary = dir.join("summary.csv");
    write_step_log(&steps, dataset, out)?;
    write_activity(&activity, dataset, out, window)?;
    write_summary(&summary, &[SummaryRow::from_output(out, None)])?;
    Ok(vec![steps, activity, summary])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::agents::AgentSpec;
    use crate::guidelines::parse_rules;
    use crate::ingest::synth::{synthesize_dataset, SynthSpec};
    use crate::rewards::RewardKind;
    use crate::rng::RngSeed;
    use crate::runner::{run_single, RunCell};
    use crate::types::ContextMode;

    fn tmpdir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("banditbench-report-{}-{name}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn sample_run(horizon: usize, agent: &str, seed: u64) -> (Arc<Dataset<f64>>, RunOutput<f64>) {
        let rules = parse_rules("RULE r WHEN MUT:BRAF_V600E THEN drug_01 PRIORITY 1\nDEFAULT drug_00\n").unwrap();
        let (ds, _) = synthesize_dataset::<f64>(&SynthSpec::new(100, 7, 4), Some(&rules), RngSeed(1)).unwrap();
        let ds = Arc::new(ds);
        let bound = Arc::new(rules.bind(&ds).unwrap());
        let cell = RunCell {
            mode: ContextMode::Guideline,
            reward: RewardKind::Rank,
            agent: AgentSpec::parse(agent).unwrap(),
            seed,
            horizon: Some(horizon),
        };
        let out = run_single(&ds, Some(&bound), &cell).unwrap();
        (ds, out)
    }

    #[test]
    fn step_log_line_count_equals_horizon() {
        let (ds, out) = sample_run(73, "uniform", 4);
        let dir = tmpdir("steps");
        let path = dir.join("steps.csv");
        write_step_log(&path, &ds, &out).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 73 + 1, "header + one line per step");
    }

    #[test]
    fn activity_window_counts_sum_to_window_size() {
        let (ds, out) = sample_run(100, "uniform", 5);
        let dir = tmpdir("activity");
        let path = dir.join("activity.csv");
        write_activity(&path, &ds, &out, 25).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 4, "header + 4 windows");
        for row in &lines[1..] {
            let cells: Vec<&str> = row.split(',').collect();
            let total: usize = cells[3..].iter().map(|c| c.parse::<usize>().unwrap()).sum();
            assert_eq!(total, 25);
        }
    }

    #[test]
    fn guideline_activity_stable_across_windows() {
        let (ds, out) = sample_run(1000, "guideline", 6);
        // Per-window arm frequencies stay near the overall frequency: the
        // agent never learns, only unit shuffling moves the counts.
        let window = 100;
        let k = ds.n_drugs();
        let mut overall = vec![0.0; k];
        for s in &out.steps {
            overall[s.action.0] += 1.0;
        }
        overall.iter_mut().for_each(|c| *c /= out.steps.len() as f64);
        let mut start = 0;
        while start < out.steps.len() {
            let end = start + window;
            let mut counts = vec![0.0; k];
            for s in &out.steps[start..end] {
                counts[s.action.0] += 1.0;
            }
            for arm in 0..k {
                let freq = counts[arm] / window as f64;
                assert!(
                    (freq - overall[arm]).abs() < 0.2,
                    "window {start}: arm {arm} freq {freq} vs overall {}",
                    overall[arm]
                );
            }
            start = end;
        }
    }

    #[test]
    fn summary_contains_caveat_then_rows() {
        let (_, out) = sample_run(10, "uniform", 7);
        let dir = tmpdir("summary");
        let path = dir.join("summary.csv");
        write_summary(&path, &[SummaryRow::from_output(&out, Some(0.25))]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with('#'), "caveat first");
        assert!(lines.next().unwrap().starts_with("mode,reward,agent"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("guideline,rank,uniform,7,10,"));
        assert!(row.ends_with(",0.25"));
    }

    #[test]
    fn sanitize_keeps_filenames_safe() {
        assert_eq!(sanitize("dropout:keep=0.9"), "dropout-keep-0-9");
        assert_eq!(sanitize("linear"), "linear");
    }
}
