use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::RunRecord;
use crate::error::{Error, Result};

/// Success levels the epochs-to-threshold table is computed for.
pub const THRESHOLDS: [f64; 2] = [0.5, 0.8];

/// Median; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Number of epochs until the curve first reaches `threshold` (1-based), or
/// `None` if it never does.
pub fn epochs_to_threshold(curve: &[f64], threshold: f64) -> Option<usize> {
    curve.iter().position(|&v| v >= threshold).map(|i| i + 1)
}

/// Median of per-seed epoch counts where "never" ranks above every number.
/// Even counts take the lower middle value.
pub fn median_epochs(values: &[Option<usize>]) -> Option<usize> {
    assert!(!values.is_empty(), "median of nothing");
    let mut v: Vec<usize> = values.iter().map(|e| e.unwrap_or(usize::MAX)).collect();
    v.sort_unstable();
    let m = v[(v.len() - 1) / 2];
    (m != usize::MAX).then_some(m)
}

/// One (task, method, skill set, search shape) group of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub task: String,
    pub method: String,
    pub skill_set: String,
    pub branching: usize,
    pub height: usize,
    pub seeds: Vec<u64>,
    /// Per-epoch median over seeds, truncated to the shortest run.
    pub median_curve: Vec<f64>,
    /// Median over seeds of epochs-to-threshold, for each of [`THRESHOLDS`].
    pub epochs_to: Vec<Option<usize>>,
    /// Median over seeds of the mean seconds per training episode.
    pub seconds_per_episode: f64,
}

impl ReportRow {
    pub fn final_success(&self) -> f64 {
        self.median_curve.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub config_hash: String,
    pub rows: Vec<ReportRow>,
}

#[derive(Serialize)]
struct CurveRow<'a> {
    task: &'a str,
    method: &'a str,
    skill_set: &'a str,
    branching: usize,
    height: usize,
    epoch: usize,
    median_success: f64,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    task: &'a str,
    method: &'a str,
    skill_set: &'a str,
    branching: usize,
    height: usize,
    seeds: usize,
    final_median_success: f64,
    epochs_to_0_5: Option<usize>,
    epochs_to_0_8: Option<usize>,
    seconds_per_episode: f64,
}

impl Report {
    pub fn find(&self, task: &str, method: &str, skill_set: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.task == task && r.method == method && r.skill_set == skill_set)
    }

    /// Writes `curves.csv` (long format) and `summary.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut curves = csv::Writer::from_path(dir.join("curves.csv"))?;
        let mut summary = csv::Writer::from_path(dir.join("summary.csv"))?;
        for r in &self.rows {
            for (epoch, &median_success) in r.median_curve.iter().enumerate() {
                curves.serialize(CurveRow {
                    task: &r.task,
                    method: &r.method,
                    skill_set: &r.skill_set,
                    branching: r.branching,
                    height: r.height,
                    epoch,
                    median_success,
                })?;
            }
            summary.serialize(SummaryRow {
                task: &r.task,
                method: &r.method,
                skill_set: &r.skill_set,
                branching: r.branching,
                height: r.height,
                seeds: r.seeds.len(),
                final_median_success: r.final_success(),
                epochs_to_0_5: r.epochs_to[0],
                epochs_to_0_8: r.epochs_to[1],
                seconds_per_episode: r.seconds_per_episode,
            })?;
        }
        curves.flush()?;
        summary.flush()?;
        Ok(())
    }

    /// Human-readable table.
    pub fn summary(&self) -> String {
        let fmt_epochs = |e: Option<usize>| e.map_or("-".to_string(), |e| e.to_string());
        let mut out = format!(
            "{:<22} {:<8} {:<4} {:>6} {:>6} {:>7} {:>7} {:>10}\n",
            "task", "method", "set", "bxh", "final", "to0.5", "to0.8", "s/episode"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<22} {:<8} {:<4} {:>6} {:>6.2} {:>7} {:>7} {:>10.4}\n",
                r.task,
                r.method,
                r.skill_set,
                format!("{}x{}", r.branching, r.height),
                r.final_success(),
                fmt_epochs(r.epochs_to[0]),
                fmt_epochs(r.epochs_to[1]),
                r.seconds_per_episode
            ));
        }
        out
    }
}

/// Aggregates run records into median curves, epochs-to-threshold and
/// per-episode wall-clock, refusing records from different protocols.
pub fn cmd_report(records: &[RunRecord]) -> Result<Report> {
    let first = records.first().ok_or_else(|| Error::MissingRuns("no run records to report on".into()))?;
    if let Some(odd) = records.iter().find(|r| r.config_hash != first.config_hash) {
        return Err(Error::Config(format!(
            "run records mix config hashes {} and {} ({})",
            first.config_hash,
            odd.config_hash,
            odd.stem()
        )));
    }
    let mut groups: BTreeMap<(String, String, String, usize, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        if r.success.is_empty() {
            return Err(Error::MissingRuns(format!("{} has no completed epochs", r.stem())));
        }
        let key = (r.task.to_string(), r.method.to_string(), r.skill_set.to_string(), r.branching, r.height);
        groups.entry(key).or_default().push(r);
    }
    let rows = groups
        .into_iter()
        .map(|((task, method, skill_set, branching, height), runs)| {
            let len = runs.iter().map(|r| r.success.len()).min().unwrap_or(0);
            let median_curve =
                (0..len).map(|e| median(&runs.iter().map(|r| r.success[e]).collect::<Vec<_>>())).collect();
            let epochs_to = THRESHOLDS
                .iter()
                .map(|&t| median_epochs(&runs.iter().map(|r| epochs_to_threshold(&r.success, t)).collect::<Vec<_>>()))
                .collect();
            let per_run: Vec<f64> = runs
                .iter()
                .map(|r| r.episode_seconds.iter().sum::<f64>() / r.episode_seconds.len().max(1) as f64)
                .collect();
            ReportRow {
                task,
                method,
                skill_set,
                branching,
                height,
                seeds: runs.iter().map(|r| r.seed).collect(),
                median_curve,
                epochs_to,
                seconds_per_episode: median(&per_run),
            }
        })
        .collect();
    Ok(Report { config_hash: first.config_hash.clone(), rows })
}
