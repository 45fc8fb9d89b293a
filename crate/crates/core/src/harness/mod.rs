//! Experiment orchestration: configuration, the skill → model → task
//! pipeline, run records and the comparison report.

mod config;
mod report;

pub use config::{ExperimentConfig, Method, SkillSet, SkillTrainingConfig, SCHEMA_VERSION};
pub use report::{cmd_report, epochs_to_threshold, median, median_epochs, Report, ReportRow, THRESHOLDS};

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{her_baseline_train, pas_train};
use crate::env::{TaskId, TaskSpec};
use crate::error::{Error, Result};
use crate::lookahead::herlase_train;
use crate::rl::{train_skill, RunOptions, TrainingLog};
use crate::skills::{
    dataset_path, fit_skill_models, load_bundles, model_seed, model_world, save_models, FitReport, SkillMetadata,
    SkillPolicy,
};

/// Everything one (config, seed) task-training run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub task: TaskId,
    pub method: Method,
    pub skill_set: SkillSet,
    pub seed: u64,
    pub branching: usize,
    pub height: usize,
    /// Epochs the run was configured for.
    pub epochs: usize,
    pub early_stopped: bool,
    /// Eval success rate per completed epoch.
    pub success: Vec<f64>,
    /// Mean wall-clock seconds per training episode, per epoch.
    pub episode_seconds: Vec<f64>,
    pub artifacts: Vec<PathBuf>,
}

impl RunRecord {
    pub fn stem(&self) -> String {
        run_stem(self.task, self.method, self.skill_set, self.branching, self.height, self.seed)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        toml::from_str(&fs::read_to_string(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// The completed-epoch count agrees with the configuration unless the
    /// run stopped early.
    pub fn is_consistent(&self) -> bool {
        self.success.len() == self.episode_seconds.len()
            && (self.success.len() == self.epochs || (self.early_stopped && self.success.len() < self.epochs))
    }
}

fn run_stem(task: TaskId, method: Method, set: SkillSet, b: usize, h: usize, seed: u64) -> String {
    format!("{task}.{method}.{set}.b{b}h{h}.seed{seed}")
}

/// All `*.record.toml` files in `dir`, sorted by file name.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    if !dir.is_dir() {
        return Err(Error::MissingRuns(format!("no run directory at {}", dir.display())));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".record.toml"))
        .collect();
    paths.sort();
    paths.iter().map(|p| RunRecord::load(p)).collect()
}

/// Final eval success of one trained skill.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillTrainReport {
    pub skill: TaskId,
    pub epochs_run: usize,
    pub final_success: f64,
    /// Highest eval success over all epochs.
    pub best_success: f64,
}

/// Trains the skills of the configured skill set on their own
/// environments and saves policies, metadata and logs.
pub fn cmd_train_skills(cfg: &ExperimentConfig) -> Result<Vec<SkillTrainReport>> {
    cfg.validate()?;
    let dir = cfg.skills_dir();
    fs::create_dir_all(&dir)?;
    let hash = cfg.config_hash();
    let mut reports = Vec::new();
    for id in cfg.skill_set.skills() {
        let spec = TaskSpec::new(id, cfg.env.clone());
        let opts =
            RunOptions { stop_at_success: cfg.skills.stop_at_success, ..RunOptions::new(cfg.skills.epochs, id.name()) };
        let out = train_skill(&spec, &cfg.train, cfg.skills.seed, &opts)?;
        let policy = SkillPolicy::new(id, out.agent, spec.tolerance)?;
        let final_success = out.log.rows.last().map_or(0.0, |r| r.success_rate);
        let meta =
            SkillMetadata { final_success: Some(final_success), config_hash: Some(hash.clone()), ..policy.metadata() };
        policy.save(&dir, &meta)?;
        out.log.write_csv(fs::File::create(dir.join(format!("{id}.log.csv")))?)?;
        log::info!("skill {id}: success {final_success:.2} after {} epochs", out.log.rows.len());
        let best_success = out.log.rows.iter().map(|r| r.success_rate).fold(0.0, f64::max);
        reports.push(SkillTrainReport { skill: id, epochs_run: out.log.rows.len(), final_success, best_success });
    }
    Ok(reports)
}

/// Collects execution data for each skill in the task's planning world,
/// fits the success and dynamics models, and writes datasets, checkpoints
/// and a quality report per skill.
pub fn cmd_fit_models(cfg: &ExperimentConfig) -> Result<Vec<(TaskId, FitReport)>> {
    cfg.validate()?;
    let dir = cfg.skills_dir();
    let world_id = model_world(cfg.task);
    let world = TaskSpec::new(world_id, cfg.env.clone());
    let mut reports = Vec::new();
    for id in cfg.skill_set.skills() {
        let (policy, _) = SkillPolicy::load(&dir, id, &cfg.train.agent_config())?;
        let seed = model_seed(cfg.skills.seed, id, world_id);
        let (success, dynamics, report, data) =
            fit_skill_models(&policy, &world, &cfg.search.sampler, &cfg.models, seed)?;
        save_models(&dir, id, world_id, &success, &dynamics)?;
        data.dynamics.write_csv(fs::File::create(dataset_path(&dir, id, world_id, "dynamics"))?)?;
        data.success.write_csv(fs::File::create(dataset_path(&dir, id, world_id, "success"))?)?;
        let text = toml::to_string(&report).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(dir.join(format!("{id}.{world_id}.fit.toml")), text)?;
        log::info!(
            "models {id}/{world_id}: dynamics error {:.4}, success accuracy {:.3}",
            report.dynamics.heldout_error,
            report.success.heldout_accuracy
        );
        reports.push((id, report));
    }
    Ok(reports)
}

/// Trains the task with the configured method once per seed and writes a
/// log CSV, a checkpoint and a [`RunRecord`] for each run.
pub fn cmd_train_task(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let spec = cfg.task_spec();
    // Skill artifacts are checked before any training starts.
    let bundles = if cfg.method.uses_skills() {
        load_bundles(
            &cfg.skills_dir(),
            &cfg.skill_set.skills(),
            cfg.task,
            &cfg.train.agent_config(),
            cfg.models.max_skill_steps,
        )?
    } else {
        Vec::new()
    };
    let runs = cfg.runs_dir();
    fs::create_dir_all(&runs)?;
    let (branching, height) = cfg.search_shape();
    let mut records = Vec::new();
    for &seed in &cfg.seeds {
        let opts = RunOptions::new(cfg.epochs, cfg.method.name());
        let stem = run_stem(cfg.task, cfg.method, cfg.skill_set, branching, height, seed);
        let log_path = runs.join(format!("{stem}.log.csv"));
        let ckpt_path = runs.join(format!("{stem}.ckpt"));
        let (log, episode_seconds, early_stopped): (TrainingLog, Vec<f64>, bool) = match cfg.method {
            Method::Her => {
                let out = her_baseline_train(&spec, &cfg.train, seed, &opts)?;
                out.agent.save(&ckpt_path)?;
                (out.log, out.episode_seconds, out.early_stopped)
            }
            Method::Herlase => {
                let out = herlase_train(&spec, &bundles, &cfg.train, &cfg.search, seed, &opts)?;
                out.agent.save(&ckpt_path)?;
                (out.log, out.episode_seconds, out.early_stopped)
            }
            Method::Pas => {
                let out = pas_train(&spec, &bundles, &cfg.train, &cfg.pas, seed, &opts)?;
                out.agent.to_checkpoint().save(&ckpt_path)?;
                (out.log, out.episode_seconds, out.early_stopped)
            }
        };
        log.write_csv(fs::File::create(&log_path)?)?;
        let record = RunRecord {
            config_hash: cfg.config_hash(),
            task: cfg.task,
            method: cfg.method,
            skill_set: cfg.skill_set,
            seed,
            branching,
            height,
            epochs: cfg.epochs,
            early_stopped,
            success: log.success_curve(),
            episode_seconds,
            artifacts: vec![log_path, ckpt_path],
        };
        record.save(&runs.join(format!("{stem}.record.toml")))?;
        log::info!("{stem}: final success {:.2}", record.success.last().copied().unwrap_or(0.0));
        records.push(record);
    }
    Ok(records)
}
