use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use herlase::env::TaskId;
use herlase::harness::{
    cmd_fit_models, cmd_report, cmd_train_skills, cmd_train_task, load_records, ExperimentConfig, Method, SkillSet,
};

/// Skill training, model fitting and task training for HERLASE experiments.
#[derive(Parser, Debug)]
#[command(name = "herlase", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Train the task with this single seed instead of the configured list.
    /// Skills always use the `[skills]` seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (skills/ and runs/ live below it).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Tree-search branching factor.
    #[arg(long, global = true)]
    branching: Option<usize>,

    /// Tree-search height.
    #[arg(long, global = true)]
    height: Option<usize>,

    /// herlase, her or pas.
    #[arg(long, global = true)]
    method: Option<Method>,

    /// k1, k2 or k3.
    #[arg(long = "skill-set", global = true)]
    skill_set: Option<SkillSet>,

    /// Task name, e.g. put_inside.
    #[arg(long, global = true)]
    task: Option<TaskId>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the basic skills of the skill set.
    TrainSkills,
    /// Collect skill execution data and fit success and dynamics models.
    FitModels,
    /// Train the task policy with the chosen method, one run per seed.
    TrainTask,
    /// Summarize the run records under <out>/runs.
    Report,
}

impl Cli {
    fn experiment(&self) -> herlase::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(b) = self.branching {
            cfg.search.branching = b;
        }
        if let Some(h) = self.height {
            cfg.search.height = h;
        }
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(k) = self.skill_set {
            cfg.skill_set = k;
        }
        if let Some(t) = self.task {
            cfg.task = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> herlase::Result<()> {
    let cfg = cli.experiment()?;
    match cli.command {
        Command::TrainSkills => {
            for r in cmd_train_skills(&cfg)? {
                println!("{}: success {:.2} after {} epochs", r.skill, r.final_success, r.epochs_run);
            }
        }
        Command::FitModels => {
            for (skill, r) in cmd_fit_models(&cfg)? {
                println!(
                    "{skill}: {} dynamics rows, held-out error {:.4}; {} success rows, held-out accuracy {:.3}",
                    r.dynamics_rows, r.dynamics.heldout_error, r.success_rows, r.success.heldout_accuracy
                );
            }
        }
        Command::TrainTask => {
            for r in cmd_train_task(&cfg)? {
                let last = r.success.last().copied().unwrap_or(0.0);
                println!("{}: {} epochs, final success {last:.2}", r.stem(), r.success.len());
            }
        }
        Command::Report => {
            let report = cmd_report(&load_records(&cfg.runs_dir())?)?;
            let dir = cfg.output_dir.join("report");
            report.write(&dir)?;
            print!("{}", report.summary());
            println!("written to {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
