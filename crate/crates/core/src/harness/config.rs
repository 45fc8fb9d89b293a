use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::PasConfig;
use crate::env::{EnvParams, TaskId, TaskSpec};
use crate::error::{Error, Result};
use crate::lookahead::SearchConfig;
use crate::rl::TrainConfig;
use crate::skills::ModelConfig;

/// Version of the experiment file layout; bumped on incompatible changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Herlase,
    Her,
    Pas,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Herlase => "herlase",
            Method::Her => "her",
            Method::Pas => "pas",
        }
    }

    pub fn uses_skills(self) -> bool {
        self != Method::Her
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "herlase" => Ok(Method::Herlase),
            "her" => Ok(Method::Her),
            "pas" => Ok(Method::Pas),
            other => Err(Error::Config(format!("unknown method `{other}` (expected herlase, her or pas)"))),
        }
    }
}

/// K1 = {reach, grasp, transfer}, K2 = {grasp, transfer}, K3 = {reach, transfer}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkillSet {
    K1,
    K2,
    K3,
}

impl SkillSet {
    pub fn skills(self) -> Vec<TaskId> {
        match self {
            SkillSet::K1 => vec![TaskId::Reach, TaskId::Grasp, TaskId::Transfer],
            SkillSet::K2 => vec![TaskId::Grasp, TaskId::Transfer],
            SkillSet::K3 => vec![TaskId::Reach, TaskId::Transfer],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SkillSet::K1 => "k1",
            SkillSet::K2 => "k2",
            SkillSet::K3 => "k3",
        }
    }
}

impl fmt::Display for SkillSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SkillSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "k1" => Ok(SkillSet::K1),
            "k2" => Ok(SkillSet::K2),
            "k3" => Ok(SkillSet::K3),
            other => Err(Error::Config(format!("unknown skill set `{other}` (expected k1, k2 or k3)"))),
        }
    }
}

/// How the basic skills are trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkillTrainingConfig {
    /// Seed for skill training and model fitting.
    pub seed: u64,
    pub epochs: usize,
    /// Stop a skill early once its eval success reaches this value.
    pub stop_at_success: Option<f64>,
}

impl Default for SkillTrainingConfig {
    fn default() -> Self {
        SkillTrainingConfig { seed: 1, epochs: 50, stop_at_success: Some(1.0) }
    }
}

/// One experiment: a task, a method, the skills it may use, and every
/// hyper-parameter of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub task: TaskId,
    pub method: Method,
    pub skill_set: SkillSet,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    pub output_dir: PathBuf,
    pub skills: SkillTrainingConfig,
    pub env: EnvParams,
    pub train: TrainConfig,
    pub search: SearchConfig,
    pub pas: PasConfig,
    pub models: ModelConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            task: TaskId::PickAndMove,
            method: Method::Herlase,
            skill_set: SkillSet::K1,
            seeds: vec![1, 2, 3],
            epochs: 150,
            output_dir: PathBuf::from("runs"),
            skills: SkillTrainingConfig::default(),
            env: EnvParams::default(),
            train: TrainConfig::default(),
            search: SearchConfig::default(),
            pas: PasConfig::default(),
            models: ModelConfig::default(),
        }
    }
}

/// The part of a configuration that must agree for runs to be comparable.
/// Method, task, skill set, seeds, paths and the method-specific search and
/// PAS settings are deliberately left out.
#[derive(Serialize)]
struct Protocol<'a> {
    schema_version: u32,
    epochs: usize,
    skills: &'a SkillTrainingConfig,
    env: &'a EnvParams,
    train: &'a TrainConfig,
    models: &'a ModelConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.epochs == 0 || self.skills.epochs == 0 {
            return Err(Error::Config("epoch counts must be positive".into()));
        }
        self.train.validate()?;
        self.search.validate()
    }

    /// SHA-256 over the comparable protocol, hex encoded.
    pub fn config_hash(&self) -> String {
        let protocol = Protocol {
            schema_version: self.schema_version,
            epochs: self.epochs,
            skills: &self.skills,
            env: &self.env,
            train: &self.train,
            models: &self.models,
        };
        let text = toml::to_string(&protocol).expect("protocol serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn task_spec(&self) -> TaskSpec {
        TaskSpec::new(self.task, self.env.clone())
    }

    pub fn skills_dir(&self) -> PathBuf {
        self.output_dir.join("skills")
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.output_dir.join("runs")
    }

    /// The search settings actually in effect for this method (none for the
    /// baselines, recorded as 0 × 0).
    pub fn search_shape(&self) -> (usize, usize) {
        match self.method {
            Method::Herlase => (self.search.branching, self.search.height),
            _ => (0, 0),
        }
    }
}
