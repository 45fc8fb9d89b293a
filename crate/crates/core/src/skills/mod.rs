//! Basic skills as planning primitives: adapters, execution datasets, and the
//! learned coarse dynamics and success models.

mod bundle;
mod dataset;
mod models;
mod policy;
mod sampler;

pub use bundle::{
    dataset_path, fit_skill_models, load_bundles, load_models, model_seed, model_world, models_path, position_dims,
    save_models, FitReport, SkillBundle, SkillData,
};
pub use dataset::{collect_skill_data, CollectConfig, SkillDataset, SkillSample};
pub use models::{
    accuracy, mean_error, train_dynamics, train_success, DynamicsModel, DynamicsReport, ModelConfig, Standardizer,
    SuccessModel, SuccessReport,
};
pub use policy::{metadata_path, policy_path, run_skill, SkillMetadata, SkillPolicy, SkillRollout};
pub use sampler::SubgoalSampler;
