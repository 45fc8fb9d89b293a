//! Synthetic fixtures for tests: skill bundles with random, untrained
//! networks, so planner behaviour can be checked without training.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{obs_bounds, EnvParams, TaskId, GOAL_DIM, OBS_DIM};
use crate::nn::{Activation, Mlp};
use crate::rl::{ActorCritic, AgentConfig, Space};
use crate::skills::{DynamicsModel, SkillBundle, SkillPolicy, Standardizer, SuccessModel};

pub fn small_agent_config() -> AgentConfig {
    AgentConfig {
        hidden: vec![16, 16],
        actor_lr: 1e-3,
        critic_lr: 1e-3,
        gamma: 0.98,
        polyak: 0.95,
        normalize_inputs: false,
        action_l2: 0.0,
    }
}

/// A bundle for `skill` whose policy, critic, success model and dynamics
/// are random networks seeded by `seed`. Success probabilities spread
/// around 0.5, so roughly half of all candidates get pruned.
pub fn synthetic_bundle(skill: TaskId, seed: u64) -> SkillBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = Space::for_task(skill);
    let agent =
        ActorCritic::new(space.obs_dim(), GOAL_DIM, space.action_dim(), &small_agent_config(), &mut rng).unwrap();
    let policy = SkillPolicy::new(skill, agent, 0.05).unwrap();
    let d_in = OBS_DIM + GOAL_DIM;
    let mut success_net = Mlp::new(&[d_in, 16, 1], Activation::Relu, Activation::Sigmoid, &mut rng).unwrap();
    success_net.weights_mut()[1].mapv_inplace(|w| 3.0 * w);
    let success = SuccessModel { net: success_net, input: Standardizer::identity(d_in) };
    let dynamics = DynamicsModel {
        net: Mlp::new(&[d_in, 16, OBS_DIM], Activation::Relu, Activation::Tanh, &mut rng).unwrap(),
        input: Standardizer::identity(d_in),
        output: Standardizer {
            mean: ndarray::Array1::from_elem(OBS_DIM, 0.5),
            std: ndarray::Array1::from_elem(OBS_DIM, 0.5),
        },
        bounds: obs_bounds(&EnvParams::default()),
        state_dim: OBS_DIM,
        goal_dim: GOAL_DIM,
    };
    SkillBundle { policy, success, dynamics, max_skill_steps: 25 }
}

/// Synthetic reach, grasp and transfer bundles.
pub fn synthetic_bundles(seed: u64) -> Vec<SkillBundle> {
    [TaskId::Reach, TaskId::Grasp, TaskId::Transfer]
        .iter()
        .enumerate()
        .map(|(i, &id)| synthetic_bundle(id, seed * 31 + i as u64))
        .collect()
}
