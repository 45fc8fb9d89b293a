use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::policy::{run_skill, SkillPolicy};
use super::sampler::SubgoalSampler;
use crate::env::{TaskSpec, GOAL_DIM, OBS_DIM};
use crate::error::{Error, Result};
use crate::rl::stream_rng;

/// One skill execution: where it started, what it was asked for, where it ended.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillSample {
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    pub final_state: Vec<f64>,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkillDataset {
    pub state_dim: usize,
    pub goal_dim: usize,
    pub rows: Vec<SkillSample>,
}

impl SkillDataset {
    pub fn new(state_dim: usize, goal_dim: usize) -> Self {
        SkillDataset { state_dim, goal_dim, rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: SkillSample) -> Result<()> {
        if row.start.len() != self.state_dim || row.final_state.len() != self.state_dim {
            return Err(Error::dims("state", self.state_dim, row.start.len()));
        }
        if row.goal.len() != self.goal_dim {
            return Err(Error::dims("goal", self.goal_dim, row.goal.len()));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn success_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.success).count() as f64 / self.rows.len() as f64
    }

    /// Shuffles with `rng` and splits off `holdout_fraction` of the rows
    /// (at least one when the dataset has two or more rows).
    pub fn split(&self, holdout_fraction: f64, rng: &mut ChaCha8Rng) -> (SkillDataset, SkillDataset) {
        let mut idx: Vec<usize> = (0..self.rows.len()).collect();
        idx.shuffle(rng);
        let mut n_test = (holdout_fraction * self.rows.len() as f64).round() as usize;
        if self.rows.len() >= 2 {
            n_test = n_test.clamp(1, self.rows.len() - 1);
        }
        let pick = |ids: &[usize]| SkillDataset {
            state_dim: self.state_dim,
            goal_dim: self.goal_dim,
            rows: ids.iter().map(|&i| self.rows[i].clone()).collect(),
        };
        (pick(&idx[n_test..]), pick(&idx[..n_test]))
    }

    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = (0..self.state_dim).map(|i| format!("s_{i}")).collect();
        h.extend((0..self.goal_dim).map(|i| format!("g_{i}")));
        h.extend((0..self.state_dim).map(|i| format!("sf_{i}")));
        h.push("success".into());
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(w);
        writer.write_record(self.header())?;
        for row in &self.rows {
            let mut rec: Vec<String> =
                row.start.iter().chain(&row.goal).chain(&row.final_state).map(|v| format!("{v:?}")).collect();
            rec.push(if row.success { "1" } else { "0" }.into());
            writer.write_record(rec)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let header = reader.headers()?.clone();
        let state_dim = header.iter().filter(|h| h.starts_with("s_")).count();
        let goal_dim = header.iter().filter(|h| h.starts_with("g_")).count();
        let mut ds = SkillDataset::new(state_dim, goal_dim);
        if header.len() != 2 * state_dim + goal_dim + 1 || header.iter().next_back() != Some("success") {
            return Err(Error::InvalidInput("unrecognised skill dataset header".into()));
        }
        for rec in reader.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::InvalidInput(format!("bad dataset value: {e}")))?;
            let (s, rest) = vals.split_at(state_dim);
            let (g, rest) = rest.split_at(goal_dim);
            let (sf, flag) = rest.split_at(state_dim);
            ds.push(SkillSample {
                start: s.to_vec(),
                goal: g.to_vec(),
                final_state: sf.to_vec(),
                success: flag[0] != 0.0,
            })?;
        }
        Ok(ds)
    }
}

/// Settings for collecting one skill's execution dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectConfig {
    pub episodes: usize,
    /// Fraction of episodes started from the downstream task's start
    /// distribution (the rest start from the skill's own environment).
    pub task_start_fraction: f64,
    pub max_skill_steps: usize,
}

/// Runs `skill` from `cfg.episodes` start configurations inside `world`
/// and records (start, sub-goal, final state, success) in task space.
///
/// Skill-environment starts use the skill's own goal; task starts use a
/// sub-goal drawn from `sampler`.
pub fn collect_skill_data(
    skill: &SkillPolicy,
    world: &TaskSpec,
    sampler: &SubgoalSampler,
    cfg: &CollectConfig,
    seed: u64,
) -> Result<SkillDataset> {
    let skill_env = TaskSpec::skill_in_world(skill.id, world);
    let mut rng = stream_rng(seed, 0);
    let mut ds = SkillDataset::new(OBS_DIM, GOAL_DIM);
    for _ in 0..cfg.episodes {
        let (start, subgoal) = if rng.random::<f64>() < cfg.task_start_fraction {
            let (state, goal) = world.reset_with(&mut rng);
            let sub = sampler.sample(skill.id, &world.observe(&state), &goal, &mut rng);
            (state, sub)
        } else {
            skill_env.reset_with(&mut rng)
        };
        let rollout = run_skill(skill, &skill_env, &start, &subgoal, cfg.max_skill_steps)?;
        ds.push(SkillSample {
            start: skill_env.observe(&start),
            goal: subgoal.to_vec(),
            final_state: skill_env.observe(&rollout.final_state),
            success: rollout.success,
        })?;
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn toy(n: usize) -> SkillDataset {
        let mut ds = SkillDataset::new(2, 1);
        for i in 0..n {
            let x = i as f64 * 0.1;
            ds.push(SkillSample {
                start: vec![x, -x],
                goal: vec![0.5],
                final_state: vec![x + 0.5, 1.0 / 3.0],
                success: i % 2 == 0,
            })
            .unwrap();
        }
        ds
    }

    #[test]
    fn csv_round_trip() {
        let ds = toy(7);
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("s_0,s_1,g_0,sf_0,sf_1,success\n"));
        assert_eq!(SkillDataset::read_csv(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn split_is_disjoint_and_complete() {
        let ds = toy(100);
        let (train, test) = ds.split(0.1, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(test.len(), 10);
        assert_eq!(train.len(), 90);
        let mut all: Vec<f64> = train.rows.iter().chain(&test.rows).map(|r| r.start[0]).collect();
        all.sort_by(f64::total_cmp);
        let expected: Vec<f64> = ds.rows.iter().map(|r| r.start[0]).collect();
        assert_eq!(all, expected);
    }

    #[test]
    fn wrong_dims_rejected() {
        let mut ds = SkillDataset::new(2, 1);
        let bad = SkillSample { start: vec![0.0], goal: vec![0.0], final_state: vec![0.0, 0.0], success: true };
        assert!(ds.push(bad).is_err());
    }
}
