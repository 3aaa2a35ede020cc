//! Low-level episode execution: team controllers and transition collection.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::buffer::{RolloutBuffer, Trajectory, Transition};
use super::model::{Framework, LowLevelModel, ModelStep};
use super::TrainError;
use crate::env::{CombatEnv, LowLevelAction, Outcome, RewardMode, StepResult, ACTION_ARITIES};
use crate::scripted::{ScriptLevel, ScriptedPilot};
use crate::sim::{AircraftId, Team};

/// Who flies a team during a low-level episode.
#[derive(Debug, Clone)]
pub enum TeamPolicy {
    Scripted(ScriptLevel),
    Model { model: Arc<LowLevelModel>, greedy: bool },
    /// Uniform random over every action head.
    Random,
}

/// Opponents of a training run: one policy drawn uniformly per episode.
#[derive(Debug, Clone)]
pub struct OpponentPolicy {
    pub pool: Vec<TeamPolicy>,
}

impl OpponentPolicy {
    pub fn single(p: TeamPolicy) -> Self {
        Self { pool: vec![p] }
    }

    pub fn pick(&self, rng: &mut impl Rng) -> &TeamPolicy {
        &self.pool[rng.gen_range(0..self.pool.len())]
    }

    /// Checksums of every frozen model in the pool.
    pub fn frozen_checksums(&self) -> Vec<String> {
        self.pool
            .iter()
            .filter_map(|p| match p {
                TeamPolicy::Model { model, .. } => Some(model.checksum()),
                _ => None,
            })
            .collect()
    }
}

pub fn random_action(rng: &mut impl Rng) -> LowLevelAction {
    let idx: Vec<usize> = ACTION_ARITIES.iter().map(|&n| rng.gen_range(0..n)).collect();
    LowLevelAction::from_indices(&idx).expect("indices in range")
}

/// Per-episode state of a team controller.
pub struct TeamRunner<'a> {
    policy: &'a TeamPolicy,
    team: Team,
    pilots: BTreeMap<AircraftId, ScriptedPilot>,
    rng: ChaCha8Rng,
}

impl<'a> TeamRunner<'a> {
    pub fn new(policy: &'a TeamPolicy, team: Team, env: &CombatEnv, seed: u64) -> Self {
        let pilots = match policy {
            TeamPolicy::Scripted(level) => env
                .world
                .aircraft
                .iter()
                .filter(|a| a.team == team)
                .map(|a| (a.id, ScriptedPilot::new(*level, super::mix_seed(seed, a.id as u64, 1))))
                .collect(),
            _ => BTreeMap::new(),
        };
        Self { policy, team, pilots, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Actions for the alive members of the team listed in `subset` (all
    /// when `None`).
    pub fn act(&mut self, env: &CombatEnv, subset: Option<&[AircraftId]>) -> Result<ModelStep, TrainError> {
        let acting: Vec<AircraftId> = env
            .world
            .alive_ids(self.team)
            .filter(|id| subset.is_none_or(|s| s.contains(id)))
            .collect();
        match self.policy {
            TeamPolicy::Model { model, greedy } => model.act(env, self.team, subset, *greedy, &mut self.rng),
            TeamPolicy::Scripted(_) => {
                let cfg = &env.config.script;
                let actions = acting
                    .iter()
                    .map(|&id| (id, self.pilots.get_mut(&id).expect("pilot per aircraft").act(&env.world, id, cfg)))
                    .collect();
                Ok(ModelStep { actions, ..Default::default() })
            }
            TeamPolicy::Random => {
                let actions = acting.iter().map(|&id| (id, random_action(&mut self.rng))).collect();
                Ok(ModelStep { actions, ..Default::default() })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub outcome: Outcome,
    pub steps: u32,
    /// Sum of all agent rewards over the episode.
    pub reward: f64,
}

/// Plays one episode to termination. When `learner` is given its
/// decisions are recorded into `buffer` (one trajectory per agent, or one
/// per team for the centralized framework). `observe` sees every step.
pub fn run_episode(
    env: &mut CombatEnv,
    agents: &TeamPolicy,
    opponents: &TeamPolicy,
    mode: RewardMode,
    seed: u64,
    mut buffer: Option<&mut RolloutBuffer>,
    observe: &mut dyn FnMut(&CombatEnv, &StepResult),
) -> Result<EpisodeSummary, TrainError> {
    let mut ours = TeamRunner::new(agents, Team::Agent, env, super::mix_seed(seed, 1, 0));
    let mut theirs = TeamRunner::new(opponents, Team::Opponent, env, super::mix_seed(seed, 2, 0));
    let learner = match (agents, buffer.is_some()) {
        (TeamPolicy::Model { model, .. }, true) => Some(model.clone()),
        (_, true) => return Err(TrainError::Config("only a model team can be trained".into())),
        _ => None,
    };
    let mut open: BTreeMap<AircraftId, Trajectory> = BTreeMap::new();
    let mut total = 0.0;
    while !env.is_done() {
        let a = ours.act(env, None)?;
        let o = theirs.act(env, None)?;
        let actions: BTreeMap<AircraftId, LowLevelAction> = a.actions.iter().chain(&o.actions).copied().collect();
        let mut pending = Vec::new();
        if let Some(m) = &learner {
            for d in &a.decisions {
                let ci = m.critic_input(env, Team::Agent, d, &a.observations, &actions);
                let v = m.value(d, &ci)?;
                pending.push((d.clone(), ci, v));
            }
        }
        let all: Vec<(AircraftId, LowLevelAction)> = actions.into_iter().collect();
        let res = env.step(&all, mode)?;
        total += res.rewards.values().sum::<f64>();
        observe(env, &res);
        let centralized = learner.as_ref().is_some_and(|m| m.framework == Framework::Ctce);
        for (d, ci, v) in pending {
            let (reward, done) = if centralized {
                (res.rewards.values().sum(), res.outcome.is_terminal())
            } else {
                (res.rewards[&d.agent], res.dones[&d.agent])
            };
            let t = Transition {
                net: d.net,
                instance: d.instance,
                obs: d.obs,
                hidden: None,
                actions: d.actions,
                mask: d.mask,
                log_prob: d.log_prob,
                value: v,
                critic_input: ci,
                reward,
                done,
                agent: d.agent,
                aircraft: d.aircraft,
                duration: 1,
            };
            // the centralized decision's lead agent can change as agents die
            let key = if centralized { 0 } else { d.agent };
            let traj = open.entry(key).or_default();
            traj.transitions.push(t);
            if done {
                if let Some(b) = buffer.as_deref_mut() {
                    b.push(open.remove(&key).expect("just inserted"));
                }
            }
        }
    }
    Ok(EpisodeSummary { outcome: env.outcome, steps: env.steps, reward: total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{FightVariant, Level, ScenarioConfig};
    use crate::train::model::ModelKind;

    #[test]
    fn collected_trajectories_end_done() {
        let model = Arc::new(LowLevelModel::new(ModelKind::Fight, Framework::Ctde, 2, 2, None, 0).unwrap());
        let cfg = ScenarioConfig { horizon: 30, ..ScenarioConfig::low_level(Level::L3) }.with_seed(3);
        let mut env = CombatEnv::reset(&cfg).unwrap();
        let mut buf = RolloutBuffer::default();
        let agents = TeamPolicy::Model { model, greedy: false };
        let s = run_episode(
            &mut env,
            &agents,
            &TeamPolicy::Scripted(ScriptLevel::L3),
            RewardMode::Fight(FightVariant::Base),
            7,
            Some(&mut buf),
            &mut |_, _| {},
        )
        .unwrap();
        assert!(s.outcome.is_terminal());
        assert!(!buf.is_empty());
        for t in &buf.trajectories {
            assert!(t.transitions.last().unwrap().done);
            assert!(t.transitions[..t.transitions.len() - 1].iter().all(|x| !x.done));
        }
    }

    #[test]
    fn centralized_collects_one_stream() {
        let model = Arc::new(LowLevelModel::new(ModelKind::Standard, Framework::Ctce, 2, 2, None, 0).unwrap());
        let cfg = ScenarioConfig { horizon: 20, ..ScenarioConfig::low_level(Level::L3) }.with_seed(4);
        let mut env = CombatEnv::reset(&cfg).unwrap();
        let mut buf = RolloutBuffer::default();
        run_episode(
            &mut env,
            &TeamPolicy::Model { model, greedy: false },
            &TeamPolicy::Scripted(ScriptLevel::L1),
            RewardMode::Standard,
            1,
            Some(&mut buf),
            &mut |_, _| {},
        )
        .unwrap();
        assert_eq!(buf.trajectories.len(), 1);
        assert_eq!(buf.len() as u32, env.steps);
    }
}
