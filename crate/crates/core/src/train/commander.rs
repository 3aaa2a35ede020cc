//! Commander over frozen fight and escape options.
//!
//! Options are synchronized: every alive agent gets a command, then all
//! aircraft fly their low-level policies until any agent's option
//! terminates. The commander reward of a decision sums (undiscounted) every
//! event inside the option; the decision is discounted by `gamma^steps`.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{RolloutBuffer, Trajectory, Transition};
use super::model::{LowLevelModel, ModelKind};
use super::ppo::ppo_update;
use super::rollout::EpisodeSummary;
use super::{io_err, mix_seed, MetricsLog, MetricsRecord, PpoConfig, TrainError};
use crate::env::reward::{option_terminated, reward_commander};
use crate::env::{CombatEnv, LowLevelAction, ObsLayout, Outcome, RewardMode, ScenarioConfig, StepEvent, StepResult};
use crate::nn::{checkpoint, sample_action, Body, NetworkConfig, NnError, PolicyKind, PolicyNet};
use crate::sim::{AircraftId, Team};

/// Commander ablation switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommanderVariant {
    /// Opponents sensed per agent (2 or 3).
    pub sensed: usize,
    /// Fight commands name the opponent; otherwise fight means "nearest".
    pub choose_target: bool,
    /// Include the action-assessment reward.
    pub assess: bool,
    /// One network for the whole team instead of a shared per-agent one.
    pub global: bool,
}

impl Default for CommanderVariant {
    fn default() -> Self {
        Self { sensed: 2, choose_target: true, assess: true, global: false }
    }
}

impl CommanderVariant {
    pub fn options(&self) -> usize {
        if self.choose_target {
            1 + self.sensed
        } else {
            2
        }
    }

    pub fn label(&self) -> String {
        format!(
            "{}-N{}-{}-{}",
            if self.global { "Glob" } else { "Shared" },
            self.sensed,
            if self.choose_target { "Opt" } else { "noOpt" },
            if self.assess { "Assess" } else { "noAssess" }
        )
    }

    /// Inverse of [`CommanderVariant::label`].
    pub fn from_label(label: &str) -> Option<Self> {
        Self::grid().into_iter().find(|v| v.label().eq_ignore_ascii_case(label))
    }

    /// All sixteen combinations.
    pub fn grid() -> Vec<Self> {
        let mut out = Vec::new();
        for global in [false, true] {
            for sensed in [2, 3] {
                for choose_target in [true, false] {
                    for assess in [true, false] {
                        out.push(Self { sensed, choose_target, assess, global });
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(1..=3).contains(&self.sensed) {
            return Err(TrainError::Config(format!("sensed opponents must be 1..=3, got {}", self.sensed)));
        }
        Ok(())
    }
}

/// A low-level option.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptionChoice {
    Escape,
    /// Fight the given opponent, or the nearest one when `None`.
    Fight(Option<AircraftId>),
}

/// Maps commander action `a_c` of `agent` onto an option. Returns the
/// sensed opponents (nearest first) and, for fight commands, the rank of the
/// engaged opponent (0 = nearest). Commands naming an opponent that is not
/// sensed fall back to the nearest.
pub fn decode_command(
    env: &CombatEnv,
    agent: AircraftId,
    a_c: usize,
    variant: &CommanderVariant,
) -> (OptionChoice, Vec<AircraftId>, Option<usize>) {
    let team = env.world.get(agent).team;
    let mut sensed = env.world.nearest(agent, team.enemy());
    sensed.truncate(variant.sensed);
    if a_c == 0 {
        return (OptionChoice::Escape, sensed, None);
    }
    if !variant.choose_target {
        return (OptionChoice::Fight(None), sensed, Some(0));
    }
    match sensed.get(a_c - 1) {
        Some(&o) => (OptionChoice::Fight(Some(o)), sensed, Some(a_c - 1)),
        None => (OptionChoice::Fight(None), sensed, Some(0)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CommanderMeta {
    variant: CommanderVariant,
    team_size: usize,
    opponents: usize,
}

#[derive(Debug, Clone)]
pub struct CommanderModel {
    pub variant: CommanderVariant,
    pub team_size: usize,
    pub opponents: usize,
    pub net: PolicyNet<f32>,
}

impl CommanderModel {
    pub fn obs_width(variant: &CommanderVariant) -> usize {
        ObsLayout::Commander { opponents: variant.sensed }.len()
    }

    pub fn new(variant: CommanderVariant, team_size: usize, opponents: usize, body: Option<Body>, seed: u64) -> Result<Self, TrainError> {
        variant.validate()?;
        let p = Self::obs_width(&variant);
        let k = variant.options();
        let mut config = if variant.global {
            let blocks = ObsLayout::Commander { opponents: variant.sensed }.blocks();
            NetworkConfig::central(PolicyKind::Commander, &blocks, team_size, &[k], team_size * p + opponents * 2)
                .with_body(Body::Recurrent)
        } else {
            NetworkConfig::commander(variant.sensed, k, p + (team_size - 1) * (p + k) + opponents * 2)
        };
        if let Some(b) = body {
            config = config.with_body(b);
        }
        Ok(Self { variant, team_size, opponents, net: PolicyNet::new(config.with_seed(seed))? })
    }

    pub fn checksum(&self) -> String {
        self.net.store.checksum()
    }

    pub fn save(&self, path: &Path, with_optimizer: bool) -> Result<(), TrainError> {
        let meta = CommanderMeta { variant: self.variant, team_size: self.team_size, opponents: self.opponents };
        let mut m = BTreeMap::new();
        m.insert("commander".to_string(), serde_json::to_string(&meta).expect("serializable"));
        checkpoint::save(&self.net, &m, with_optimizer, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let (net, header) = checkpoint::load::<f32>(path)?;
        let meta: CommanderMeta = header
            .metadata
            .get("commander")
            .and_then(|s| serde_json::from_str(s).ok())
            .ok_or_else(|| TrainError::Nn(NnError::Checkpoint("not a commander checkpoint".into())))?;
        Ok(Self { variant: meta.variant, team_size: meta.team_size, opponents: meta.opponents, net })
    }
}

/// How agents are commanded.
#[derive(Debug, Clone, Copy)]
pub enum AgentCommander<'a> {
    Model { model: &'a CommanderModel, greedy: bool },
    /// Every agent always fights its nearest opponent.
    AlwaysFight,
    /// Uniform random option per agent.
    Random { variant: CommanderVariant },
}

/// Counts of issued commands.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandStats {
    pub fight: u64,
    pub escape: u64,
    /// Fight commands by rank of the engaged opponent (nearest first).
    pub target_rank: [u64; 3],
    pub decisions: u64,
}

struct PendingDecision {
    agents: Vec<AircraftId>,
    commands: Vec<(AircraftId, usize, Vec<AircraftId>)>,
    obs: Vec<f32>,
    hidden: Option<Vec<f32>>,
    actions: Vec<usize>,
    mask: Vec<bool>,
    log_prob: f64,
    value: f64,
    critic_input: Vec<f32>,
}

fn one_hot(k: usize, n: usize) -> impl Iterator<Item = f32> {
    (0..n).map(move |i| if i == k { 1.0 } else { 0.0 })
}

/// Runs one hierarchical episode. Opponents fight with probability
/// `env.config.opponent_fight_prob` at each decision, otherwise escape.
/// With `buffer`, the commander's decisions are recorded for training.
#[allow(clippy::too_many_arguments)]
pub fn run_hier_episode(
    env: &mut CombatEnv,
    commander: AgentCommander,
    fight: &LowLevelModel,
    escape: &LowLevelModel,
    low_greedy: bool,
    seed: u64,
    mut buffer: Option<&mut RolloutBuffer>,
    stats: &mut CommandStats,
    observe: &mut dyn FnMut(&CombatEnv, &StepResult),
) -> Result<EpisodeSummary, TrainError> {
    if fight.kind != ModelKind::Fight || escape.kind != ModelKind::Escape {
        return Err(TrainError::Config("options need a fight and an escape model".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut low_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 5, 0));
    let model = match commander {
        AgentCommander::Model { model, .. } => Some(model),
        _ => None,
    };
    if buffer.is_some() && model.is_none() {
        return Err(TrainError::Config("only a commander model can be trained".into()));
    }
    let th = env.config.thresholds;
    let k = env.config.rewards;
    let p_o = env.config.opponent_fight_prob;
    let team_ids = env.agent_ids();
    let enemy_ids = env.opponent_ids();
    let mut hidden: BTreeMap<usize, Vec<f32>> = BTreeMap::new();
    let mut open: BTreeMap<usize, Trajectory> = BTreeMap::new();
    let mut total = 0.0;

    while !env.is_done() {
        let alive = env.alive_agents();
        // commander decisions
        let mut pending: Vec<PendingDecision> = Vec::new();
        let mut commands: BTreeMap<AircraftId, usize> = BTreeMap::new();
        match commander {
            AgentCommander::Model { model, greedy } => {
                let v = model.variant;
                let p = CommanderModel::obs_width(&v);
                if v.global {
                    let mut obs = Vec::with_capacity(model.team_size * p);
                    let mut mask = Vec::with_capacity(model.team_size);
                    for slot in 0..model.team_size {
                        match team_ids.get(slot).filter(|id| alive.contains(id)) {
                            Some(&id) => {
                                obs.extend(env.obs_commander(id, v.sensed)?.to_f32());
                                mask.push(true);
                            }
                            None => {
                                obs.extend(std::iter::repeat(0.0).take(p));
                                mask.push(false);
                            }
                        }
                    }
                    let h = hidden.get(&0).cloned().or_else(|| model.net.hidden_width().map(|w| vec![0.0; w]));
                    let out = model.net.forward_actor(0, &obs, h.as_deref())?;
                    let s = sample_action(&out.logits, Some(&mask), &mut rng, greedy)?;
                    if let Some(nh) = out.hidden {
                        hidden.insert(0, nh);
                    }
                    for &id in &alive {
                        let slot = team_ids.iter().position(|&x| x == id).expect("agent");
                        commands.insert(id, s.actions[slot]);
                    }
                    pending.push(PendingDecision {
                        agents: alive.clone(),
                        commands: vec![],
                        obs,
                        hidden: h,
                        actions: s.actions,
                        mask,
                        log_prob: s.log_prob,
                        value: 0.0,
                        critic_input: vec![],
                    });
                } else {
                    for &id in &alive {
                        let obs = env.obs_commander(id, v.sensed)?.to_f32();
                        let h = hidden.get(&id).cloned().or_else(|| model.net.hidden_width().map(|w| vec![0.0; w]));
                        let out = model.net.forward_actor(0, &obs, h.as_deref())?;
                        let s = sample_action(&out.logits, None, &mut rng, greedy)?;
                        if let Some(nh) = out.hidden {
                            hidden.insert(id, nh);
                        }
                        commands.insert(id, s.actions[0]);
                        pending.push(PendingDecision {
                            agents: vec![id],
                            commands: vec![],
                            obs,
                            hidden: h,
                            actions: s.actions,
                            mask: vec![],
                            log_prob: s.log_prob,
                            value: 0.0,
                            critic_input: vec![],
                        });
                    }
                }
            }
            AgentCommander::AlwaysFight => {
                commands.extend(alive.iter().map(|&id| (id, 1)));
            }
            AgentCommander::Random { variant } => {
                commands.extend(alive.iter().map(|&id| (id, rng.gen_range(0..variant.options()))));
            }
        }
        let variant = match commander {
            AgentCommander::Model { model, .. } => model.variant,
            AgentCommander::Random { variant } => variant,
            AgentCommander::AlwaysFight => CommanderVariant::default(),
        };

        // options for both teams
        let mut option_of: BTreeMap<AircraftId, OptionChoice> = BTreeMap::new();
        let mut sensed_of: BTreeMap<AircraftId, Vec<AircraftId>> = BTreeMap::new();
        for (&id, &a_c) in &commands {
            let (choice, sensed, rank) = decode_command(env, id, a_c, &variant);
            stats.decisions += 1;
            match choice {
                OptionChoice::Escape => stats.escape += 1,
                OptionChoice::Fight(_) => {
                    stats.fight += 1;
                    stats.target_rank[rank.unwrap_or(0).min(2)] += 1;
                }
            }
            if let OptionChoice::Fight(t) = choice {
                env.set_target(id, t);
            }
            option_of.insert(id, choice);
            sensed_of.insert(id, sensed);
        }
        for id in env.alive_opponents() {
            env.set_target(id, None);
            let c = if rng.gen_bool(p_o) { OptionChoice::Fight(None) } else { OptionChoice::Escape };
            option_of.insert(id, c);
        }

        // critic inputs
        if let Some(m) = model {
            let v = m.variant;
            let p = CommanderModel::obs_width(&v);
            let opp_part: Vec<f32> = (0..m.opponents)
                .flat_map(|slot| {
                    let code = enemy_ids.get(slot).and_then(|id| option_of.get(id)).map(|c| match c {
                        OptionChoice::Fight(_) => 0,
                        OptionChoice::Escape => 1,
                    });
                    match code {
                        Some(c) => one_hot(c, 2).collect::<Vec<_>>(),
                        None => vec![0.0; 2],
                    }
                })
                .collect();
            let obs_of: BTreeMap<AircraftId, Vec<f32>> = if v.global {
                BTreeMap::new()
            } else {
                pending.iter().map(|d| (d.agents[0], d.obs.clone())).collect()
            };
            for d in &mut pending {
                let mut ci = Vec::new();
                if v.global {
                    ci.extend(&d.obs);
                } else {
                    let me = d.agents[0];
                    ci.extend(&d.obs);
                    let mates: Vec<AircraftId> = team_ids.iter().copied().filter(|&i| i != me).collect();
                    for slot in 0..m.team_size - 1 {
                        match mates.get(slot).and_then(|i| obs_of.get(i).map(|o| (o, commands[i]))) {
                            Some((o, a)) => {
                                ci.extend(o);
                                ci.extend(one_hot(a, v.options()));
                            }
                            None => ci.extend(std::iter::repeat(0.0).take(p + v.options())),
                        }
                    }
                }
                ci.extend(&opp_part);
                d.value = m.net.forward_critic(0, &ci)?.0 as f64;
                d.critic_input = ci;
                d.commands =
                    d.agents.iter().map(|&a| (a, commands[&a], sensed_of[&a].clone())).collect();
            }
        }

        // fly the options
        let decision_world = env.world.clone();
        let mut events: Vec<StepEvent> = Vec::new();
        let mut steps = 0u32;
        loop {
            let pick = |team: Team, want_fight: bool| -> Vec<AircraftId> {
                option_of
                    .iter()
                    .filter(|(id, c)| {
                        env.world.get(**id).team == team && matches!(c, OptionChoice::Fight(_)) == want_fight
                    })
                    .map(|(&id, _)| id)
                    .collect()
            };
            let mut actions: Vec<(AircraftId, LowLevelAction)> = Vec::new();
            for team in [Team::Agent, Team::Opponent] {
                let f = pick(team, true);
                let e = pick(team, false);
                if !f.is_empty() {
                    actions.extend(fight.act(env, team, Some(&f), low_greedy, &mut low_rng)?.actions);
                }
                if !e.is_empty() {
                    actions.extend(escape.act(env, team, Some(&e), low_greedy, &mut low_rng)?.actions);
                }
            }
            let res = env.step(&actions, RewardMode::None)?;
            steps += 1;
            observe(env, &res);
            let ended = env.is_done()
                || alive.iter().any(|&a| option_terminated(&env.world, a, steps, &res.events, &th));
            events.extend(res.events);
            if ended {
                break;
            }
        }

        // commander rewards
        let done_all = env.is_done();
        let reward_of = |a: AircraftId, a_c: usize, sensed: &[AircraftId]| {
            reward_commander(&decision_world, a, a_c, sensed, &events, &env.world, variant.assess, &th, &k)
        };
        if model.is_none() {
            for (&a, &a_c) in &commands {
                total += reward_of(a, a_c, &sensed_of[&a]);
            }
        }
        for d in pending {
            let reward: f64 = d.commands.iter().map(|(a, a_c, s)| reward_of(*a, *a_c, s)).sum();
            total += reward;
            let key = if variant.global { usize::MAX } else { d.agents[0] };
            let done = done_all || (!variant.global && !env.world.get(d.agents[0]).alive);
            let t = Transition {
                net: 0,
                instance: 0,
                obs: d.obs,
                hidden: d.hidden,
                actions: d.actions,
                mask: d.mask,
                log_prob: d.log_prob,
                value: d.value,
                critic_input: d.critic_input,
                reward,
                done,
                agent: d.agents[0],
                aircraft: env.world.get(d.agents[0]).kind(),
                duration: steps,
            };
            open.entry(key).or_default().transitions.push(t);
            if done {
                let traj = open.remove(&key).expect("just inserted");
                if let Some(b) = buffer.as_deref_mut() {
                    b.push(traj);
                }
            }
        }
    }
    Ok(EpisodeSummary { outcome: env.outcome, steps: env.steps, reward: total })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommanderConfig {
    pub variant: CommanderVariant,
    pub scenario: ScenarioConfig,
    pub ppo: PpoConfig,
    pub body: Option<Body>,
    pub env_steps: u64,
    /// Frozen low-level options act greedily.
    pub low_greedy: bool,
    pub seed: u64,
}

impl Default for CommanderConfig {
    fn default() -> Self {
        Self {
            variant: CommanderVariant::default(),
            scenario: ScenarioConfig::commander(),
            ppo: PpoConfig::high_level(),
            body: None,
            env_steps: 200_000,
            low_greedy: true,
            seed: 0,
        }
    }
}

/// Trains a commander over frozen fight and escape models.
pub fn train_commander(
    cfg: &CommanderConfig,
    fight: Option<Arc<LowLevelModel>>,
    escape: Option<Arc<LowLevelModel>>,
    run_dir: Option<&Path>,
) -> Result<(CommanderModel, Vec<MetricsRecord>), TrainError> {
    let fight = fight.ok_or_else(|| TrainError::Missing("fight policy".into()))?;
    let escape = escape.ok_or_else(|| TrainError::Missing("escape policy".into()))?;
    cfg.ppo.validate()?;
    cfg.scenario.validate()?;
    if let Some(d) = run_dir {
        std::fs::create_dir_all(d).map_err(io_err(d))?;
        let p = d.join("config.json");
        std::fs::write(&p, serde_json::to_string_pretty(cfg).expect("serializable")).map_err(io_err(&p))?;
    }
    let mut log = MetricsLog::open(run_dir.map(|d| d.join("metrics.jsonl")).as_deref())?;
    let frozen = (fight.checksum(), escape.checksum());
    let s = &cfg.scenario;
    let mut model = CommanderModel::new(cfg.variant, s.n_agents, s.n_opponents, cfg.body, cfg.seed)?;
    let (mut update, mut env_steps, mut episodes) = (0u64, 0u64, 0u64);
    while env_steps < cfg.env_steps {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 10, update));
        let snapshot = model.clone();
        let mut buffer = RolloutBuffer::default();
        let mut stats = CommandStats::default();
        let (mut eps, mut steps, mut reward, mut wins) = (0u64, 0u64, 0.0, 0u64);
        while buffer.len() < cfg.ppo.batch_size {
            let ep_seed: u64 = rng.gen();
            let mut env = CombatEnv::reset(&s.clone().with_seed(ep_seed))?;
            let cmd = AgentCommander::Model { model: &snapshot, greedy: false };
            let r = run_hier_episode(
                &mut env,
                cmd,
                &fight,
                &escape,
                cfg.low_greedy,
                ep_seed,
                Some(&mut buffer),
                &mut stats,
                &mut |_, _| {},
            )?;
            eps += 1;
            steps += r.steps as u64;
            reward += r.reward;
            wins += (r.outcome == Outcome::Win) as u64;
        }
        let st = ppo_update(std::slice::from_mut(&mut model.net), &mut buffer, &cfg.ppo, &mut rng)?;
        update += 1;
        env_steps += steps;
        episodes += eps;
        log.push(MetricsRecord {
            phase: cfg.variant.label(),
            update,
            env_steps,
            episodes,
            mean_episode_reward: reward / eps as f64,
            mean_episode_length: steps as f64 / eps as f64,
            win_rate: wins as f64 / eps as f64,
            stats: st,
        })?;
        if let Some(d) = run_dir {
            model.save(&d.join("commander.ckpt"), true)?;
        }
    }
    if (fight.checksum(), escape.checksum()) != frozen {
        return Err(TrainError::FrozenChanged("low-level options".into()));
    }
    Ok((model, log.records))
}
