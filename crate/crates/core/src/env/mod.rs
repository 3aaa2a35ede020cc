//! Episode layer on top of the simulator: scenario generation, observation
//! and action encoding, rewards and outcome classification.
//!
//! One env step holds the decoded setpoints for `rounds_per_step` simulation
//! rounds. Aircraft ids are dense: agents first, then opponents.

pub mod config;
pub mod obs;
pub mod reward;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{Ammo, Level, RewardConstants, ScenarioConfig, Thresholds};
pub use obs::{build_obs_commander, build_obs_escape, build_obs_fight, ObsLayout, ObsVector};
pub use reward::{EscapeVariant, FightVariant, RewardMode};

use crate::geometry::{ata, HeadingDeg, Vec2};
use crate::sim::{AircraftId, AircraftSpec, AircraftType, SimEvent, Team, World};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("aircraft {0} does not exist")]
    UnknownAircraft(AircraftId),
    #[error("aircraft {0} is destroyed")]
    DeadAircraft(AircraftId),
    #[error("action component out of range: {0}")]
    InvalidAction(String),
    #[error("episode already finished")]
    Finished,
}

/// Relative heading change per heading-action unit, degrees.
pub const HEADING_STEP_DEG: f64 = 15.0;
/// Sizes of the heading, speed, cannon and rocket action heads.
pub const ACTION_ARITIES: [usize; 4] = [13, 9, 2, 2];
/// Width of a one-hot encoded low-level action.
pub const ACTION_ONE_HOT: usize = 13 + 9 + 2 + 2;

/// Low-level control command: relative heading `h` in `-6..=6` (15° each),
/// speed level `v` in `0..=8`, cannon and rocket triggers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct LowLevelAction {
    pub heading: i8,
    pub speed: u8,
    pub cannon: bool,
    pub rocket: bool,
}

impl LowLevelAction {
    pub fn new(heading: i8, speed: u8, cannon: bool, rocket: bool) -> Result<Self, EnvError> {
        if !(-6..=6).contains(&heading) {
            return Err(EnvError::InvalidAction(format!("heading {heading}")));
        }
        if speed > 8 {
            return Err(EnvError::InvalidAction(format!("speed {speed}")));
        }
        Ok(Self { heading, speed, cannon, rocket })
    }

    /// Decodes per-head category indices as produced by a policy.
    pub fn from_indices(idx: &[usize]) -> Result<Self, EnvError> {
        if idx.len() != 4 || idx.iter().zip(ACTION_ARITIES).any(|(&i, n)| i >= n) {
            return Err(EnvError::InvalidAction(format!("indices {idx:?}")));
        }
        Ok(Self {
            heading: idx[0] as i8 - 6,
            speed: idx[1] as u8,
            cannon: idx[2] == 1,
            rocket: idx[3] == 1,
        })
    }

    pub fn indices(&self) -> [usize; 4] {
        [(self.heading + 6) as usize, self.speed as usize, self.cannon as usize, self.rocket as usize]
    }

    pub fn one_hot(&self) -> [f64; ACTION_ONE_HOT] {
        let mut out = [0.0; ACTION_ONE_HOT];
        let mut offset = 0;
        for (i, n) in self.indices().into_iter().zip(ACTION_ARITIES) {
            out[offset + i] = 1.0;
            offset += n;
        }
        out
    }

    /// Relative heading command, degrees.
    pub fn heading_offset(&self) -> f64 {
        HEADING_STEP_DEG * self.heading as f64
    }

    /// Speed setpoint in knots: linear over the type's speed range.
    pub fn speed_knots(&self, spec: &AircraftSpec) -> f64 {
        spec.min_speed + (spec.max_speed - spec.min_speed) * self.speed as f64 / 8.0
    }
}

/// Writes an action's setpoints into the aircraft state. The rocket, if
/// requested, homes on `rocket_target` or else the closest enemy.
pub fn apply_action(
    world: &mut World,
    id: AircraftId,
    action: &LowLevelAction,
    rocket_target: Option<AircraftId>,
) -> Result<(), EnvError> {
    let a = world.aircraft.get(id).ok_or(EnvError::UnknownAircraft(id))?;
    if !a.alive {
        return Err(EnvError::DeadAircraft(id));
    }
    let target = if action.rocket {
        rocket_target
            .filter(|&t| world.aircraft.get(t).is_some_and(|o| o.alive && o.team != a.team))
            .or_else(|| world.nearest(id, a.team.enemy()).first().copied())
    } else {
        None
    };
    let a = world.get_mut(id);
    a.target_heading = a.heading.rotated(action.heading_offset());
    a.speed = action.speed_knots(&a.spec);
    a.cannon_trigger = action.cannon;
    a.rocket_request = target;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Ongoing,
    Win,
    Loss,
    Draw,
}

impl Outcome {
    pub fn is_terminal(self) -> bool {
        self != Outcome::Ongoing
    }

    /// Outcome from the survivor counts once an episode has ended or might
    /// have ended. Mutual extinction counts as a draw.
    pub fn classify(agents_alive: usize, opponents_alive: usize, horizon_reached: bool) -> Self {
        match (agents_alive, opponents_alive) {
            (0, 0) => Outcome::Draw,
            (_, 0) => Outcome::Win,
            (0, _) => Outcome::Loss,
            _ if horizon_reached => Outcome::Draw,
            _ => Outcome::Ongoing,
        }
    }
}

/// A simulator event together with what the kill reward needs to know about
/// the moment it happened.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub round: u64,
    pub event: SimEvent,
    /// For weapon kills: the victim's ATA to the shooter, degrees.
    pub kill_ata: Option<f64>,
    /// Shooter's remaining cannon + rocket count right after the kill.
    pub shooter_ammo_left: u32,
    /// Shooter's initial cannon + rocket count.
    pub shooter_ammo_max: u32,
}

impl StepEvent {
    fn capture(world: &World, event: SimEvent) -> Self {
        match event.kill() {
            Some((shooter, victim)) => {
                let s = world.get(shooter);
                let v = world.get(victim);
                StepEvent {
                    round: world.round,
                    event,
                    kill_ata: Some(ata(v.pos, v.heading, s.pos)),
                    shooter_ammo_left: s.cannon_ammo + s.rockets,
                    shooter_ammo_max: s.initial_cannon + s.initial_rockets,
                }
            }
            None => StepEvent { round: world.round, event, kill_ata: None, shooter_ammo_left: 0, shooter_ammo_max: 0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    /// Rewards for every agent that was alive when the step began.
    pub rewards: BTreeMap<AircraftId, f64>,
    /// Per-agent done flags for the same agents.
    pub dones: BTreeMap<AircraftId, bool>,
    pub outcome: Outcome,
    pub events: Vec<StepEvent>,
}

/// A running episode.
#[derive(Debug, Clone)]
pub struct CombatEnv {
    pub config: ScenarioConfig,
    pub world: World,
    pub steps: u32,
    pub outcome: Outcome,
    /// Commander-assigned fight targets, indexed by aircraft id.
    targets: Vec<Option<AircraftId>>,
    /// Per-round snapshots, kept only after [`CombatEnv::record_rounds`].
    round_log: Option<Vec<RoundRecord>>,
}

/// State of one aircraft at the end of a simulation round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AircraftSnapshot {
    pub id: AircraftId,
    pub team: Team,
    #[serde(rename = "type")]
    pub kind: AircraftType,
    /// km
    pub x: f64,
    /// km
    pub y: f64,
    /// compass degrees
    pub heading: f64,
    /// knots
    pub speed: f64,
    pub alive: bool,
}

/// Every aircraft and every simulator event of one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub aircraft: Vec<AircraftSnapshot>,
    pub events: Vec<SimEvent>,
}

impl RoundRecord {
    pub fn capture(world: &World, events: Vec<SimEvent>) -> Self {
        let aircraft = world
            .aircraft
            .iter()
            .map(|a| AircraftSnapshot {
                id: a.id,
                team: a.team,
                kind: a.kind(),
                x: a.pos.x,
                y: a.pos.y,
                heading: a.heading.value(),
                speed: a.speed,
                alive: a.alive,
            })
            .collect();
        Self { round: world.round, aircraft, events }
    }
}

/// Aircraft types for one team: at least one of each when the team has two
/// or more members and mixing is on, otherwise independent uniform draws.
pub fn sample_team_types(n: usize, mixed: bool, rng: &mut impl Rng) -> Vec<AircraftType> {
    let mut types: Vec<AircraftType> = Vec::with_capacity(n);
    if mixed && n >= 2 {
        types.extend(AircraftType::ALL);
    }
    while types.len() < n {
        types.push(AircraftType::ALL[rng.gen_range(0..2)]);
    }
    types.shuffle(rng);
    types
}

impl CombatEnv {
    /// Starts a new episode. Teams spawn in opposite halves (which half is
    /// random) with random positions, headings and speeds.
    pub fn reset(config: &ScenarioConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut world = World::new(config.map_size, config.sim, rng.gen());
        let agents_left = rng.gen_bool(0.5);
        let size = config.map_size;
        let m = config.spawn_margin * size;
        for (team, n, ammo, left) in [
            (Team::Agent, config.n_agents, config.agent_ammo, agents_left),
            (Team::Opponent, config.n_opponents, config.opponent_ammo, !agents_left),
        ] {
            let types = sample_team_types(n, config.mixed_types, &mut rng);
            let (x0, x1) = if left { (m, size / 2.0 - m) } else { (size / 2.0 + m, size - m) };
            for kind in types {
                let spec = kind.spec();
                let pos = Vec2::new(rng.gen_range(x0..=x1), rng.gen_range(m..=size - m));
                let heading = HeadingDeg::new(rng.gen_range(0.0..360.0));
                let speed = rng.gen_range(spec.min_speed..=spec.max_speed);
                world.spawn(team, kind, pos, heading, speed, ammo.cannon, ammo.rockets);
            }
        }
        let n = world.aircraft.len();
        Ok(Self {
            config: config.clone(),
            world,
            steps: 0,
            outcome: Outcome::Ongoing,
            targets: vec![None; n],
            round_log: None,
        })
    }

    /// Wraps a hand-built world (tests, replays).
    pub fn from_world(config: &ScenarioConfig, world: World) -> Self {
        let n = world.aircraft.len();
        let mut env = Self {
            config: config.clone(),
            world,
            steps: 0,
            outcome: Outcome::Ongoing,
            targets: vec![None; n],
            round_log: None,
        };
        env.outcome = env.classify();
        env
    }

    /// Starts keeping a snapshot of every subsequent simulation round.
    pub fn record_rounds(&mut self) {
        self.round_log.get_or_insert_with(Vec::new);
    }

    pub fn round_log(&self) -> Option<&[RoundRecord]> {
        self.round_log.as_deref()
    }

    pub fn agent_ids(&self) -> Vec<AircraftId> {
        self.ids(Team::Agent)
    }

    pub fn opponent_ids(&self) -> Vec<AircraftId> {
        self.ids(Team::Opponent)
    }

    fn ids(&self, team: Team) -> Vec<AircraftId> {
        self.world.aircraft.iter().filter(|a| a.team == team).map(|a| a.id).collect()
    }

    pub fn alive_agents(&self) -> Vec<AircraftId> {
        self.world.alive_ids(Team::Agent).collect()
    }

    pub fn alive_opponents(&self) -> Vec<AircraftId> {
        self.world.alive_ids(Team::Opponent).collect()
    }

    pub fn is_done(&self) -> bool {
        self.outcome.is_terminal()
    }

    pub fn set_target(&mut self, id: AircraftId, target: Option<AircraftId>) {
        self.targets[id] = target;
    }

    pub fn target(&self, id: AircraftId) -> Option<AircraftId> {
        self.targets[id].filter(|&t| self.world.get(t).alive)
    }

    pub fn obs_fight(&self, id: AircraftId) -> Result<ObsVector, EnvError> {
        build_obs_fight(&self.world, id, self.target(id))
    }

    pub fn obs_escape(&self, id: AircraftId) -> Result<ObsVector, EnvError> {
        build_obs_escape(&self.world, id)
    }

    pub fn obs_commander(&self, id: AircraftId, n_opponents: usize) -> Result<ObsVector, EnvError> {
        build_obs_commander(&self.world, id, n_opponents)
    }

    /// Fight observations of every alive agent.
    pub fn observations_fight(&self) -> BTreeMap<AircraftId, ObsVector> {
        self.alive_agents().into_iter().filter_map(|id| Some((id, self.obs_fight(id).ok()?))).collect()
    }

    fn classify(&self) -> Outcome {
        Outcome::classify(
            self.world.alive_count(Team::Agent),
            self.world.alive_count(Team::Opponent),
            self.steps >= self.config.horizon,
        )
    }

    /// Advances one env step. `actions` may cover any alive aircraft of either
    /// team; aircraft without an entry keep their previous setpoints.
    /// Rewards are computed for the agent team under `mode`.
    pub fn step(
        &mut self,
        actions: &[(AircraftId, LowLevelAction)],
        mode: RewardMode,
    ) -> Result<StepResult, EnvError> {
        if self.outcome.is_terminal() {
            return Err(EnvError::Finished);
        }
        for (id, action) in actions {
            let target = self.target(*id);
            apply_action(&mut self.world, *id, action, target)?;
        }
        let participants = self.alive_agents();
        let mut events = Vec::new();
        for _ in 0..self.config.rounds_per_step {
            let round_events = self.world.step_round();
            for &e in &round_events {
                events.push(StepEvent::capture(&self.world, e));
            }
            if let Some(log) = &mut self.round_log {
                log.push(RoundRecord::capture(&self.world, round_events));
            }
            if self.world.alive_count(Team::Agent) == 0 || self.world.alive_count(Team::Opponent) == 0 {
                break;
            }
        }
        self.steps += 1;
        self.outcome = self.classify();

        let k = &self.config.rewards;
        let th = &self.config.thresholds;
        let w = &self.world;
        let rewards: BTreeMap<AircraftId, f64> = match mode {
            RewardMode::None => participants.iter().map(|&a| (a, 0.0)).collect(),
            RewardMode::Fight(v) => reward::reward_fight_team(&events, &participants, w, v, k),
            RewardMode::Escape(v) => participants
                .iter()
                .map(|&a| (a, reward::reward_escape(&events, a, w, v, th, k)))
                .collect(),
            RewardMode::Standard => participants
                .iter()
                .map(|&a| (a, reward::reward_standard(&events, a, w, th, k)))
                .collect(),
        };
        let terminal = self.outcome.is_terminal();
        let dones = participants.iter().map(|&a| (a, terminal || !w.get(a).alive)).collect();
        Ok(StepResult { rewards, dones, outcome: self.outcome, events })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimConfig;

    #[test]
    fn action_decoding() {
        let a = LowLevelAction::new(6, 0, false, false).unwrap();
        assert_eq!(a.heading_offset(), 90.0);
        assert_eq!(a.speed_knots(&AircraftSpec::AC1), 100.0);
        assert_eq!(LowLevelAction::new(0, 8, false, false).unwrap().speed_knots(&AircraftSpec::AC1), 900.0);
        assert_eq!(LowLevelAction::new(0, 4, false, false).unwrap().speed_knots(&AircraftSpec::AC2), 350.0);
        assert!(LowLevelAction::new(7, 0, false, false).is_err());
        assert!(LowLevelAction::new(0, 9, false, false).is_err());
        let b = LowLevelAction::new(-3, 5, true, false).unwrap();
        assert_eq!(LowLevelAction::from_indices(&b.indices()).unwrap(), b);
        assert_eq!(b.one_hot().iter().sum::<f64>(), 4.0);
        assert!(LowLevelAction::from_indices(&[13, 0, 0, 0]).is_err());
    }

    #[test]
    fn apply_sets_setpoints() {
        let mut w = World::new(30.0, SimConfig::default(), 0);
        w.spawn(Team::Agent, AircraftType::Ac1, Vec2::new(5.0, 5.0), HeadingDeg::new(300.0), 400.0, 10, 2);
        w.spawn(Team::Opponent, AircraftType::Ac2, Vec2::new(5.0, 9.0), HeadingDeg::new(0.0), 400.0, 10, 0);
        let act = LowLevelAction::new(6, 8, true, true).unwrap();
        apply_action(&mut w, 0, &act, None).unwrap();
        let a = w.get(0);
        assert_eq!(a.target_heading.value(), 30.0);
        assert_eq!(a.speed, 900.0);
        assert!(a.cannon_trigger);
        assert_eq!(a.rocket_request, Some(1));
    }

    #[test]
    fn reset_is_deterministic_and_mixed() {
        let cfg = ScenarioConfig::low_level(Level::L1).with_seed(42);
        let a = CombatEnv::reset(&cfg).unwrap();
        let b = CombatEnv::reset(&cfg).unwrap();
        assert_eq!(a.world.aircraft, b.world.aircraft);
        for seed in 0..50 {
            let env = CombatEnv::reset(&ScenarioConfig::commander().with_seed(seed)).unwrap();
            for team in [Team::Agent, Team::Opponent] {
                let kinds: Vec<_> =
                    env.world.aircraft.iter().filter(|x| x.team == team).map(|x| x.kind()).collect();
                assert!(kinds.contains(&AircraftType::Ac1) && kinds.contains(&AircraftType::Ac2));
            }
            let agent_x: Vec<f64> = env.agent_ids().iter().map(|&i| env.world.get(i).pos.x).collect();
            let opp_x: Vec<f64> = env.opponent_ids().iter().map(|&i| env.world.get(i).pos.x).collect();
            let half = env.config.map_size / 2.0;
            assert!(
                agent_x.iter().all(|&x| x < half) && opp_x.iter().all(|&x| x > half)
                    || agent_x.iter().all(|&x| x > half) && opp_x.iter().all(|&x| x < half)
            );
        }
    }

    #[test]
    fn reset_rejects_empty_team() {
        let cfg = ScenarioConfig::low_level(Level::L1).with_teams(1, 0);
        assert!(matches!(CombatEnv::reset(&cfg), Err(EnvError::Config(_))));
    }

    #[test]
    fn outcome_table() {
        assert_eq!(Outcome::classify(1, 1, true), Outcome::Draw);
        assert_eq!(Outcome::classify(1, 1, false), Outcome::Ongoing);
        assert_eq!(Outcome::classify(2, 0, false), Outcome::Win);
        assert_eq!(Outcome::classify(0, 1, false), Outcome::Loss);
        assert_eq!(Outcome::classify(0, 0, false), Outcome::Draw);
    }

    #[test]
    fn horizon_draw() {
        let mut cfg = ScenarioConfig::low_level(Level::L1).with_seed(3);
        cfg.horizon = 2;
        let mut env = CombatEnv::reset(&cfg).unwrap();
        // park everyone in the middle of the map heading nowhere dangerous
        for (i, a) in env.world.aircraft.iter_mut().enumerate() {
            a.pos = Vec2::new(5.0 + 5.0 * i as f64, 15.0);
            a.heading = HeadingDeg::new(0.0);
            a.target_heading = a.heading;
            a.speed = 100.0;
        }
        let r1 = env.step(&[], RewardMode::None).unwrap();
        assert_eq!(r1.outcome, Outcome::Ongoing);
        let r2 = env.step(&[], RewardMode::None).unwrap();
        assert_eq!(r2.outcome, Outcome::Draw);
        assert!(r2.dones.values().all(|&d| d));
        assert_eq!(env.step(&[], RewardMode::None), Err(EnvError::Finished));
    }

    #[test]
    fn mutual_last_kill_is_draw() {
        let mut w = World::new(30.0, SimConfig::default(), 0);
        w.spawn(Team::Agent, AircraftType::Ac1, Vec2::new(29.99, 10.0), HeadingDeg::new(90.0), 900.0, 10, 0);
        w.spawn(Team::Opponent, AircraftType::Ac1, Vec2::new(0.01, 10.0), HeadingDeg::new(270.0), 900.0, 10, 0);
        let mut env = CombatEnv::from_world(&ScenarioConfig::low_level(Level::L1), w);
        let r = env.step(&[], RewardMode::Fight(FightVariant::Base)).unwrap();
        assert_eq!(r.outcome, Outcome::Draw);
        assert_eq!(r.rewards[&0], -5.0);
    }

    #[test]
    fn team_types_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = [0usize; 2];
        for _ in 0..200 {
            let t = sample_team_types(1, true, &mut rng);
            seen[t[0].index()] += 1;
            let t = sample_team_types(2, true, &mut rng);
            assert_ne!(t[0], t[1]);
        }
        assert!(seen[0] > 60 && seen[1] > 60);
    }
}
