//! Evaluation: outcome and event statistics, scenario sweeps and trajectory
//! export.
//!
//! Reports and trajectories are JSON-lines files. Both carry a
//! `schema_version`; the layouts are described in `docs/`.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{AircraftSnapshot, CombatEnv, EnvError, Outcome, RewardMode, RoundRecord, ScenarioConfig, StepResult};
use crate::sim::{AircraftId, AircraftType, SimEvent, Team};
use crate::train::commander::{run_hier_episode, AgentCommander, CommandStats};
use crate::train::rollout::run_episode;
use crate::train::{mix_seed, CommanderModel, Framework, LowLevelModel, ModelKind, TeamPolicy, TrainError};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const TRAJECTORY_SCHEMA_VERSION: u32 = 1;

/// RNG stream of evaluation episode seeds.
const EVAL_STREAM: u64 = 0xE7A1;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("invalid evaluation setup: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io { path: path.to_path_buf(), source }
}

/// A count split by aircraft type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeCounts {
    pub ac1: u64,
    pub ac2: u64,
}

impl TypeCounts {
    pub fn add(&mut self, kind: AircraftType) {
        match kind {
            AircraftType::Ac1 => self.ac1 += 1,
            AircraftType::Ac2 => self.ac2 += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.ac1 + self.ac2
    }
}

/// Event counts over all episodes, seen from the agent team.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounters {
    /// Opponents destroyed by agent weapons, by shooter type (k-1, k-2).
    pub kills: TypeCounts,
    /// Agents destroyed by opponent weapons, by victim type (d-1, d-2).
    pub deaths: TypeCounts,
    /// Agents destroyed by agent weapons, by shooter type (fk-1, fk-2).
    pub friendly_kills: TypeCounts,
    /// Agents lost to the map boundary, by type.
    pub boundary: TypeCounts,
    pub opponent_boundary: u64,
    /// Opponents destroyed by opponent weapons.
    pub opponent_friendly_kills: u64,
    /// Opponents destroyed by any cause.
    pub opponent_deaths: u64,
    /// Agents destroyed by any cause.
    pub agent_deaths: u64,
    pub rockets_fired: u64,
}

/// Episode-level counts for judging evasion. An episode counts as
/// `escaped` when no agent was lost to any cause, `killed` when at least
/// one was, and `kills` when agents destroyed at least one opponent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscapeCounters {
    pub escaped: u64,
    pub killed: u64,
    pub kills: u64,
}

/// Commander behavior during a hierarchical evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CommandSummary {
    pub fight: u64,
    pub escape: u64,
    /// fight / (fight + escape)
    pub fight_ratio: f64,
    /// Fight commands by proximity rank of the chosen opponent
    /// (Opp1 nearest).
    pub opponent_selection: [u64; 3],
    pub opponent_selection_freq: [f64; 3],
}

impl CommandSummary {
    fn from_stats(s: &CommandStats) -> Self {
        let issued = s.fight + s.escape;
        let ranked: u64 = s.target_rank.iter().sum();
        let frac = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        Self {
            fight: s.fight,
            escape: s.escape,
            fight_ratio: frac(s.fight, issued),
            opponent_selection: s.target_rank,
            opponent_selection_freq: s.target_rank.map(|n| frac(n, ranked)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub label: String,
    pub episodes: u64,
    pub wins: u64,
    pub losses: u64,
    pub draws: u64,
    pub win_rate: f64,
    pub loss_rate: f64,
    pub draw_rate: f64,
    pub events: EventCounters,
    pub escape: EscapeCounters,
    /// Present for hierarchical agents only.
    pub commands: Option<CommandSummary>,
    pub mean_episode_length: f64,
    pub mean_episode_reward: f64,
}

impl EvalReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    /// Writes the report as a one-line JSON-lines file.
    pub fn write(&self, path: &Path) -> Result<(), EvalError> {
        write_lines(path, std::iter::once(self.to_json_line()))
    }

    pub fn read(path: &Path) -> Result<Vec<EvalReport>, EvalError> {
        read_lines(path)?
            .into_iter()
            .map(|(line, text)| {
                serde_json::from_str(&text).map_err(|e| EvalError::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: e.to_string(),
                })
            })
            .collect()
    }
}

/// Writes several reports, one per line.
pub fn write_reports(path: &Path, reports: &[EvalReport]) -> Result<(), EvalError> {
    write_lines(path, reports.iter().map(EvalReport::to_json_line))
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<(), EvalError> {
    let mut text = String::new();
    for l in lines {
        text.push_str(&l);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(io_err(path))
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, EvalError> {
    let f = std::fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Accumulates counters from simulator events, episode by episode.
#[derive(Debug, Clone, Default)]
pub struct Tally {
    episodes: u64,
    wins: u64,
    losses: u64,
    draws: u64,
    steps: u64,
    reward: f64,
    events: EventCounters,
    escape: EscapeCounters,
    agent_lost: bool,
    opponent_killed: bool,
}

impl Tally {
    /// Folds one env step's events into the counters.
    pub fn observe(&mut self, env: &CombatEnv, events: impl IntoIterator<Item = SimEvent>) {
        let side = |id: AircraftId| {
            let a = env.world.get(id);
            (a.team, a.kind())
        };
        let ev = &mut self.events;
        for e in events {
            match e {
                SimEvent::CannonKill { shooter, victim } | SimEvent::RocketKill { shooter, victim } => {
                    let (st, sk) = side(shooter);
                    let (vt, vk) = side(victim);
                    match (st, vt) {
                        (Team::Agent, Team::Opponent) => {
                            ev.kills.add(sk);
                            self.opponent_killed = true;
                        }
                        (Team::Agent, Team::Agent) => ev.friendly_kills.add(sk),
                        (Team::Opponent, Team::Agent) => ev.deaths.add(vk),
                        (Team::Opponent, Team::Opponent) => ev.opponent_friendly_kills += 1,
                    }
                }
                SimEvent::OutOfBounds { aircraft } => match side(aircraft) {
                    (Team::Agent, kind) => ev.boundary.add(kind),
                    (Team::Opponent, _) => ev.opponent_boundary += 1,
                },
                SimEvent::RocketLaunch { shooter, .. } => {
                    if side(shooter).0 == Team::Agent {
                        ev.rockets_fired += 1;
                    }
                }
                SimEvent::RocketExpired { .. } => {}
            }
            if let Some(v) = e.victim() {
                match side(v).0 {
                    Team::Agent => {
                        ev.agent_deaths += 1;
                        self.agent_lost = true;
                    }
                    Team::Opponent => ev.opponent_deaths += 1,
                }
            }
        }
    }

    pub fn finish_episode(&mut self, outcome: Outcome, steps: u32, reward: f64) {
        self.episodes += 1;
        match outcome {
            Outcome::Win => self.wins += 1,
            Outcome::Loss => self.losses += 1,
            _ => self.draws += 1,
        }
        self.steps += steps as u64;
        self.reward += reward;
        if self.agent_lost {
            self.escape.killed += 1;
        } else {
            self.escape.escaped += 1;
        }
        if self.opponent_killed {
            self.escape.kills += 1;
        }
        self.agent_lost = false;
        self.opponent_killed = false;
    }

    pub fn report(&self, label: &str, commands: Option<&CommandStats>) -> EvalReport {
        let n = self.episodes.max(1) as f64;
        EvalReport {
            schema_version: REPORT_SCHEMA_VERSION,
            label: label.to_string(),
            episodes: self.episodes,
            wins: self.wins,
            losses: self.losses,
            draws: self.draws,
            win_rate: self.wins as f64 / n,
            loss_rate: self.losses as f64 / n,
            draw_rate: self.draws as f64 / n,
            events: self.events,
            escape: self.escape,
            commands: commands.map(CommandSummary::from_stats),
            mean_episode_length: self.steps as f64 / n,
            mean_episode_reward: self.reward / n,
        }
    }
}

/// The evaluated team.
#[derive(Debug, Clone)]
pub enum AgentSpec {
    /// A single low-level controller for the whole team.
    LowLevel(TeamPolicy),
    /// Frozen fight and escape options switched by a commander, or always
    /// fighting the nearest opponent when `commander` is `None`.
    Hierarchical {
        commander: Option<Arc<CommanderModel>>,
        fight: Arc<LowLevelModel>,
        escape: Arc<LowLevelModel>,
    },
}

/// The opposing team.
#[derive(Debug, Clone)]
pub enum OpponentSpec {
    Team(TeamPolicy),
    /// Opponents reuse the agents' fight and escape options, fighting with
    /// the scenario's `opponent_fight_prob` at every decision. Only valid
    /// with hierarchical agents.
    Options,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub scenario: ScenarioConfig,
    pub episodes: u64,
    pub seed: u64,
    /// Argmax actions for the evaluated policies; sampling when false.
    pub greedy: bool,
    /// Reward bookkeeping for `mean_episode_reward` (low-level agents).
    pub reward: RewardMode,
    pub label: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            episodes: 1000,
            seed: 0,
            greedy: true,
            reward: RewardMode::None,
            label: "eval".into(),
        }
    }
}

fn check_slots(model: &LowLevelModel, team: usize, who: &str) -> Result<(), EvalError> {
    if matches!(model.framework, Framework::Ctce | Framework::Dtde) && model.team_size != team {
        return Err(EvalError::Config(format!(
            "{who} model was built for {} aircraft per team but the scenario has {team}",
            model.team_size
        )));
    }
    Ok(())
}

/// Checks that every model fits the scenario, so mismatches surface before
/// any episode runs.
pub fn validate_setup(agents: &AgentSpec, opponents: &OpponentSpec, scenario: &ScenarioConfig) -> Result<(), EvalError> {
    scenario.validate()?;
    match (agents, opponents) {
        (AgentSpec::LowLevel(p), OpponentSpec::Team(o)) => {
            if let TeamPolicy::Model { model, .. } = p {
                check_slots(model, scenario.n_agents, "agent")?;
            }
            if let TeamPolicy::Model { model, .. } = o {
                check_slots(model, scenario.n_opponents, "opponent")?;
            }
            Ok(())
        }
        (AgentSpec::Hierarchical { commander, fight, escape }, OpponentSpec::Options) => {
            if fight.kind != ModelKind::Fight {
                return Err(EvalError::Config("fight option is not a fight model".into()));
            }
            if escape.kind != ModelKind::Escape {
                return Err(EvalError::Config("escape option is not an escape model".into()));
            }
            for m in [fight, escape] {
                check_slots(m, scenario.n_agents, "option")?;
                check_slots(m, scenario.n_opponents, "option")?;
            }
            if let Some(c) = commander {
                if c.variant.global && c.team_size != scenario.n_agents {
                    return Err(EvalError::Config(format!(
                        "global commander was built for {} agents but the scenario has {}",
                        c.team_size, scenario.n_agents
                    )));
                }
            }
            Ok(())
        }
        (AgentSpec::LowLevel(_), OpponentSpec::Options) => {
            Err(EvalError::Config("option-driven opponents need hierarchical agents".into()))
        }
        (AgentSpec::Hierarchical { .. }, OpponentSpec::Team(_)) => {
            Err(EvalError::Config("hierarchical agents face option-driven opponents".into()))
        }
    }
}

fn with_greedy(p: &TeamPolicy, greedy: bool) -> TeamPolicy {
    match p {
        TeamPolicy::Model { model, .. } => TeamPolicy::Model { model: model.clone(), greedy },
        other => other.clone(),
    }
}

/// Seed of evaluation episode `index`.
pub fn episode_seed(seed: u64, index: u64) -> u64 {
    mix_seed(seed, EVAL_STREAM, index)
}

fn play(
    env: &mut CombatEnv,
    agents: &AgentSpec,
    opponents: &OpponentSpec,
    cfg: &EvalConfig,
    seed: u64,
    stats: &mut CommandStats,
    observe: &mut dyn FnMut(&CombatEnv, &StepResult),
) -> Result<crate::train::EpisodeSummary, EvalError> {
    let summary = match (agents, opponents) {
        (AgentSpec::LowLevel(p), OpponentSpec::Team(o)) => {
            run_episode(env, &with_greedy(p, cfg.greedy), o, cfg.reward, seed, None, observe)?
        }
        (AgentSpec::Hierarchical { commander, fight, escape }, OpponentSpec::Options) => {
            let cmd = match commander {
                Some(m) => AgentCommander::Model { model: m.as_ref(), greedy: cfg.greedy },
                None => AgentCommander::AlwaysFight,
            };
            run_hier_episode(env, cmd, fight, escape, cfg.greedy, seed, None, stats, observe)?
        }
        _ => return Err(EvalError::Config("agent and opponent specs do not match".into())),
    };
    Ok(summary)
}

/// Runs `cfg.episodes` episodes and aggregates outcomes and events.
/// Deterministic for a fixed seed.
pub fn evaluate(agents: &AgentSpec, opponents: &OpponentSpec, cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    if cfg.episodes == 0 {
        return Err(EvalError::Config("need at least one episode".into()));
    }
    validate_setup(agents, opponents, &cfg.scenario)?;
    let mut tally = Tally::default();
    let mut stats = CommandStats::default();
    for ep in 0..cfg.episodes {
        let seed = episode_seed(cfg.seed, ep);
        let mut env = CombatEnv::reset(&cfg.scenario.clone().with_seed(seed))?;
        let mut observe = |env: &CombatEnv, res: &StepResult| tally.observe(env, res.events.iter().map(|e| e.event));
        let summary = play(&mut env, agents, opponents, cfg, seed, &mut stats, &mut observe)?;
        tally.finish_episode(summary.outcome, summary.steps, summary.reward);
    }
    let commands = matches!(agents, AgentSpec::Hierarchical { .. }).then_some(&stats);
    Ok(tally.report(&cfg.label, commands))
}

/// One cell of a scenario sweep, written like `3v3`, `2v4` or `3v3-PF`.
/// `PF` makes every opponent fight, `PE` makes every opponent escape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub label: String,
    pub n_agents: usize,
    pub n_opponents: usize,
    pub opponent_fight_prob: Option<f64>,
}

impl SweepCell {
    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let bad = || EvalError::Config(format!("bad sweep cell {text:?}, expected e.g. 3v3 or 3v3-PF"));
        let (teams, behavior) = match text.split_once('-') {
            Some((t, b)) => (t, Some(b)),
            None => (text, None),
        };
        let (a, o) = teams.split_once('v').ok_or_else(bad)?;
        let n_agents: usize = a.parse().map_err(|_| bad())?;
        let n_opponents: usize = o.parse().map_err(|_| bad())?;
        if n_agents == 0 || n_opponents == 0 {
            return Err(bad());
        }
        let opponent_fight_prob = match behavior {
            None => None,
            Some("PF") => Some(1.0),
            Some("PE") => Some(0.0),
            Some(_) => return Err(bad()),
        };
        Ok(Self { label: text.to_string(), n_agents, n_opponents, opponent_fight_prob })
    }

    /// The base scenario resized for this cell. Teams of ten or more get a
    /// 1000-step horizon.
    pub fn scenario(&self, base: &ScenarioConfig) -> ScenarioConfig {
        let mut s = base.clone().with_teams(self.n_agents, self.n_opponents);
        if self.n_agents.max(self.n_opponents) >= 10 {
            s.horizon = s.horizon.max(1000);
        }
        if let Some(p) = self.opponent_fight_prob {
            s.opponent_fight_prob = p;
        }
        s
    }
}

/// Evaluates the same agents on every cell; one report per cell, labelled
/// with the cell.
pub fn scenario_sweep(
    agents: &AgentSpec,
    opponents: &OpponentSpec,
    base: &EvalConfig,
    cells: &[SweepCell],
) -> Result<Vec<EvalReport>, EvalError> {
    if cells.is_empty() {
        return Err(EvalError::Config("empty sweep grid".into()));
    }
    let configs: Vec<EvalConfig> = cells
        .iter()
        .map(|c| EvalConfig { scenario: c.scenario(&base.scenario), label: c.label.clone(), ..base.clone() })
        .collect();
    for c in &configs {
        validate_setup(agents, opponents, &c.scenario)?;
    }
    configs.iter().map(|c| evaluate(agents, opponents, c)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeathCause {
    Cannon,
    Rocket,
    Boundary,
}

/// Where and how an aircraft was destroyed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub round: u64,
    pub id: AircraftId,
    pub team: Team,
    #[serde(rename = "type")]
    pub kind: AircraftType,
    pub x: f64,
    pub y: f64,
    pub cause: DeathCause,
    pub shooter: Option<AircraftId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    /// Labels and checksums of the controllers that flew the episode.
    pub checkpoints: Vec<String>,
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TrajectoryEntry {
    Round(RoundRecord),
    Landmark(Landmark),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Header(TrajectoryHeader),
    Round(RoundRecord),
    Landmark(Landmark),
}

/// A recorded episode: header, then one record per simulation round, with a
/// landmark after the round in which an aircraft was destroyed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub header: TrajectoryHeader,
    pub entries: Vec<TrajectoryEntry>,
}

impl TrajectoryLog {
    pub fn new(header: TrajectoryHeader) -> Self {
        Self { header, entries: Vec::new() }
    }

    /// Builds the log from per-round snapshots, deriving landmarks from the
    /// destruction events.
    pub fn from_rounds(header: TrajectoryHeader, rounds: &[RoundRecord]) -> Self {
        let mut log = Self::new(header);
        for r in rounds {
            log.entries.push(TrajectoryEntry::Round(r.clone()));
            for e in &r.events {
                let (victim, cause, shooter) = match *e {
                    SimEvent::CannonKill { shooter, victim } => (victim, DeathCause::Cannon, Some(shooter)),
                    SimEvent::RocketKill { shooter, victim } => (victim, DeathCause::Rocket, Some(shooter)),
                    SimEvent::OutOfBounds { aircraft } => (aircraft, DeathCause::Boundary, None),
                    _ => continue,
                };
                let a: &AircraftSnapshot = r.aircraft.iter().find(|a| a.id == victim).expect("victim in snapshot");
                log.entries.push(TrajectoryEntry::Landmark(Landmark {
                    round: r.round,
                    id: a.id,
                    team: a.team,
                    kind: a.kind,
                    x: a.x,
                    y: a.y,
                    cause,
                    shooter,
                }));
            }
        }
        log
    }

    pub fn rounds(&self) -> impl Iterator<Item = &RoundRecord> {
        self.entries.iter().filter_map(|e| match e {
            TrajectoryEntry::Round(r) => Some(r),
            _ => None,
        })
    }

    pub fn landmarks(&self) -> impl Iterator<Item = &Landmark> {
        self.entries.iter().filter_map(|e| match e {
            TrajectoryEntry::Landmark(l) => Some(l),
            _ => None,
        })
    }

    /// Round indices must strictly increase.
    pub fn validate(&self) -> Result<(), String> {
        let mut last: Option<u64> = None;
        for r in self.rounds() {
            if last.is_some_and(|l| r.round <= l) {
                return Err(format!("round {} follows round {}", r.round, last.unwrap_or(0)));
            }
            last = Some(r.round);
        }
        Ok(())
    }

    pub fn export(&self, path: &Path) -> Result<(), EvalError> {
        let f = std::fs::File::create(path).map_err(io_err(path))?;
        let mut w = std::io::BufWriter::new(f);
        let mut put = |line: &Line| -> Result<(), EvalError> {
            serde_json::to_writer(&mut w, line).expect("serializable");
            w.write_all(b"\n").map_err(io_err(path))
        };
        put(&Line::Header(self.header.clone()))?;
        for e in &self.entries {
            put(&match e {
                TrajectoryEntry::Round(r) => Line::Round(r.clone()),
                TrajectoryEntry::Landmark(l) => Line::Landmark(*l),
            })?;
        }
        w.flush().map_err(io_err(path))
    }

    pub fn import(path: &Path) -> Result<Self, EvalError> {
        let parse_err = |line: usize, msg: String| EvalError::Parse { path: path.to_path_buf(), line, msg };
        let mut header = None;
        let mut entries = Vec::new();
        for (line, text) in read_lines(path)? {
            let rec: Line = serde_json::from_str(&text).map_err(|e| parse_err(line, e.to_string()))?;
            match (rec, header.is_some()) {
                (Line::Header(h), false) => header = Some(h),
                (Line::Header(_), true) => return Err(parse_err(line, "second header".into())),
                (_, false) => return Err(parse_err(line, "record before header".into())),
                (Line::Round(r), true) => entries.push(TrajectoryEntry::Round(r)),
                (Line::Landmark(l), true) => entries.push(TrajectoryEntry::Landmark(l)),
            }
        }
        let header = header.ok_or_else(|| parse_err(0, "missing header".into()))?;
        let log = Self { header, entries };
        log.validate().map_err(|m| parse_err(0, m))?;
        Ok(log)
    }
}

fn checkpoint_ids(agents: &AgentSpec, opponents: &OpponentSpec) -> Vec<String> {
    let team = |side: &str, p: &TeamPolicy| match p {
        TeamPolicy::Scripted(l) => format!("{side}:scripted-{l:?}"),
        TeamPolicy::Random => format!("{side}:random"),
        TeamPolicy::Model { model, .. } => format!("{side}:{:?}:{}", model.kind, model.checksum()),
    };
    let mut ids = Vec::new();
    match agents {
        AgentSpec::LowLevel(p) => ids.push(team("agents", p)),
        AgentSpec::Hierarchical { commander, fight, escape } => {
            match commander {
                Some(c) => ids.push(format!("commander:{}:{}", c.variant.label(), c.checksum())),
                None => ids.push("commander:always-fight".into()),
            }
            ids.push(format!("fight:{}", fight.checksum()));
            ids.push(format!("escape:{}", escape.checksum()));
        }
    }
    match opponents {
        OpponentSpec::Team(p) => ids.push(team("opponents", p)),
        OpponentSpec::Options => ids.push("opponents:options".into()),
    }
    ids
}

/// Replays evaluation episode `index` of `cfg` with per-round recording.
pub fn record_episode(
    agents: &AgentSpec,
    opponents: &OpponentSpec,
    cfg: &EvalConfig,
    index: u64,
) -> Result<TrajectoryLog, EvalError> {
    validate_setup(agents, opponents, &cfg.scenario)?;
    let seed = episode_seed(cfg.seed, index);
    let scenario = cfg.scenario.clone().with_seed(seed);
    let mut env = CombatEnv::reset(&scenario)?;
    env.record_rounds();
    let mut stats = CommandStats::default();
    let summary = play(&mut env, agents, opponents, cfg, seed, &mut stats, &mut |_, _| {})?;
    let header = TrajectoryHeader {
        schema_version: TRAJECTORY_SCHEMA_VERSION,
        scenario,
        checkpoints: checkpoint_ids(agents, opponents),
        outcome: Some(summary.outcome),
    };
    Ok(TrajectoryLog::from_rounds(header, env.round_log().unwrap_or_default()))
}

/// Records an episode and writes it to `path`.
pub fn export_trajectory(log: &TrajectoryLog, path: &Path) -> Result<(), EvalError> {
    log.export(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Level;
    use crate::scripted::ScriptLevel;
    use crate::train::CommanderVariant;

    fn quick(episodes: u64) -> EvalConfig {
        let mut scenario = ScenarioConfig::low_level(Level::L1);
        scenario.horizon = 60;
        EvalConfig { scenario, episodes, seed: 3, ..Default::default() }
    }

    #[test]
    fn counters_are_consistent() {
        let cfg = quick(40);
        let r = evaluate(&AgentSpec::LowLevel(TeamPolicy::Random), &OpponentSpec::Team(TeamPolicy::Random), &cfg)
            .unwrap();
        assert_eq!(r.wins + r.losses + r.draws, 40);
        assert!((r.win_rate + r.loss_rate + r.draw_rate - 1.0).abs() < 1e-12);
        let e = r.events;
        assert_eq!(e.kills.total(), e.opponent_deaths - e.opponent_boundary - e.opponent_friendly_kills);
        assert_eq!(e.agent_deaths, e.deaths.total() + e.friendly_kills.total() + e.boundary.total());
        assert_eq!(r.escape.escaped + r.escape.killed, 40);
        assert!(r.commands.is_none());
    }

    #[test]
    fn same_seed_same_report() {
        let cfg = quick(10);
        let a = AgentSpec::LowLevel(TeamPolicy::Random);
        let o = OpponentSpec::Team(TeamPolicy::Scripted(ScriptLevel::L2));
        assert_eq!(evaluate(&a, &o, &cfg).unwrap(), evaluate(&a, &o, &cfg).unwrap());
    }

    #[test]
    fn zero_episodes_rejected() {
        let a = AgentSpec::LowLevel(TeamPolicy::Random);
        let o = OpponentSpec::Team(TeamPolicy::Random);
        assert!(matches!(evaluate(&a, &o, &quick(0)), Err(EvalError::Config(_))));
    }

    #[test]
    fn layout_mismatch_fails_before_playing() {
        let m = LowLevelModel::new(ModelKind::Fight, Framework::Ctce, 3, 3, None, 0).unwrap();
        let a = AgentSpec::LowLevel(TeamPolicy::Model { model: Arc::new(m), greedy: true });
        let o = OpponentSpec::Team(TeamPolicy::Random);
        assert!(matches!(evaluate(&a, &o, &quick(1)), Err(EvalError::Config(_))));

        let f = Arc::new(LowLevelModel::new(ModelKind::Fight, Framework::Ctde, 3, 3, None, 0).unwrap());
        let swapped = AgentSpec::Hierarchical { commander: None, fight: f.clone(), escape: f };
        let mut cfg = quick(1);
        cfg.scenario = ScenarioConfig::commander();
        assert!(matches!(evaluate(&swapped, &OpponentSpec::Options, &cfg), Err(EvalError::Config(_))));
    }

    #[test]
    fn hierarchical_report_has_commands() {
        let f = Arc::new(LowLevelModel::new(ModelKind::Fight, Framework::Ctde, 3, 3, None, 1).unwrap());
        let e = Arc::new(LowLevelModel::new(ModelKind::Escape, Framework::Ctde, 3, 3, None, 2).unwrap());
        let c = Arc::new(CommanderModel::new(CommanderVariant::default(), 3, 3, None, 3).unwrap());
        let mut scenario = ScenarioConfig::commander();
        scenario.horizon = 30;
        let cfg = EvalConfig { scenario, episodes: 3, ..Default::default() };
        let a = AgentSpec::Hierarchical { commander: Some(c), fight: f, escape: e };
        let r = evaluate(&a, &OpponentSpec::Options, &cfg).unwrap();
        let cmd = r.commands.unwrap();
        assert!(cmd.fight + cmd.escape > 0);
        assert!((0.0..=1.0).contains(&cmd.fight_ratio));
    }

    #[test]
    fn sweep_cells() {
        let cells: Vec<SweepCell> =
            ["2v2", "3v3", "2v4", "3v3-PF", "3v3-PE"].iter().map(|s| SweepCell::parse(s).unwrap()).collect();
        assert_eq!(cells[2].n_agents, 2);
        assert_eq!(cells[2].n_opponents, 4);
        let base = ScenarioConfig::commander();
        assert_eq!(cells[3].scenario(&base).opponent_fight_prob, 1.0);
        assert_eq!(cells[4].scenario(&base).opponent_fight_prob, 0.0);
        assert_eq!(cells[1].scenario(&base).opponent_fight_prob, base.opponent_fight_prob);
        assert_eq!(SweepCell::parse("15v15").unwrap().scenario(&base).horizon, 1000);
        assert_eq!(SweepCell::parse("10v10").unwrap().scenario(&base).horizon, 1000);
        for bad in ["3x3", "0v2", "3v3-XX", ""] {
            assert!(SweepCell::parse(bad).is_err(), "{bad}");
        }
        let cfg = EvalConfig { episodes: 2, ..quick(2) };
        let a = AgentSpec::LowLevel(TeamPolicy::Random);
        let o = OpponentSpec::Team(TeamPolicy::Random);
        let reports = scenario_sweep(&a, &o, &cfg, &cells).unwrap();
        assert_eq!(reports.len(), 5);
        assert_eq!(reports[4].label, "3v3-PE");
        assert!(scenario_sweep(&a, &o, &cfg, &[]).is_err());
    }

    #[test]
    fn trajectory_round_trip_and_landmarks() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick(1);
        let a = AgentSpec::LowLevel(TeamPolicy::Random);
        let o = OpponentSpec::Team(TeamPolicy::Scripted(ScriptLevel::L3));
        let mut found = false;
        for i in 0..20 {
            let log = record_episode(&a, &o, &cfg, i).unwrap();
            log.validate().unwrap();
            let path = dir.path().join(format!("t{i}.jsonl"));
            log.export(&path).unwrap();
            assert_eq!(TrajectoryLog::import(&path).unwrap(), log);
            let rounds: Vec<&RoundRecord> = log.rounds().collect();
            for l in log.landmarks() {
                found = true;
                let r = rounds.iter().find(|r| r.round == l.round).unwrap();
                let s = r.aircraft.iter().find(|s| s.id == l.id).unwrap();
                assert!(!s.alive);
                assert_eq!((s.x, s.y), (l.x, l.y));
                // the wreck stays where it was destroyed
                let last = rounds.last().unwrap().aircraft.iter().find(|s| s.id == l.id).unwrap();
                assert_eq!((last.x, last.y), (l.x, l.y));
            }
        }
        assert!(found);
    }

    #[test]
    fn empty_episode_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let header = TrajectoryHeader {
            schema_version: TRAJECTORY_SCHEMA_VERSION,
            scenario: ScenarioConfig::default(),
            checkpoints: vec![],
            outcome: None,
        };
        let log = TrajectoryLog::new(header);
        let path = dir.path().join("empty.jsonl");
        log.export(&path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);
        assert_eq!(TrajectoryLog::import(&path).unwrap(), log);
    }

    #[test]
    fn import_rejects_disorder() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"record\":\"round\",\"round\":1,\"aircraft\":[],\"events\":[]}\n").unwrap();
        assert!(matches!(TrajectoryLog::import(&path), Err(EvalError::Parse { .. })));
        assert!(matches!(TrajectoryLog::import(&dir.path().join("none")), Err(EvalError::Io { .. })));
    }
}
