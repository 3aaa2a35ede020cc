//! Level-by-level low-level training with a league archive of frozen
//! snapshots, escape training, and the single-policy baseline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::buffer::RolloutBuffer;
use super::model::{Framework, LowLevelModel, ModelKind};
use super::ppo::ppo_update;
use super::rollout::{run_episode, OpponentPolicy, TeamPolicy};
use super::{io_err, mix_seed, MetricsLog, MetricsRecord, PpoConfig, TrainError};
use crate::env::{CombatEnv, EscapeVariant, FightVariant, Level, Outcome, RewardMode, ScenarioConfig};
use crate::nn::Body;
use crate::scripted::ScriptLevel;

/// Opponent rule at L5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L5Rule {
    /// Each episode draws one of the L1..L4 snapshots uniformly.
    League,
    /// The L4 snapshot only.
    PreviousLevel,
}

/// Frozen snapshots indexed by the curriculum level that produced them.
#[derive(Debug, Clone, Default)]
pub struct LeagueArchive {
    snapshots: BTreeMap<u32, Arc<LowLevelModel>>,
}

impl LeagueArchive {
    pub fn insert(&mut self, level: Level, model: &LowLevelModel) -> Result<String, TrainError> {
        let n = level.number().ok_or_else(|| TrainError::Config("only curriculum levels are archived".into()))?;
        let m = Arc::new(model.clone());
        let sum = m.checksum();
        self.snapshots.insert(n, m);
        Ok(sum)
    }

    pub fn get(&self, level: Level) -> Option<&Arc<LowLevelModel>> {
        self.snapshots.get(&level.number()?)
    }

    pub fn levels(&self) -> Vec<Level> {
        self.snapshots.keys().filter_map(|&n| Level::from_number(n)).collect()
    }

    fn require(&self, level: Level, for_level: Level) -> Result<Arc<LowLevelModel>, TrainError> {
        debug_assert!(level.number() < for_level.number());
        self.get(level)
            .cloned()
            .ok_or_else(|| TrainError::Missing(format!("{level:?} snapshot needed for {for_level:?}")))
    }

    /// Opponents for training at `level`: scripted up to L3, the frozen L3
    /// snapshot at L4, and at L5 either the L1..L4 league or the L4
    /// snapshot. Only snapshots of strictly earlier levels are used.
    pub fn opponents_for(&self, level: Level, rule: L5Rule, greedy: bool) -> Result<OpponentPolicy, TrainError> {
        let frozen = |m: Arc<LowLevelModel>| TeamPolicy::Model { model: m, greedy };
        Ok(match level {
            Level::L1 => OpponentPolicy::single(TeamPolicy::Scripted(ScriptLevel::L1)),
            Level::L2 => OpponentPolicy::single(TeamPolicy::Scripted(ScriptLevel::L2)),
            Level::L3 => OpponentPolicy::single(TeamPolicy::Scripted(ScriptLevel::L3)),
            Level::L4 => OpponentPolicy::single(frozen(self.require(Level::L3, level)?)),
            Level::L5 => match rule {
                L5Rule::PreviousLevel => OpponentPolicy::single(frozen(self.require(Level::L4, level)?)),
                L5Rule::League => OpponentPolicy {
                    pool: [Level::L1, Level::L2, Level::L3, Level::L4]
                        .into_iter()
                        .map(|l| self.require(l, level).map(frozen))
                        .collect::<Result<_, _>>()?,
                },
            },
            Level::Commander => return Err(TrainError::Config("commander level has no league".into())),
        })
    }

    pub fn save(&self, dir: &Path) -> Result<(), TrainError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        for (n, m) in &self.snapshots {
            let mut meta = BTreeMap::new();
            meta.insert("level".to_string(), n.to_string());
            m.save(&dir.join(format!("L{n}.model")), &meta, false)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, TrainError> {
        let mut a = Self::default();
        for n in 1..=5u32 {
            let p = dir.join(format!("L{n}.model"));
            if p.exists() {
                a.snapshots.insert(n, Arc::new(LowLevelModel::load(&p)?.0));
            }
        }
        Ok(a)
    }
}

/// One training phase against a fixed opponent pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRunConfig {
    pub phase: String,
    /// Separates the random streams of different phases of one run.
    pub stream: u64,
    pub scenario: ScenarioConfig,
    pub reward: RewardMode,
    pub ppo: PpoConfig,
    /// Env-step budget; the phase stops after the first update that reaches it.
    pub env_steps: u64,
    pub seed: u64,
}

/// Counters that make a phase resumable.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseProgress {
    pub update: u64,
    pub env_steps: u64,
    pub episodes: u64,
}

/// Trains `model` until the budget is spent. Every update draws its
/// episodes and minibatch order from a stream derived from
/// `(seed, stream, update)` only, so a resumed run repeats the batches of an
/// uninterrupted one. `after_update` runs after each update (checkpointing).
pub fn train_level(
    model: &mut LowLevelModel,
    opponents: &OpponentPolicy,
    cfg: &LevelRunConfig,
    log: &mut MetricsLog,
    progress: &mut PhaseProgress,
    after_update: &mut dyn FnMut(&LowLevelModel, &PhaseProgress) -> Result<(), TrainError>,
) -> Result<(), TrainError> {
    cfg.ppo.validate()?;
    cfg.scenario.validate()?;
    let frozen_before = opponents.frozen_checksums();
    while progress.env_steps < cfg.env_steps {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, cfg.stream, progress.update));
        let learner = TeamPolicy::Model { model: Arc::new(model.clone()), greedy: false };
        let mut buffer = RolloutBuffer::default();
        let (mut eps, mut steps, mut reward, mut wins) = (0u64, 0u64, 0.0, 0u64);
        while buffer.len() < cfg.ppo.batch_size {
            let ep_seed: u64 = rng.gen();
            let opp = opponents.pick(&mut rng);
            let mut env = CombatEnv::reset(&cfg.scenario.clone().with_seed(ep_seed))?;
            let s = run_episode(&mut env, &learner, opp, cfg.reward, ep_seed, Some(&mut buffer), &mut |_, _| {})?;
            eps += 1;
            steps += s.steps as u64;
            reward += s.reward;
            wins += (s.outcome == Outcome::Win) as u64;
        }
        let stats = ppo_update(&mut model.nets, &mut buffer, &cfg.ppo, &mut rng)?;
        progress.update += 1;
        progress.env_steps += steps;
        progress.episodes += eps;
        log.push(MetricsRecord {
            phase: cfg.phase.clone(),
            update: progress.update,
            env_steps: progress.env_steps,
            episodes: progress.episodes,
            mean_episode_reward: reward / eps as f64,
            mean_episode_length: steps as f64 / eps as f64,
            win_rate: wins as f64 / eps as f64,
            stats,
        })?;
        after_update(model, progress)?;
    }
    if opponents.frozen_checksums() != frozen_before {
        return Err(TrainError::FrozenChanged(cfg.phase.clone()));
    }
    Ok(())
}

/// Run directory helper: `config.json`, `metrics.jsonl`, `state.json`,
/// model bundles and the `league/` archive.
struct RunDir(Option<PathBuf>);

impl RunDir {
    fn create(dir: Option<&Path>) -> Result<Self, TrainError> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d).map_err(io_err(d))?;
        }
        Ok(Self(dir.map(Path::to_path_buf)))
    }

    fn path(&self, name: &str) -> Option<PathBuf> {
        self.0.as_ref().map(|d| d.join(name))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), TrainError> {
        if let Some(p) = self.path(name) {
            let text = serde_json::to_string_pretty(value).expect("serializable");
            std::fs::write(&p, text).map_err(io_err(&p))?;
        }
        Ok(())
    }

    fn read_json<T: DeserializeOwned>(&self, name: &str) -> Result<Option<T>, TrainError> {
        match self.path(name) {
            Some(p) if p.exists() => {
                let text = std::fs::read_to_string(&p).map_err(io_err(&p))?;
                serde_json::from_str(&text).map(Some).map_err(|e| TrainError::Config(format!("{}: {e}", p.display())))
            }
            _ => Ok(None),
        }
    }

    fn metrics(&self) -> Result<MetricsLog, TrainError> {
        MetricsLog::open(self.path("metrics.jsonl").as_deref())
    }

    fn save_model(&self, name: &str, model: &LowLevelModel) -> Result<(), TrainError> {
        match self.path(name) {
            Some(p) => model.save(&p, &BTreeMap::new(), true),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CurriculumState {
    level_index: usize,
    progress: PhaseProgress,
}

/// Curriculum over a list of levels with one env-step budget per level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumConfig {
    pub levels: Vec<Level>,
    pub steps_per_level: u64,
    /// Base scenario; level and horizon are set per level.
    pub scenario: ScenarioConfig,
    pub reward: RewardMode,
    pub ppo: PpoConfig,
    pub framework: Framework,
    pub body: Option<Body>,
    pub l5_rule: L5Rule,
    /// Frozen league opponents act greedily instead of sampling.
    pub frozen_greedy: bool,
    pub seed: u64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            levels: Level::CURRICULUM.to_vec(),
            steps_per_level: 200_000,
            scenario: ScenarioConfig::low_level(Level::L1),
            reward: RewardMode::Fight(FightVariant::Base),
            ppo: PpoConfig::default(),
            framework: Framework::Ctde,
            body: None,
            l5_rule: L5Rule::League,
            frozen_greedy: false,
            seed: 0,
        }
    }
}

pub fn level_scenario(base: &ScenarioConfig, level: Level) -> ScenarioConfig {
    ScenarioConfig { level, horizon: level.horizon(), ..base.clone() }
}

/// Trains a fight policy through `cfg.levels`, archiving a snapshot at the
/// end of every level. With a run directory, state is checkpointed after
/// every update and `resume` continues an interrupted run.
pub fn run_curriculum(
    cfg: &CurriculumConfig,
    run_dir: Option<&Path>,
    resume: bool,
) -> Result<(LowLevelModel, LeagueArchive, Vec<MetricsRecord>), TrainError> {
    if cfg.levels.is_empty() || cfg.levels.iter().any(|l| l.number().is_none()) {
        return Err(TrainError::Config("levels must be a non-empty list of L1..L5".into()));
    }
    let dir = RunDir::create(run_dir)?;
    let kind = match cfg.reward {
        RewardMode::Escape(_) => ModelKind::Escape,
        RewardMode::Standard => ModelKind::Standard,
        _ => ModelKind::Fight,
    };
    let state: Option<CurriculumState> = if resume { dir.read_json("state.json")? } else { None };
    let (mut model, mut league, mut state) = match (state, dir.path("model.bin")) {
        (Some(s), Some(p)) => {
            let league = LeagueArchive::load(&dir.path("league").expect("run dir"))?;
            (LowLevelModel::load(&p)?.0, league, s)
        }
        _ => {
            let model = LowLevelModel::new(
                kind,
                cfg.framework,
                cfg.scenario.n_agents,
                cfg.scenario.n_opponents,
                cfg.body,
                cfg.seed,
            )?;
            (model, LeagueArchive::default(), CurriculumState { level_index: 0, progress: PhaseProgress::default() })
        }
    };
    dir.write_json("config.json", cfg)?;
    let mut log = dir.metrics()?;
    while state.level_index < cfg.levels.len() {
        let level = cfg.levels[state.level_index];
        let opponents = league.opponents_for(level, cfg.l5_rule, cfg.frozen_greedy)?;
        let run = LevelRunConfig {
            phase: format!("{level:?}"),
            stream: level.number().unwrap_or(0) as u64,
            scenario: level_scenario(&cfg.scenario, level),
            reward: cfg.reward,
            ppo: cfg.ppo,
            env_steps: cfg.steps_per_level,
            seed: cfg.seed,
        };
        let idx = state.level_index;
        train_level(&mut model, &opponents, &run, &mut log, &mut state.progress, &mut |m, p| {
            dir.save_model("model.bin", m)?;
            dir.write_json("state.json", &CurriculumState { level_index: idx, progress: *p })
        })?;
        league.insert(level, &model)?;
        if let Some(p) = dir.path("league") {
            league.save(&p)?;
        }
        state = CurriculumState { level_index: idx + 1, progress: PhaseProgress::default() };
        dir.write_json("state.json", &state)?;
    }
    dir.save_model("final.model", &model)?;
    Ok((model, league, log.records))
}

/// Escape training: phase one against scripted L3 opponents, phase two
/// against a frozen fight policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EscapeTrainConfig {
    pub scenario: ScenarioConfig,
    pub variant: EscapeVariant,
    pub ppo: PpoConfig,
    pub framework: Framework,
    pub phase1_steps: u64,
    pub phase2_steps: u64,
    pub horizon: u32,
    pub frozen_greedy: bool,
    pub seed: u64,
}

impl Default for EscapeTrainConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::low_level(Level::L3),
            variant: EscapeVariant::Base,
            ppo: PpoConfig::default(),
            framework: Framework::Ctde,
            phase1_steps: 200_000,
            phase2_steps: 200_000,
            horizon: 300,
            frozen_greedy: false,
            seed: 0,
        }
    }
}

pub fn train_escape(
    cfg: &EscapeTrainConfig,
    fight_l5: Option<Arc<LowLevelModel>>,
    run_dir: Option<&Path>,
) -> Result<(LowLevelModel, Vec<MetricsRecord>), TrainError> {
    if cfg.phase2_steps > 0 && fight_l5.is_none() {
        return Err(TrainError::Missing("L5 fight policy needed for escape phase two".into()));
    }
    let dir = RunDir::create(run_dir)?;
    dir.write_json("config.json", cfg)?;
    let mut log = dir.metrics()?;
    let s = &cfg.scenario;
    let mut model = LowLevelModel::new(ModelKind::Escape, cfg.framework, s.n_agents, s.n_opponents, None, cfg.seed)?;
    let scenario = ScenarioConfig { level: Level::L3, horizon: cfg.horizon, ..s.clone() };
    let mut phases = vec![(
        "escape-L3",
        1,
        cfg.phase1_steps,
        OpponentPolicy::single(TeamPolicy::Scripted(ScriptLevel::L3)),
    )];
    if let Some(f) = fight_l5 {
        phases.push(("escape-fight", 2, cfg.phase2_steps, OpponentPolicy::single(TeamPolicy::Model { model: f, greedy: cfg.frozen_greedy })));
    }
    for (phase, stream, steps, opponents) in phases {
        let run = LevelRunConfig {
            phase: phase.into(),
            stream,
            scenario: scenario.clone(),
            reward: RewardMode::Escape(cfg.variant),
            ppo: cfg.ppo,
            env_steps: steps,
            seed: cfg.seed,
        };
        let mut progress = PhaseProgress::default();
        train_level(&mut model, &opponents, &run, &mut log, &mut progress, &mut |m, _| dir.save_model("model.bin", m))?;
    }
    dir.save_model("final.model", &model)?;
    Ok((model, log.records))
}

/// Centralized single-policy baseline trained directly at L3 with the
/// combined reward; metrics use the curriculum format.
pub fn train_standard_baseline(
    scenario: &ScenarioConfig,
    ppo: &PpoConfig,
    env_steps: u64,
    seed: u64,
    run_dir: Option<&Path>,
) -> Result<(LowLevelModel, Vec<MetricsRecord>), TrainError> {
    let dir = RunDir::create(run_dir)?;
    let mut log = dir.metrics()?;
    let mut model =
        LowLevelModel::new(ModelKind::Standard, Framework::Ctce, scenario.n_agents, scenario.n_opponents, None, seed)?;
    let run = LevelRunConfig {
        phase: "standard".into(),
        stream: 3,
        scenario: level_scenario(scenario, Level::L3),
        reward: RewardMode::Standard,
        ppo: *ppo,
        env_steps,
        seed,
    };
    dir.write_json("config.json", &run)?;
    let opponents = OpponentPolicy::single(TeamPolicy::Scripted(ScriptLevel::L3));
    let mut progress = PhaseProgress::default();
    train_level(&mut model, &opponents, &run, &mut log, &mut progress, &mut |m, _| dir.save_model("model.bin", m))?;
    dir.save_model("final.model", &model)?;
    Ok((model, log.records))
}
