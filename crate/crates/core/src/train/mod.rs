//! PPO training: rollout storage and advantage estimation, the clipped
//! policy update, low-level curriculum and league play, and commander
//! training over frozen low-level options.

pub mod buffer;
pub mod commander;
pub mod curriculum;
pub mod model;
pub mod ppo;
pub mod rollout;

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use buffer::{compute_gae, normalize_advantages, GaeOutput, RolloutBuffer, Trajectory, Transition};
pub use commander::{train_commander, CommanderConfig, CommanderModel, CommanderVariant, OptionChoice};
pub use curriculum::{
    run_curriculum, train_escape, train_level, train_standard_baseline, CurriculumConfig, EscapeTrainConfig,
    L5Rule, LeagueArchive, LevelRunConfig,
};
pub use model::{Framework, LowLevelModel, ModelKind};
pub use ppo::{clipped_surrogate, ppo_update, UpdateStats};
pub use rollout::{EpisodeSummary, OpponentPolicy, TeamPolicy};

use crate::env::EnvError;
use crate::nn::{AdamConfig, NnError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("rollout buffer is empty")]
    EmptyBuffer,
    #[error("buffer holds {got} transitions, update needs {need}")]
    BatchTooSmall { got: usize, need: usize },
    #[error("malformed buffer: {0}")]
    Buffer(String),
    #[error("non-finite loss: {0}")]
    NonFinite(String),
    #[error("missing prerequisite: {0}")]
    Missing(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("frozen parameters changed: {0}")]
    FrozenChanged(String),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io { path: path.to_path_buf(), source }
}

/// PPO hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub lr: f64,
    pub gamma: f64,
    pub clip: f64,
    /// Transitions collected before each update.
    pub batch_size: usize,
    pub epochs: usize,
    pub minibatches: usize,
    pub gae_lambda: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub adam: AdamConfig,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            gamma: 0.95,
            clip: 0.2,
            batch_size: 2000,
            epochs: 5,
            minibatches: 4,
            gae_lambda: 0.95,
            entropy_coef: 0.0,
            value_coef: 0.5,
            max_grad_norm: 1.0,
            adam: AdamConfig::default(),
        }
    }
}

impl PpoConfig {
    /// Commander updates use smaller batches.
    pub fn high_level() -> Self {
        Self { batch_size: 1000, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(0.0..1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1)");
        }
        if !(self.clip > 0.0) {
            return fail("clip must be positive");
        }
        if self.batch_size == 0 || self.epochs == 0 || self.minibatches == 0 {
            return fail("batch_size, epochs and minibatches must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return fail("gae_lambda must lie in [0, 1]");
        }
        if !(self.lr > 0.0 && self.max_grad_norm > 0.0) {
            return fail("lr and max_grad_norm must be positive");
        }
        Ok(())
    }
}

/// Deterministic seed derivation so every update (and every episode in it)
/// has a stream that does not depend on what ran before.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One line of `metrics.jsonl`, written after every update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub phase: String,
    pub update: u64,
    pub env_steps: u64,
    pub episodes: u64,
    pub mean_episode_reward: f64,
    pub mean_episode_length: f64,
    pub win_rate: f64,
    pub stats: UpdateStats,
}

/// Appends metrics records; `None` path discards them.
pub struct MetricsLog {
    file: Option<std::fs::File>,
    path: PathBuf,
    pub records: Vec<MetricsRecord>,
}

impl MetricsLog {
    pub fn open(path: Option<&Path>) -> Result<Self, TrainError> {
        let file = match path {
            Some(p) => Some(
                std::fs::OpenOptions::new().create(true).append(true).open(p).map_err(io_err(p))?,
            ),
            None => None,
        };
        Ok(Self { file, path: path.map(Path::to_path_buf).unwrap_or_default(), records: Vec::new() })
    }

    pub fn push(&mut self, rec: MetricsRecord) -> Result<(), TrainError> {
        if let Some(f) = &mut self.file {
            let line = serde_json::to_string(&rec).expect("metrics serialize");
            writeln!(f, "{line}").map_err(io_err(&self.path))?;
        }
        self.records.push(rec);
        Ok(())
    }
}
