//! Scenario recipes and tunable thresholds.

use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::scripted::ScriptConfig;
use crate::sim::SimConfig;

/// Ammunition handed to every aircraft of one side at spawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ammo {
    pub cannon: u32,
    pub rockets: u32,
}

impl Ammo {
    pub const fn new(cannon: u32, rockets: u32) -> Self {
        Self { cannon, rockets }
    }
}

/// Opponent regime of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    L1,
    L2,
    L3,
    L4,
    L5,
    Commander,
}

impl Level {
    pub const CURRICULUM: [Level; 5] = [Level::L1, Level::L2, Level::L3, Level::L4, Level::L5];

    /// 1-based curriculum index; `None` for commander mode.
    pub fn number(self) -> Option<u32> {
        match self {
            Level::L1 => Some(1),
            Level::L2 => Some(2),
            Level::L3 => Some(3),
            Level::L4 => Some(4),
            Level::L5 => Some(5),
            Level::Commander => None,
        }
    }

    pub fn from_number(n: u32) -> Option<Level> {
        Level::CURRICULUM.get((n as usize).checked_sub(1)?).copied()
    }

    pub fn is_scripted(self) -> bool {
        matches!(self, Level::L1 | Level::L2 | Level::L3)
    }

    /// Episode horizon of a curriculum level: 200 steps at L1, +50 per level.
    pub fn horizon(self) -> u32 {
        match self.number() {
            Some(n) => 200 + 50 * (n - 1),
            None => 500,
        }
    }
}

/// Distance, angle and timing thresholds shared by rewards and option
/// termination. Distances in km, angles in degrees, speeds in knots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub favorable_distance: f64,
    pub favorable_ata: f64,
    pub escape_facing_away_ata: f64,
    pub boundary_warning: f64,
    pub escape_near: f64,
    pub escape_far: f64,
    pub slow_speed: f64,
    pub fast_speed: f64,
    /// Maximum env steps an option runs before the commander is asked again.
    pub option_steps: u32,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            favorable_distance: 5.0,
            favorable_ata: 15.0,
            escape_facing_away_ata: 30.0,
            boundary_warning: 5.0,
            escape_near: 6.0,
            escape_far: 13.0,
            slow_speed: 300.0,
            fast_speed: 600.0,
            option_steps: 10,
        }
    }
}

/// Reward magnitudes. Low-level and commander constants are kept apart
/// because the commander uses a flatter scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConstants {
    pub destroyed: f64,
    pub friendly_kill: f64,
    pub boundary: f64,
    pub friendly_victim: f64,
    pub share_fraction: f64,
    pub proximity_step: f64,
    pub commander_kill: f64,
    pub commander_destroyed: f64,
    pub commander_boundary: f64,
    pub commander_assess: f64,
}

impl Default for RewardConstants {
    fn default() -> Self {
        Self {
            destroyed: -2.0,
            friendly_kill: -2.0,
            boundary: -5.0,
            friendly_victim: -2.0,
            share_fraction: 0.5,
            proximity_step: 0.1,
            commander_kill: 1.0,
            commander_destroyed: -1.0,
            commander_boundary: -2.0,
            commander_assess: 0.1,
        }
    }
}

/// Everything needed to generate and run one family of episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_agents: usize,
    pub n_opponents: usize,
    /// Side of the square map, km.
    pub map_size: f64,
    /// Episode length in env steps.
    pub horizon: u32,
    pub agent_ammo: Ammo,
    pub opponent_ammo: Ammo,
    /// Require at least one aircraft of each type in every team of two or
    /// more.
    pub mixed_types: bool,
    /// Probability that an opponent is assigned its fight policy at each
    /// commander step.
    pub opponent_fight_prob: f64,
    pub level: Level,
    pub seed: u64,
    /// Simulation rounds per env step.
    pub rounds_per_step: u32,
    /// Spawn keep-out band along the map edges, as a fraction of map size.
    pub spawn_margin: f64,
    pub thresholds: Thresholds,
    pub rewards: RewardConstants,
    pub script: ScriptConfig,
    pub sim: SimConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::low_level(Level::L1)
    }
}

impl ScenarioConfig {
    /// 2-vs-2 low-level training scenario on a 30 km map.
    pub fn low_level(level: Level) -> Self {
        Self {
            n_agents: 2,
            n_opponents: 2,
            map_size: 30.0,
            horizon: level.horizon(),
            agent_ammo: Ammo::new(200, 5),
            opponent_ammo: Ammo::new(400, 8),
            mixed_types: true,
            opponent_fight_prob: 1.0,
            level,
            seed: 0,
            rounds_per_step: 10,
            spawn_margin: 0.1,
            thresholds: Thresholds::default(),
            rewards: RewardConstants::default(),
            script: ScriptConfig::default(),
            sim: SimConfig::default(),
        }
    }

    /// 3-vs-3 commander scenario on a 50 km map with equal ammunition.
    pub fn commander() -> Self {
        Self {
            n_agents: 3,
            n_opponents: 3,
            map_size: 50.0,
            horizon: 500,
            agent_ammo: Ammo::new(300, 8),
            opponent_ammo: Ammo::new(300, 8),
            opponent_fight_prob: 0.75,
            level: Level::Commander,
            ..Self::low_level(Level::L5)
        }
    }

    pub fn with_teams(mut self, n_agents: usize, n_opponents: usize) -> Self {
        self.n_agents = n_agents;
        self.n_opponents = n_opponents;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let fail = |msg: &str| Err(EnvError::Config(msg.to_string()));
        if self.n_agents == 0 || self.n_opponents == 0 {
            return fail("both teams need at least one aircraft");
        }
        if !(self.map_size > 0.0 && self.map_size.is_finite()) {
            return fail("map_size must be positive");
        }
        if self.horizon == 0 {
            return fail("horizon must be positive");
        }
        if self.rounds_per_step == 0 {
            return fail("rounds_per_step must be positive");
        }
        if !(0.0..=1.0).contains(&self.opponent_fight_prob) {
            return fail("opponent_fight_prob must lie in [0, 1]");
        }
        if !(0.0..0.25).contains(&self.spawn_margin) {
            return fail("spawn_margin must lie in [0, 0.25)");
        }
        if !(self.sim.round_seconds > 0.0 && self.sim.hit_prob_divisor > 0.0) {
            return fail("round_seconds and hit_prob_divisor must be positive");
        }
        self.script.validate().map_err(EnvError::Config)
    }

    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| EnvError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curriculum_horizons() {
        assert_eq!(Level::L1.horizon(), 200);
        assert_eq!(Level::L3.horizon(), 300);
        assert_eq!(Level::L5.horizon(), 400);
        assert_eq!(Level::from_number(4), Some(Level::L4));
        assert_eq!(Level::from_number(0), None);
    }

    #[test]
    fn presets() {
        let low = ScenarioConfig::low_level(Level::L2);
        assert_eq!((low.agent_ammo, low.opponent_ammo), (Ammo::new(200, 5), Ammo::new(400, 8)));
        assert_eq!(low.map_size, 30.0);
        let cmd = ScenarioConfig::commander();
        assert_eq!((cmd.n_agents, cmd.n_opponents), (3, 3));
        assert_eq!(cmd.agent_ammo, cmd.opponent_ammo);
        assert_eq!(cmd.map_size, 50.0);
        assert_eq!(cmd.opponent_fight_prob, 0.75);
    }

    #[test]
    fn validation_rejects_empty_team() {
        let cfg = ScenarioConfig::low_level(Level::L1).with_teams(0, 2);
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::low_level(Level::L1);
        cfg.opponent_fight_prob = 1.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = ScenarioConfig::from_json(r#"{"n_agents": 3, "thresholds": {"favorable_ata": 20}}"#)
            .unwrap();
        assert_eq!(cfg.n_agents, 3);
        assert_eq!(cfg.thresholds.favorable_ata, 20.0);
        assert_eq!(cfg.thresholds.favorable_distance, 5.0);
        assert_eq!(cfg.map_size, 30.0);
    }
}
