//! Rule-based opponents for the first three curriculum levels.
//!
//! - L1 flies straight at minimum speed and never fires.
//! - L2 picks heading and speed uniformly and pulls each trigger with a fixed
//!   probability.
//! - L3 pursues its closest agent, turning toward it with a randomly scaled
//!   correction, slows down as it closes in, fires more readily the better it
//!   is aligned, and now and then breaks away for a few decisions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{LowLevelAction, HEADING_STEP_DEG};
use crate::geometry::{ata, bearing_to, distance, turn_sign, Vec2};
use crate::sim::{AircraftId, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptConfig {
    /// L2 per-decision probability of pulling the cannon and rocket triggers.
    pub random_fire_prob: f64,
    /// L3 firing probability is `max(0, 1 - ATA / fire_ata_scale)`; a
    /// non-positive scale disables firing.
    pub fire_ata_scale: f64,
    /// L3 per-decision probability of starting a flee maneuver.
    pub flee_probability: f64,
    /// Decisions a flee maneuver lasts.
    pub flee_decisions: u32,
    /// Beyond this distance (km) L3 flies at full speed.
    pub full_speed_distance: f64,
    /// At or below this distance (km) L3 flies at `close_speed_fraction`.
    pub close_distance: f64,
    /// Fraction of top speed used at close range.
    pub close_speed_fraction: f64,
    /// Replace the random turn scale with a constant (pure pursuit at 1.0).
    pub forced_turn_scale: Option<f64>,
}

impl Default for ScriptConfig {
    fn default() -> Self {
        Self {
            random_fire_prob: 0.1,
            fire_ata_scale: 45.0,
            flee_probability: 0.05,
            flee_decisions: 5,
            full_speed_distance: 10.0,
            close_distance: 1.0,
            close_speed_fraction: 0.4,
            forced_turn_scale: None,
        }
    }
}

impl ScriptConfig {
    pub fn validate(&self) -> Result<(), String> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.random_fire_prob) || !prob(self.flee_probability) || !prob(self.close_speed_fraction) {
            return Err("script probabilities must lie in [0, 1]".into());
        }
        if self.close_distance >= self.full_speed_distance {
            return Err("close_distance must be below full_speed_distance".into());
        }
        if let Some(r) = self.forced_turn_scale {
            if !(0.0..=1.0).contains(&r) {
                return Err("forced_turn_scale must lie in [0, 1]".into());
            }
        }
        Ok(())
    }

    /// Pure pursuit: full correction every decision, no fleeing, no firing.
    pub fn pure_pursuit() -> Self {
        Self { fire_ata_scale: 0.0, flee_probability: 0.0, forced_turn_scale: Some(1.0), ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScriptLevel {
    L1,
    L2,
    L3,
}

pub fn l1_policy(_world: &World, _id: AircraftId) -> LowLevelAction {
    LowLevelAction::default()
}

pub fn l2_policy(_world: &World, _id: AircraftId, rng: &mut impl Rng, cfg: &ScriptConfig) -> LowLevelAction {
    LowLevelAction {
        heading: rng.gen_range(-6..=6),
        speed: rng.gen_range(0..=8),
        cannon: rng.gen_bool(cfg.random_fire_prob),
        rocket: rng.gen_bool(cfg.random_fire_prob),
    }
}

/// Nearest heading bin for a relative turn, clamped to ±90°.
pub fn quantize_turn(delta_deg: f64) -> i8 {
    (delta_deg / HEADING_STEP_DEG).round().clamp(-6.0, 6.0) as i8
}

/// Clockwise-positive turn direction toward `target`. The determinant is
/// positive for targets on the left, which on a compass means turning
/// counter-clockwise, hence the flip. A target straight behind is broken
/// toward the right.
pub fn pursuit_turn_direction(pos: Vec2, heading_unit: Vec2, target: Vec2) -> f64 {
    match turn_sign(pos, pos + heading_unit, target) {
        1 => -1.0,
        -1 => 1.0,
        _ => {
            if heading_unit.dot(target - pos) < 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Speed level for L3 given the range to its target.
pub fn l3_speed_level(dist_km: f64, min: f64, max: f64, cfg: &ScriptConfig) -> u8 {
    let frac = if dist_km >= cfg.full_speed_distance {
        1.0
    } else if dist_km <= cfg.close_distance {
        cfg.close_speed_fraction
    } else {
        let t = (dist_km - cfg.close_distance) / (cfg.full_speed_distance - cfg.close_distance);
        cfg.close_speed_fraction + t * (1.0 - cfg.close_speed_fraction)
    };
    let knots = (frac * max).clamp(min, max);
    ((knots - min) / (max - min) * 8.0).round() as u8
}

pub fn l3_fire_probability(ata_deg: f64, cfg: &ScriptConfig) -> f64 {
    if cfg.fire_ata_scale <= 0.0 {
        0.0
    } else {
        (1.0 - ata_deg / cfg.fire_ata_scale).max(0.0)
    }
}

/// L3 pursuit decision. `flee_left` counts the remaining decisions of an
/// active flee maneuver and is updated in place.
pub fn l3_policy(
    world: &World,
    id: AircraftId,
    rng: &mut impl Rng,
    flee_left: &mut u32,
    cfg: &ScriptConfig,
) -> LowLevelAction {
    let me = world.get(id);
    let Some(&target_id) = world.nearest(id, me.team.enemy()).first() else {
        return LowLevelAction::default();
    };
    let target = world.get(target_id);

    if *flee_left == 0 && cfg.flee_probability > 0.0 && rng.gen_bool(cfg.flee_probability) {
        *flee_left = cfg.flee_decisions;
    }
    if *flee_left > 0 {
        *flee_left -= 1;
        let away = bearing_to(target.pos, me.pos).unwrap_or(me.heading);
        return LowLevelAction { heading: quantize_turn(me.heading.delta_to(away)), speed: 8, cannon: false, rocket: false };
    }

    let ata_deg = ata(me.pos, me.heading, target.pos);
    let s = pursuit_turn_direction(me.pos, Vec2::from_heading(me.heading), target.pos);
    let r = match cfg.forced_turn_scale {
        Some(r) => r,
        None => rng.gen::<f64>(),
    };
    let heading = quantize_turn(s * r * ata_deg);
    let speed = l3_speed_level(distance(me.pos, target.pos), me.spec.min_speed, me.spec.max_speed, cfg);
    let p_fire = l3_fire_probability(ata_deg, cfg);
    let cannon = rng.gen::<f64>() < p_fire;
    let rocket = rng.gen::<f64>() < p_fire;
    LowLevelAction { heading, speed, cannon, rocket }
}

/// A scripted opponent with its own random stream and flee state.
#[derive(Debug, Clone)]
pub struct ScriptedPilot {
    pub level: ScriptLevel,
    rng: ChaCha8Rng,
    flee_left: u32,
}

impl ScriptedPilot {
    pub fn new(level: ScriptLevel, seed: u64) -> Self {
        Self { level, rng: ChaCha8Rng::seed_from_u64(seed), flee_left: 0 }
    }

    pub fn fleeing(&self) -> bool {
        self.flee_left > 0
    }

    pub fn act(&mut self, world: &World, id: AircraftId, cfg: &ScriptConfig) -> LowLevelAction {
        match self.level {
            ScriptLevel::L1 => l1_policy(world, id),
            ScriptLevel::L2 => l2_policy(world, id, &mut self.rng, cfg),
            ScriptLevel::L3 => l3_policy(world, id, &mut self.rng, &mut self.flee_left, cfg),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::HeadingDeg;
    use crate::sim::{AircraftType, SimConfig, Team};

    fn duel(opp_heading: f64, agent: Vec2) -> World {
        let mut w = World::new(30.0, SimConfig::default(), 0);
        w.spawn(Team::Agent, AircraftType::Ac1, agent, HeadingDeg::new(0.0), 300.0, 10, 0);
        w.spawn(Team::Opponent, AircraftType::Ac1, Vec2::new(15.0, 15.0), HeadingDeg::new(opp_heading), 300.0, 10, 0);
        w
    }

    #[test]
    fn l1_is_idle() {
        let w = duel(0.0, Vec2::new(15.0, 20.0));
        assert_eq!(l1_policy(&w, 1), LowLevelAction { heading: 0, speed: 0, cannon: false, rocket: false });
    }

    #[test]
    fn l3_pursuit_directions() {
        let cfg = ScriptConfig::pure_pursuit();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut flee = 0;
        let ahead = duel(0.0, Vec2::new(15.0, 20.0));
        assert_eq!(l3_policy(&ahead, 1, &mut rng, &mut flee, &cfg).heading, 0);
        let right = duel(0.0, Vec2::new(20.0, 15.0));
        assert_eq!(l3_policy(&right, 1, &mut rng, &mut flee, &cfg).heading, 6);
        let left = duel(0.0, Vec2::new(10.0, 15.0));
        assert_eq!(l3_policy(&left, 1, &mut rng, &mut flee, &cfg).heading, -6);
        let behind = duel(0.0, Vec2::new(15.0, 10.0));
        assert_eq!(l3_policy(&behind, 1, &mut rng, &mut flee, &cfg).heading, 6);
    }

    #[test]
    fn l3_speed_schedule() {
        let cfg = ScriptConfig::default();
        assert_eq!(l3_speed_level(12.0, 100.0, 900.0, &cfg), 8);
        // 40% of 900 kn = 360 kn -> level 2.6 -> 3
        assert_eq!(l3_speed_level(0.5, 100.0, 900.0, &cfg), 3);
        assert!(l3_speed_level(5.0, 100.0, 900.0, &cfg) < 8);
    }

    #[test]
    fn fire_probability() {
        let cfg = ScriptConfig::default();
        assert_eq!(l3_fire_probability(0.0, &cfg), 1.0);
        assert_eq!(l3_fire_probability(45.0, &cfg), 0.0);
        assert_eq!(l3_fire_probability(90.0, &cfg), 0.0);
        assert_eq!(l3_fire_probability(0.0, &ScriptConfig::pure_pursuit()), 0.0);
    }

    #[test]
    fn flee_turns_away_at_full_speed() {
        let cfg = ScriptConfig { flee_probability: 1.0, ..ScriptConfig::default() };
        let w = duel(0.0, Vec2::new(15.0, 20.0));
        let mut pilot = ScriptedPilot::new(ScriptLevel::L3, 1);
        let a = pilot.act(&w, 1, &cfg);
        assert_eq!((a.heading.abs(), a.speed, a.cannon), (6, 8, false));
        assert!(pilot.fleeing());
    }

    #[test]
    fn l2_is_reproducible() {
        let w = duel(0.0, Vec2::new(15.0, 20.0));
        let cfg = ScriptConfig::default();
        let mut a = ScriptedPilot::new(ScriptLevel::L2, 9);
        let mut b = ScriptedPilot::new(ScriptLevel::L2, 9);
        for _ in 0..100 {
            assert_eq!(a.act(&w, 1, &cfg), b.act(&w, 1, &cfg));
        }
    }
}
