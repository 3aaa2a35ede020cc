//! Fixed-step combat simulation.
//!
//! Each call to [`World::step_round`] advances the world by one round
//! (0.1 s by default): rocket launches, first-order kinematics, boundary
//! checks, rocket guidance and cannon fire, in that order. Aircraft are
//! resolved by ascending id so a replay with the same seed is bit-identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{ata, distance, HeadingDeg, Vec2};

pub type AircraftId = usize;

/// Kilometres travelled per second at one knot.
pub const KM_PER_S_PER_KNOT: f64 = 1.852 / 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AircraftType {
    #[serde(rename = "AC1")]
    Ac1,
    #[serde(rename = "AC2")]
    Ac2,
}

impl AircraftType {
    pub const ALL: [AircraftType; 2] = [AircraftType::Ac1, AircraftType::Ac2];

    pub fn spec(self) -> AircraftSpec {
        match self {
            AircraftType::Ac1 => AircraftSpec::AC1,
            AircraftType::Ac2 => AircraftSpec::AC2,
        }
    }

    pub fn index(self) -> usize {
        match self {
            AircraftType::Ac1 => 0,
            AircraftType::Ac2 => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AircraftType::Ac1 => "AC1",
            AircraftType::Ac2 => "AC2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Team {
    Agent,
    Opponent,
}

impl Team {
    pub fn enemy(self) -> Team {
        match self {
            Team::Agent => Team::Opponent,
            Team::Opponent => Team::Agent,
        }
    }
}

/// Static performance envelope of an aircraft type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AircraftSpec {
    pub kind: AircraftType,
    /// deg/s
    pub max_turn_rate: f64,
    /// knots
    pub min_speed: f64,
    /// knots
    pub max_speed: f64,
    /// degrees, see [`SimConfig::wez_half_angle`]
    pub wez_angle: f64,
    /// km
    pub wez_range: f64,
    pub hit_prob: f64,
    pub has_rockets: bool,
}

impl AircraftSpec {
    pub const AC1: AircraftSpec = AircraftSpec {
        kind: AircraftType::Ac1,
        max_turn_rate: 5.0,
        min_speed: 100.0,
        max_speed: 900.0,
        wez_angle: 10.0,
        wez_range: 2.0,
        hit_prob: 0.70,
        has_rockets: true,
    };

    pub const AC2: AircraftSpec = AircraftSpec {
        kind: AircraftType::Ac2,
        max_turn_rate: 3.5,
        min_speed: 100.0,
        max_speed: 600.0,
        wez_angle: 7.0,
        wez_range: 4.5,
        hit_prob: 0.85,
        has_rockets: false,
    };

    pub fn is_valid(&self) -> bool {
        self.max_turn_rate > 0.0
            && self.min_speed > 0.0
            && self.min_speed < self.max_speed
            && self.wez_angle > 0.0
            && self.wez_range > 0.0
            && self.hit_prob > 0.0
            && self.hit_prob <= 1.0
    }
}

/// Tunables of the round model that the aircraft table leaves open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub round_seconds: f64,
    /// Table hit probabilities are divided by this to get a per-round kill
    /// chance.
    pub hit_prob_divisor: f64,
    /// When true the WEZ angle is the half-angle from boresight, otherwise the
    /// full cone apex.
    pub wez_half_angle: bool,
    pub rocket_speed: f64,
    pub rocket_cooldown_rounds: u32,
    pub rocket_expiry_rounds: u32,
    pub rocket_kill_radius: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            round_seconds: 0.1,
            hit_prob_divisor: 10.0,
            wez_half_angle: true,
            rocket_speed: 1200.0,
            rocket_cooldown_rounds: 50,
            rocket_expiry_rounds: 300,
            rocket_kill_radius: 0.010,
        }
    }
}

impl SimConfig {
    pub fn round_hit_prob(&self, spec: &AircraftSpec) -> f64 {
        spec.hit_prob / self.hit_prob_divisor
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AircraftState {
    pub id: AircraftId,
    pub team: Team,
    pub spec: AircraftSpec,
    pub pos: Vec2,
    pub heading: HeadingDeg,
    pub target_heading: HeadingDeg,
    /// knots
    pub speed: f64,
    pub cannon_ammo: u32,
    pub rockets: u32,
    pub rocket_cooldown: u32,
    /// Cannon trigger held by the current command.
    pub cannon_trigger: bool,
    /// True in rounds where a cannon shot actually left the barrel.
    pub cannon_firing: bool,
    /// Pending rocket launch request, consumed on the next round.
    pub rocket_request: Option<AircraftId>,
    pub alive: bool,
    pub initial_cannon: u32,
    pub initial_rockets: u32,
    pub cannon_spent: u32,
    pub rockets_spent: u32,
}

impl AircraftState {
    pub fn new(
        id: AircraftId,
        team: Team,
        kind: AircraftType,
        pos: Vec2,
        heading: HeadingDeg,
        speed: f64,
        cannon: u32,
        rockets: u32,
    ) -> Self {
        let spec = kind.spec();
        let rockets = if spec.has_rockets { rockets } else { 0 };
        Self {
            id,
            team,
            spec,
            pos,
            heading,
            target_heading: heading,
            speed: speed.clamp(spec.min_speed, spec.max_speed),
            cannon_ammo: cannon,
            rockets,
            rocket_cooldown: 0,
            cannon_trigger: false,
            cannon_firing: false,
            rocket_request: None,
            alive: true,
            initial_cannon: cannon,
            initial_rockets: rockets,
            cannon_spent: 0,
            rockets_spent: 0,
        }
    }

    pub fn kind(&self) -> AircraftType {
        self.spec.kind
    }

    /// The readiness flag `w`: a rocket is loaded and the launcher has cooled.
    pub fn rocket_ready(&self) -> bool {
        self.spec.has_rockets && self.rockets > 0 && self.rocket_cooldown == 0
    }

    fn turn_toward_target(&mut self, dt: f64) {
        let max_step = self.spec.max_turn_rate * dt;
        let delta = self.heading.delta_to(self.target_heading);
        if delta.abs() <= max_step {
            self.heading = self.target_heading;
        } else {
            self.heading = self.heading.rotated(max_step.copysign(delta));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rocket {
    pub shooter: AircraftId,
    pub target: AircraftId,
    pub pos: Vec2,
    /// knots
    pub speed: f64,
    pub age: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimEvent {
    CannonKill { shooter: AircraftId, victim: AircraftId },
    RocketLaunch { shooter: AircraftId, target: AircraftId },
    RocketKill { shooter: AircraftId, victim: AircraftId },
    OutOfBounds { aircraft: AircraftId },
    RocketExpired { shooter: AircraftId },
}

impl SimEvent {
    /// The aircraft destroyed by this event, if any.
    pub fn victim(&self) -> Option<AircraftId> {
        match *self {
            SimEvent::CannonKill { victim, .. } | SimEvent::RocketKill { victim, .. } => Some(victim),
            SimEvent::OutOfBounds { aircraft } => Some(aircraft),
            _ => None,
        }
    }

    /// Shooter and victim of a weapon kill.
    pub fn kill(&self) -> Option<(AircraftId, AircraftId)> {
        match *self {
            SimEvent::CannonKill { shooter, victim } | SimEvent::RocketKill { shooter, victim } => {
                Some((shooter, victim))
            }
            _ => None,
        }
    }
}

/// Whether `target` sits inside `shooter`'s cannon cone.
pub fn in_wez(shooter: &AircraftState, target: &AircraftState, config: &SimConfig) -> bool {
    let half_angle = if config.wez_half_angle {
        shooter.spec.wez_angle
    } else {
        shooter.spec.wez_angle / 2.0
    };
    distance(shooter.pos, target.pos) <= shooter.spec.wez_range
        && ata(shooter.pos, shooter.heading, target.pos) <= half_angle
}

#[derive(Debug, Clone)]
pub struct World {
    pub aircraft: Vec<AircraftState>,
    pub rockets: Vec<Rocket>,
    /// Side length of the square map, km.
    pub map_size: f64,
    pub round: u64,
    pub config: SimConfig,
    rng: ChaCha8Rng,
}

impl World {
    pub fn new(map_size: f64, config: SimConfig, seed: u64) -> Self {
        Self {
            aircraft: Vec::new(),
            rockets: Vec::new(),
            map_size,
            round: 0,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Adds an aircraft and returns its id (ids are dense, in insertion order).
    #[allow(clippy::too_many_arguments)]
    pub fn spawn(
        &mut self,
        team: Team,
        kind: AircraftType,
        pos: Vec2,
        heading: HeadingDeg,
        speed: f64,
        cannon: u32,
        rockets: u32,
    ) -> AircraftId {
        let id = self.aircraft.len();
        self.aircraft
            .push(AircraftState::new(id, team, kind, pos, heading, speed, cannon, rockets));
        id
    }

    pub fn get(&self, id: AircraftId) -> &AircraftState {
        &self.aircraft[id]
    }

    pub fn get_mut(&mut self, id: AircraftId) -> &mut AircraftState {
        &mut self.aircraft[id]
    }

    pub fn alive_count(&self, team: Team) -> usize {
        self.aircraft.iter().filter(|a| a.alive && a.team == team).count()
    }

    pub fn alive_ids(&self, team: Team) -> impl Iterator<Item = AircraftId> + '_ {
        self.aircraft
            .iter()
            .filter(move |a| a.alive && a.team == team)
            .map(|a| a.id)
    }

    /// Alive aircraft of `team`, nearest to `from` first (ties by id).
    pub fn nearest(&self, from: AircraftId, team: Team) -> Vec<AircraftId> {
        let origin = self.aircraft[from].pos;
        let mut ids: Vec<(f64, AircraftId)> = self
            .aircraft
            .iter()
            .filter(|a| a.alive && a.team == team && a.id != from)
            .map(|a| (distance(origin, a.pos), a.id))
            .collect();
        ids.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ids.into_iter().map(|(_, id)| id).collect()
    }

    pub fn in_bounds(&self, pos: Vec2) -> bool {
        pos.x > 0.0 && pos.x < self.map_size && pos.y > 0.0 && pos.y < self.map_size
    }

    /// Distance from `pos` to the closest map edge (negative when outside).
    pub fn boundary_distance(&self, pos: Vec2) -> f64 {
        pos.x.min(pos.y).min(self.map_size - pos.x).min(self.map_size - pos.y)
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// One cannon shot. Spends one round of ammunition and rolls a kill
    /// against in-cone aircraft of either team, nearest first, stopping at the
    /// first hit.
    pub fn fire_cannon(&mut self, shooter_id: AircraftId) -> Option<SimEvent> {
        let shooter = &self.aircraft[shooter_id];
        if !shooter.alive {
            return None;
        }
        if shooter.cannon_ammo == 0 {
            self.aircraft[shooter_id].cannon_firing = false;
            return None;
        }
        let mut candidates: Vec<(f64, AircraftId)> = self
            .aircraft
            .iter()
            .filter(|t| t.alive && t.id != shooter_id && in_wez(shooter, t, &self.config))
            .map(|t| (distance(shooter.pos, t.pos), t.id))
            .collect();
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let p_round = self.config.round_hit_prob(&shooter.spec);

        let shooter = &mut self.aircraft[shooter_id];
        shooter.cannon_ammo -= 1;
        shooter.cannon_spent += 1;
        shooter.cannon_firing = true;

        for (_, victim) in candidates {
            if self.rng.gen::<f64>() < p_round {
                self.aircraft[victim].alive = false;
                return Some(SimEvent::CannonKill { shooter: shooter_id, victim });
            }
        }
        None
    }

    /// Launches a homing rocket if the shooter carries one and the launcher
    /// has cooled down. Inert for aircraft without rockets.
    pub fn fire_rocket(&mut self, shooter_id: AircraftId, target_id: AircraftId) -> Option<SimEvent> {
        if shooter_id == target_id || !self.aircraft[target_id].alive {
            return None;
        }
        let cooldown = self.config.rocket_cooldown_rounds;
        let speed = self.config.rocket_speed;
        let shooter = &mut self.aircraft[shooter_id];
        if !shooter.alive || !shooter.rocket_ready() {
            return None;
        }
        shooter.rockets -= 1;
        shooter.rockets_spent += 1;
        shooter.rocket_cooldown = cooldown;
        let pos = shooter.pos;
        self.rockets.push(Rocket { shooter: shooter_id, target: target_id, pos, speed, age: 0 });
        Some(SimEvent::RocketLaunch { shooter: shooter_id, target: target_id })
    }

    pub fn step_round(&mut self) -> Vec<SimEvent> {
        let mut events = Vec::new();
        let dt = self.config.round_seconds;
        self.round += 1;

        for a in self.aircraft.iter_mut().filter(|a| a.alive) {
            a.rocket_cooldown = a.rocket_cooldown.saturating_sub(1);
        }

        for id in 0..self.aircraft.len() {
            if let Some(target) = self.aircraft[id].rocket_request.take() {
                if let Some(ev) = self.fire_rocket(id, target) {
                    events.push(ev);
                }
            }
        }

        for a in self.aircraft.iter_mut().filter(|a| a.alive) {
            a.turn_toward_target(dt);
            let step = a.speed * KM_PER_S_PER_KNOT * dt;
            a.pos = a.pos + Vec2::from_heading(a.heading) * step;
        }

        for id in 0..self.aircraft.len() {
            let a = &self.aircraft[id];
            if a.alive && !self.in_bounds(a.pos) {
                self.aircraft[id].alive = false;
                events.push(SimEvent::OutOfBounds { aircraft: id });
            }
        }

        self.advance_rockets(dt, &mut events);

        for id in 0..self.aircraft.len() {
            let a = &self.aircraft[id];
            if !a.alive {
                continue;
            }
            if a.cannon_trigger {
                if let Some(ev) = self.fire_cannon(id) {
                    events.push(ev);
                }
            } else {
                self.aircraft[id].cannon_firing = false;
            }
        }

        events
    }

    fn advance_rockets(&mut self, dt: f64, events: &mut Vec<SimEvent>) {
        let expiry = self.config.rocket_expiry_rounds;
        let kill_radius = self.config.rocket_kill_radius;
        let mut remaining = Vec::with_capacity(self.rockets.len());
        for mut rocket in std::mem::take(&mut self.rockets) {
            let target = &self.aircraft[rocket.target];
            if !target.alive {
                events.push(SimEvent::RocketExpired { shooter: rocket.shooter });
                continue;
            }
            let to_target = target.pos - rocket.pos;
            let dist = to_target.norm();
            let step = rocket.speed * KM_PER_S_PER_KNOT * dt;
            if dist <= step + kill_radius {
                self.aircraft[rocket.target].alive = false;
                events.push(SimEvent::RocketKill { shooter: rocket.shooter, victim: rocket.target });
                continue;
            }
            rocket.pos = rocket.pos + to_target * (step / dist);
            rocket.age += 1;
            if rocket.age >= expiry {
                events.push(SimEvent::RocketExpired { shooter: rocket.shooter });
                continue;
            }
            remaining.push(rocket);
        }
        self.rockets = remaining;
    }
}
