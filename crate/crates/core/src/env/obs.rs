//! Observation vectors.
//!
//! Every feature is scaled into `[0, 1]`: positions by the map size,
//! distances by the map diagonal, relative angles by 180, compass headings by
//! 360, speed by the aircraft type's top speed and ammunition by the initial
//! allocation. Slots for entities that do not exist (no friendly left, fewer
//! opponents than sensed) are filled with zeros.

use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::geometry::{angle_off, aspect_angle, ata, distance};
use crate::sim::{AircraftId, AircraftState, AircraftType, World};

/// Length and block structure of an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObsLayout {
    FightAc1,
    FightAc2,
    EscapeAc1,
    EscapeAc2,
    /// Commander observation sensing `opponents` (2 or 3) opponents.
    Commander { opponents: usize },
}

impl ObsLayout {
    pub fn fight(kind: AircraftType) -> Self {
        match kind {
            AircraftType::Ac1 => ObsLayout::FightAc1,
            AircraftType::Ac2 => ObsLayout::FightAc2,
        }
    }

    pub fn escape(kind: AircraftType) -> Self {
        match kind {
            AircraftType::Ac1 => ObsLayout::EscapeAc1,
            AircraftType::Ac2 => ObsLayout::EscapeAc2,
        }
    }

    /// Per-entity block widths, own aircraft first.
    pub fn blocks(self) -> Vec<usize> {
        match self {
            ObsLayout::FightAc1 => vec![12, 9, 6],
            ObsLayout::FightAc2 => vec![10, 9, 6],
            ObsLayout::EscapeAc1 => vec![6, 8, 8, 6],
            ObsLayout::EscapeAc2 => vec![5, 8, 8, 6],
            ObsLayout::Commander { opponents } => {
                let mut b = vec![4];
                b.extend(std::iter::repeat(10).take(opponents));
                b.extend([5, 5]);
                b
            }
        }
    }

    pub fn len(self) -> usize {
        self.blocks().iter().sum()
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsVector {
    pub layout: ObsLayout,
    pub data: Vec<f64>,
}

impl ObsVector {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&v| v as f32).collect()
    }
}

struct Norm {
    size: f64,
    diagonal: f64,
}

impl Norm {
    fn new(world: &World) -> Self {
        Self { size: world.map_size, diagonal: world.map_size * std::f64::consts::SQRT_2 }
    }

    fn x(&self, a: &AircraftState) -> f64 {
        unit(a.pos.x / self.size)
    }

    fn y(&self, a: &AircraftState) -> f64 {
        unit(a.pos.y / self.size)
    }

    fn dist(&self, a: &AircraftState, b: &AircraftState) -> f64 {
        unit(distance(a.pos, b.pos) / self.diagonal)
    }
}

fn unit(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

fn speed(a: &AircraftState) -> f64 {
    unit(a.speed / a.spec.max_speed)
}

fn heading(a: &AircraftState) -> f64 {
    unit(a.heading.value() / 360.0)
}

fn ammo_frac(left: u32, initial: u32) -> f64 {
    if initial == 0 {
        0.0
    } else {
        unit(left as f64 / initial as f64)
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// `from`'s antenna train angle to `to`, scaled to `[0, 1]`.
fn ata_n(from: &AircraftState, to: &AircraftState) -> f64 {
    ata(from.pos, from.heading, to.pos) / 180.0
}

/// Aspect angle of `target` as seen from `observer`, scaled to `[0, 1]`.
fn aa_n(observer: &AircraftState, target: &AircraftState) -> f64 {
    aspect_angle(observer.pos, target.pos, target.heading) / 180.0
}

fn off_n(a: &AircraftState, b: &AircraftState) -> f64 {
    angle_off(a.heading, b.heading) / 180.0
}

fn alive_agent(world: &World, id: AircraftId) -> Result<&AircraftState, EnvError> {
    let a = world.aircraft.get(id).ok_or(EnvError::UnknownAircraft(id))?;
    if !a.alive {
        return Err(EnvError::DeadAircraft(id));
    }
    Ok(a)
}

fn pad(out: &mut Vec<f64>, n: usize) {
    out.extend(std::iter::repeat(0.0).take(n));
}

/// Fight observation: own block, the engaged opponent and the closest
/// friendly. `target` overrides the closest opponent (used when a commander
/// assigns one); a dead or unknown override falls back to the closest.
pub fn build_obs_fight(
    world: &World,
    agent_id: AircraftId,
    target: Option<AircraftId>,
) -> Result<ObsVector, EnvError> {
    let a = alive_agent(world, agent_id)?;
    let layout = ObsLayout::fight(a.kind());
    let norm = Norm::new(world);
    let enemies = world.nearest(agent_id, a.team.enemy());
    let opp = target
        .filter(|&t| world.aircraft.get(t).is_some_and(|o| o.alive && o.team != a.team))
        .or_else(|| enemies.first().copied())
        .map(|id| world.get(id));
    let fr = world.nearest(agent_id, a.team).first().map(|&id| world.get(id));

    let mut v = Vec::with_capacity(layout.len());
    v.extend([norm.x(a), norm.y(a), speed(a), heading(a)]);
    match opp {
        Some(o) => v.extend([off_n(a, o), aa_n(a, o), ata_n(a, o), norm.dist(a, o)]),
        None => pad(&mut v, 4),
    }
    v.push(ammo_frac(a.cannon_ammo, a.initial_cannon));
    if a.kind() == AircraftType::Ac1 {
        v.push(ammo_frac(a.rockets, a.initial_rockets));
        v.push(flag(a.rocket_ready()));
    }
    v.push(flag(a.cannon_firing));

    match opp {
        Some(o) => v.extend([
            norm.x(o),
            norm.y(o),
            speed(o),
            heading(o),
            off_n(o, a),
            aa_n(o, a),
            ata_n(o, a),
            norm.dist(o, a),
            flag(o.cannon_firing),
        ]),
        None => pad(&mut v, 9),
    }
    friendly_block6(&mut v, &norm, a, fr);
    debug_assert_eq!(v.len(), layout.len());
    Ok(ObsVector { layout, data: v })
}

fn friendly_block6(v: &mut Vec<f64>, norm: &Norm, a: &AircraftState, fr: Option<&AircraftState>) {
    match fr {
        Some(f) => v.extend([
            norm.x(f),
            norm.y(f),
            speed(f),
            ata_n(f, a),
            ata_n(a, f),
            norm.dist(f, a),
        ]),
        None => pad(v, 6),
    }
}

/// Escape observation: own block, the two closest opponents and the closest
/// friendly.
pub fn build_obs_escape(world: &World, agent_id: AircraftId) -> Result<ObsVector, EnvError> {
    let a = alive_agent(world, agent_id)?;
    let layout = ObsLayout::escape(a.kind());
    let norm = Norm::new(world);
    let enemies = world.nearest(agent_id, a.team.enemy());
    let fr = world.nearest(agent_id, a.team).first().map(|&id| world.get(id));

    let mut v = Vec::with_capacity(layout.len());
    v.extend([norm.x(a), norm.y(a), speed(a), heading(a), ammo_frac(a.cannon_ammo, a.initial_cannon)]);
    if a.kind() == AircraftType::Ac1 {
        v.push(ammo_frac(a.rockets, a.initial_rockets));
    }
    for slot in 0..2 {
        match enemies.get(slot).map(|&id| world.get(id)) {
            Some(o) => v.extend([
                norm.x(o),
                norm.y(o),
                speed(o),
                heading(o),
                off_n(o, a),
                ata_n(o, a),
                ata_n(a, o),
                norm.dist(o, a),
            ]),
            None => pad(&mut v, 8),
        }
    }
    friendly_block6(&mut v, &norm, a, fr);
    debug_assert_eq!(v.len(), layout.len());
    Ok(ObsVector { layout, data: v })
}

/// Commander observation over the `n_opponents` closest opponents and the two
/// closest friendlies. Opponent slot `i` corresponds to commander action
/// `i + 1`.
pub fn build_obs_commander(
    world: &World,
    agent_id: AircraftId,
    n_opponents: usize,
) -> Result<ObsVector, EnvError> {
    let a = alive_agent(world, agent_id)?;
    let layout = ObsLayout::Commander { opponents: n_opponents };
    let norm = Norm::new(world);
    let enemies = world.nearest(agent_id, a.team.enemy());
    let friends = world.nearest(agent_id, a.team);

    let mut v = Vec::with_capacity(layout.len());
    v.extend([norm.x(a), norm.y(a), speed(a), heading(a)]);
    for slot in 0..n_opponents {
        match enemies.get(slot).map(|&id| world.get(id)) {
            Some(o) => v.extend([
                norm.x(o),
                norm.y(o),
                speed(o),
                heading(o),
                off_n(o, a),
                aa_n(o, a),
                aa_n(a, o),
                ata_n(o, a),
                ata_n(a, o),
                norm.dist(o, a),
            ]),
            None => pad(&mut v, 10),
        }
    }
    for slot in 0..2 {
        match friends.get(slot).map(|&id| world.get(id)) {
            Some(f) => v.extend([norm.x(f), norm.y(f), ata_n(f, a), ata_n(a, f), norm.dist(f, a)]),
            None => pad(&mut v, 5),
        }
    }
    debug_assert_eq!(v.len(), layout.len());
    Ok(ObsVector { layout, data: v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{HeadingDeg, Vec2};
    use crate::sim::{SimConfig, Team};

    fn world_2v2() -> World {
        let mut w = World::new(30.0, SimConfig::default(), 1);
        w.spawn(Team::Agent, AircraftType::Ac1, Vec2::new(5.0, 5.0), HeadingDeg::new(0.0), 500.0, 200, 5);
        w.spawn(Team::Agent, AircraftType::Ac2, Vec2::new(6.0, 4.0), HeadingDeg::new(90.0), 300.0, 200, 5);
        w.spawn(Team::Opponent, AircraftType::Ac1, Vec2::new(5.0, 10.0), HeadingDeg::new(0.0), 900.0, 400, 8);
        w.spawn(Team::Opponent, AircraftType::Ac2, Vec2::new(20.0, 20.0), HeadingDeg::new(180.0), 600.0, 400, 8);
        w
    }

    #[test]
    fn golden_layout_table() {
        assert_eq!(ObsLayout::FightAc1.len(), 27);
        assert_eq!(ObsLayout::FightAc2.len(), 25);
        assert_eq!(ObsLayout::EscapeAc1.len(), 28);
        assert_eq!(ObsLayout::EscapeAc2.len(), 27);
        assert_eq!(ObsLayout::Commander { opponents: 2 }.len(), 34);
        assert_eq!(ObsLayout::Commander { opponents: 3 }.len(), 44);
    }

    #[test]
    fn fight_obs_lengths_and_facing() {
        let w = world_2v2();
        let o = build_obs_fight(&w, 0, None).unwrap();
        assert_eq!(o.len(), 27);
        // agent 0 points straight at opponent 2, which flies away from it
        assert_eq!(o.data[6], 0.0);
        assert_eq!(o.data[5], 0.0);
        assert_eq!(build_obs_fight(&w, 1, None).unwrap().len(), 25);
        assert!(o.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn target_override_switches_opponent_block() {
        let w = world_2v2();
        let closest = build_obs_fight(&w, 0, None).unwrap();
        let far = build_obs_fight(&w, 0, Some(3)).unwrap();
        assert_eq!(far.data[12], 20.0 / 30.0);
        assert_ne!(closest.data[12..21], far.data[12..21]);
        // a friendly is not a valid target
        assert_eq!(build_obs_fight(&w, 0, Some(1)).unwrap(), closest);
    }

    #[test]
    fn missing_friendly_is_zero_filled() {
        let mut w = world_2v2();
        w.aircraft[1].alive = false;
        let o = build_obs_fight(&w, 0, None).unwrap();
        assert!(o.data[21..].iter().all(|&v| v == 0.0));
        let c = build_obs_commander(&w, 0, 2).unwrap();
        assert!(c.data[24..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn escape_second_opponent_zero_filled() {
        let mut w = world_2v2();
        w.aircraft[3].alive = false;
        let o = build_obs_escape(&w, 0).unwrap();
        assert_eq!(o.len(), 28);
        assert!(o.data[14..22].iter().all(|&v| v == 0.0));
        assert_eq!(build_obs_escape(&w, 1).unwrap().len(), 27);
        assert_eq!(build_obs_escape(&w, 0).unwrap(), o);
    }

    #[test]
    fn dead_agent_is_an_error() {
        let mut w = world_2v2();
        w.aircraft[0].alive = false;
        assert_eq!(build_obs_fight(&w, 0, None), Err(EnvError::DeadAircraft(0)));
        assert!(build_obs_escape(&w, 0).is_err());
        assert!(build_obs_commander(&w, 0, 3).is_err());
    }

    #[test]
    fn commander_lengths() {
        let w = world_2v2();
        assert_eq!(build_obs_commander(&w, 0, 2).unwrap().len(), 34);
        assert_eq!(build_obs_commander(&w, 0, 3).unwrap().len(), 44);
    }
}
