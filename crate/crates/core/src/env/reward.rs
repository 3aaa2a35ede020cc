//! Reward functions for the fight, escape, commander and single-policy
//! baselines. All functions are pure given the events of one env step and the
//! world snapshot at the end of that step.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{RewardConstants, Thresholds};
use super::StepEvent;
use crate::geometry::{ata, distance};
use crate::sim::{AircraftId, SimEvent, Team, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FightVariant {
    Base,
    /// Friendly-fire victims are punished as well as the shooter.
    FriPun,
    /// Each agent also receives a fraction of its teammates' rewards.
    ShFrac,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapeVariant {
    Base,
    /// Per-step bonus/penalty on distance to the nearest opponent.
    Dist,
    /// Like `Dist`, gated on own speed.
    DistSpeed,
}

/// Which low-level reward the environment hands back from `step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "variant")]
pub enum RewardMode {
    None,
    Fight(FightVariant),
    Escape(EscapeVariant),
    Standard,
}

/// Kill reward: the victim's normalized ATA to the shooter plus the fraction
/// of ammunition the shooter has already spent.
pub fn reward_kill_term(ata_component: f64, c_rem: u32, c_max: u32) -> f64 {
    let ammo = if c_max == 0 {
        0.0
    } else {
        (c_max.saturating_sub(c_rem)) as f64 / c_max as f64
    };
    ata_component + ammo
}

fn team_of(world: &World, id: AircraftId) -> Team {
    world.get(id).team
}

/// Kill, death, friendly-kill and boundary terms shared by the fight, escape
/// and standard rewards. `include_kills` toggles the positive kill term.
fn event_terms(
    events: &[StepEvent],
    agent: AircraftId,
    world: &World,
    k: &RewardConstants,
    include_kills: bool,
    friendly_victim: bool,
) -> f64 {
    let team = team_of(world, agent);
    let mut r = 0.0;
    for ev in events {
        match ev.event {
            SimEvent::CannonKill { shooter, victim } | SimEvent::RocketKill { shooter, victim } => {
                let friendly = team_of(world, shooter) == team_of(world, victim);
                if shooter == agent {
                    if friendly {
                        r += k.friendly_kill;
                    } else if include_kills {
                        r += reward_kill_term(
                            ev.kill_ata.unwrap_or(0.0) / 180.0,
                            ev.shooter_ammo_left,
                            ev.shooter_ammo_max,
                        );
                    }
                }
                if victim == agent {
                    if team_of(world, shooter) != team {
                        r += k.destroyed;
                    } else if friendly_victim {
                        r += k.friendly_victim;
                    }
                }
            }
            SimEvent::OutOfBounds { aircraft } if aircraft == agent => r += k.boundary,
            _ => {}
        }
    }
    r
}

/// Distance to the nearest alive opponent, if the agent is alive and any
/// opponent remains.
pub fn nearest_opponent_distance(world: &World, agent: AircraftId) -> Option<f64> {
    let a = world.get(agent);
    if !a.alive {
        return None;
    }
    world
        .nearest(agent, a.team.enemy())
        .first()
        .map(|&o| distance(a.pos, world.get(o).pos))
}

/// Fight reward of one agent for one step. `ShFrac` needs every teammate's
/// base reward; use [`reward_fight_team`] for it.
pub fn reward_fight(
    events: &[StepEvent],
    agent: AircraftId,
    world: &World,
    variant: FightVariant,
    k: &RewardConstants,
) -> f64 {
    match variant {
        FightVariant::Base | FightVariant::ShFrac => event_terms(events, agent, world, k, true, false),
        FightVariant::FriPun => event_terms(events, agent, world, k, true, true),
    }
}

/// Fight rewards for a set of teammates, applying reward sharing when asked.
pub fn reward_fight_team(
    events: &[StepEvent],
    agents: &[AircraftId],
    world: &World,
    variant: FightVariant,
    k: &RewardConstants,
) -> BTreeMap<AircraftId, f64> {
    let own: BTreeMap<AircraftId, f64> =
        agents.iter().map(|&a| (a, reward_fight(events, a, world, variant, k))).collect();
    if variant != FightVariant::ShFrac {
        return own;
    }
    own.iter()
        .map(|(&i, &ri)| {
            let others: f64 = own.iter().filter(|(&j, _)| j != i).map(|(_, &rj)| rj).sum();
            (i, shared_fraction(ri, others, k.share_fraction))
        })
        .collect()
}

pub fn shared_fraction(own: f64, others_sum: f64, rho: f64) -> f64 {
    own + rho * others_sum
}

/// Per-step distance shaping for escape training.
pub fn proximity_term(distance_km: f64, th: &Thresholds, step: f64) -> f64 {
    if distance_km < th.escape_near {
        -step
    } else if distance_km > th.escape_far {
        step
    } else {
        0.0
    }
}

/// Per-step distance shaping gated on speed (knots).
pub fn proximity_speed_term(distance_km: f64, speed_kn: f64, th: &Thresholds, step: f64) -> f64 {
    if distance_km < th.escape_near && speed_kn < th.slow_speed {
        -step
    } else if distance_km > th.escape_far && speed_kn > th.fast_speed {
        step
    } else {
        0.0
    }
}

pub fn reward_escape(
    events: &[StepEvent],
    agent: AircraftId,
    world: &World,
    variant: EscapeVariant,
    th: &Thresholds,
    k: &RewardConstants,
) -> f64 {
    let base = event_terms(events, agent, world, k, false, false);
    let shaping = match (variant, nearest_opponent_distance(world, agent)) {
        (EscapeVariant::Base, _) | (_, None) => 0.0,
        (EscapeVariant::Dist, Some(d)) => proximity_term(d, th, k.proximity_step),
        (EscapeVariant::DistSpeed, Some(d)) => {
            proximity_speed_term(d, world.get(agent).speed, th, k.proximity_step)
        }
    };
    base + shaping
}

/// Single-policy baseline reward: fight terms plus a far-distance bonus but
/// no proximity penalty.
pub fn reward_standard(
    events: &[StepEvent],
    agent: AircraftId,
    world: &World,
    th: &Thresholds,
    k: &RewardConstants,
) -> f64 {
    let base = event_terms(events, agent, world, k, true, false);
    match nearest_opponent_distance(world, agent) {
        Some(d) if d > th.escape_far => base + k.proximity_step,
        _ => base,
    }
}

/// `a` is close enough and pointed at `b` well enough to shoot.
pub fn favorable_situation(world: &World, a: AircraftId, b: AircraftId, th: &Thresholds) -> bool {
    let (sa, sb) = (world.get(a), world.get(b));
    distance(sa.pos, sb.pos) < th.favorable_distance
        && ata(sa.pos, sa.heading, sb.pos) < th.favorable_ata
}

/// Action-assessment reward for commander action `a_c` (0 = escape, `i >= 1`
/// = attack the `i`-th opponent of `sensed`, nearest first). `sensed` holds
/// the alive opponents ordered as in the commander observation.
pub fn reward_action_assessment(
    world: &World,
    agent: AircraftId,
    a_c: usize,
    sensed: &[AircraftId],
    th: &Thresholds,
    k: &RewardConstants,
) -> f64 {
    if a_c == 0 {
        let justified = sensed.iter().any(|&o| {
            let (sa, so) = (world.get(agent), world.get(o));
            so.alive
                && distance(sa.pos, so.pos) < th.favorable_distance
                && ata(so.pos, so.heading, sa.pos) < th.favorable_ata
                && ata(sa.pos, sa.heading, so.pos) > th.escape_facing_away_ata
        });
        return if justified { k.commander_assess } else { 0.0 };
    }
    match sensed.get(a_c - 1) {
        Some(&o) if world.get(o).alive => {
            if favorable_situation(world, agent, o, th) {
                k.commander_assess
            } else {
                0.0
            }
        }
        _ => -k.commander_assess,
    }
}

/// Commander event terms: kills by the agent, its own destruction and
/// boundary exits. Friendly kills are not punished at this level.
pub fn reward_commander_events(
    events: &[StepEvent],
    agent: AircraftId,
    world: &World,
    k: &RewardConstants,
) -> f64 {
    let team = team_of(world, agent);
    let mut r = 0.0;
    for ev in events {
        match ev.event {
            SimEvent::CannonKill { shooter, victim } | SimEvent::RocketKill { shooter, victim } => {
                if shooter == agent && team_of(world, victim) != team {
                    r += k.commander_kill;
                }
                if victim == agent {
                    r += k.commander_destroyed;
                }
            }
            SimEvent::OutOfBounds { aircraft } if aircraft == agent => r += k.commander_boundary,
            _ => {}
        }
    }
    r
}

/// Commander reward for one decision: assessment (optional) plus the event
/// terms accumulated while the option ran.
pub fn reward_commander(
    decision_world: &World,
    agent: AircraftId,
    a_c: usize,
    sensed: &[AircraftId],
    option_events: &[StepEvent],
    end_world: &World,
    assess: bool,
    th: &Thresholds,
    k: &RewardConstants,
) -> f64 {
    let act = if assess {
        reward_action_assessment(decision_world, agent, a_c, sensed, th, k)
    } else {
        0.0
    };
    act + reward_commander_events(option_events, agent, end_world, k)
}

/// Whether the option of `agent` should hand control back to the commander
/// after `steps_in_option` env steps whose events are `step_events`.
pub fn option_terminated(
    world: &World,
    agent: AircraftId,
    steps_in_option: u32,
    step_events: &[StepEvent],
    th: &Thresholds,
) -> bool {
    if steps_in_option >= th.option_steps {
        return true;
    }
    if step_events.iter().any(|e| e.event.victim().is_some()) {
        return true;
    }
    let a = world.get(agent);
    if !a.alive || world.boundary_distance(a.pos) < th.boundary_warning {
        return true;
    }
    let ours: Vec<AircraftId> = world.alive_ids(a.team).collect();
    let theirs: Vec<AircraftId> = world.alive_ids(a.team.enemy()).collect();
    ours.iter().any(|&x| {
        theirs
            .iter()
            .any(|&y| favorable_situation(world, x, y, th) || favorable_situation(world, y, x, th))
    })
}
