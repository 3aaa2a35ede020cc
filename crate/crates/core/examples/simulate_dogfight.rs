//! Flies a scripted L3 pursuer against a hovering L1 target at the
//! simulator level and narrates every weapon event.

use dogfight::env::{CombatEnv, Level, RewardMode, ScenarioConfig};
use dogfight::geometry::{ata, distance};
use dogfight::scripted::{ScriptLevel, ScriptedPilot};
use dogfight::sim::SimEvent;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let cfg = ScenarioConfig::low_level(Level::L3).with_teams(1, 1).with_seed(seed);
    let mut env = CombatEnv::reset(&cfg).expect("valid scenario");
    let (agent, opp) = (env.agent_ids()[0], env.opponent_ids()[0]);
    let mut hunter = ScriptedPilot::new(ScriptLevel::L3, seed);
    let mut target = ScriptedPilot::new(ScriptLevel::L1, seed);
    println!(
        "seed {seed}: {:?} hunter vs {:?} target, {:.1} km apart",
        env.world.get(opp).kind(),
        env.world.get(agent).kind(),
        distance(env.world.get(opp).pos, env.world.get(agent).pos)
    );
    while !env.is_done() {
        let actions = [
            (agent, target.act(&env.world, agent, &env.config.script)),
            (opp, hunter.act(&env.world, opp, &env.config.script)),
        ];
        let out = env.step(&actions, RewardMode::None).expect("episode running");
        for ev in &out.events {
            match ev.event {
                SimEvent::RocketLaunch { .. } | SimEvent::CannonKill { .. } | SimEvent::RocketKill { .. } => {
                    println!("  round {:>5}: {:?}", ev.round, ev.event)
                }
                SimEvent::OutOfBounds { aircraft } => println!("  round {:>5}: aircraft {aircraft} left the map", ev.round),
                _ => {}
            }
        }
        if env.steps % 20 == 0 {
            let (h, t) = (env.world.get(opp), env.world.get(agent));
            println!(
                "  step {:>3}: range {:>5.2} km, hunter ATA {:>5.1} deg, speed {:>3.0} kn",
                env.steps,
                distance(h.pos, t.pos),
                ata(h.pos, h.heading, t.pos),
                h.speed
            );
        }
    }
    println!("outcome for the target's side: {:?} after {} steps", env.outcome, env.steps);
}
