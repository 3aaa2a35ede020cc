//! Measures how a uniformly random team fares against each scripted level
//! and against itself. A useful floor for any trained policy.

use dogfight::env::{Level, ScenarioConfig};
use dogfight::eval::{evaluate, AgentSpec, EvalConfig, OpponentSpec};
use dogfight::scripted::ScriptLevel;
use dogfight::train::TeamPolicy;

fn main() {
    let episodes = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let opponents = [
        ("scripted L1", TeamPolicy::Scripted(ScriptLevel::L1)),
        ("scripted L2", TeamPolicy::Scripted(ScriptLevel::L2)),
        ("scripted L3", TeamPolicy::Scripted(ScriptLevel::L3)),
        ("random", TeamPolicy::Random),
    ];
    println!("random 2v2 team, {episodes} episodes per row");
    for (level, (name, opp)) in [Level::L1, Level::L2, Level::L3, Level::L3].into_iter().zip(opponents) {
        let cfg = EvalConfig { scenario: ScenarioConfig::low_level(level), episodes, seed: 1, ..Default::default() };
        let r = evaluate(&AgentSpec::LowLevel(TeamPolicy::Random), &OpponentSpec::Team(opp), &cfg).expect("eval");
        println!(
            "  vs {name:<12} win {:.3} loss {:.3} draw {:.3}  len {:>5.1}  kills {:>3} deaths {:>3} boundary {:>3}",
            r.win_rate,
            r.loss_rate,
            r.draw_rate,
            r.mean_episode_length,
            r.events.kills.total(),
            r.events.deaths.total(),
            r.events.boundary.total()
        );
    }
}
