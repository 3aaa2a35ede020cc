//! Sweeps team sizes for a scripted L3 team playing
//! hovering L1 opponents, and writes the reports as JSON lines.

use dogfight::env::ScenarioConfig;
use dogfight::eval::{scenario_sweep, write_reports, AgentSpec, OpponentSpec, SweepCell, EvalConfig};
use dogfight::scripted::ScriptLevel;
use dogfight::train::TeamPolicy;

fn main() {
    let out = std::env::temp_dir().join("dogfight-sweep.jsonl");
    let cells: Vec<SweepCell> =
        ["1v1", "2v2", "3v3", "2v4", "4v2"].iter().map(|c| SweepCell::parse(c).expect("cell")).collect();
    let base = EvalConfig {
        scenario: ScenarioConfig::low_level(dogfight::env::Level::L3),
        episodes: 100,
        seed: 17,
        label: "l3-vs-l1".into(),
        ..Default::default()
    };
    let agents = AgentSpec::LowLevel(TeamPolicy::Scripted(ScriptLevel::L3));
    let opponents = OpponentSpec::Team(TeamPolicy::Scripted(ScriptLevel::L1));
    let reports = scenario_sweep(&agents, &opponents, &base, &cells).expect("sweep");
    for r in &reports {
        println!(
            "{:<8} win {:.3} loss {:.3} draw {:.3}  kills {:>4}  boundary {:>4}",
            r.label,
            r.win_rate,
            r.loss_rate,
            r.draw_rate,
            r.events.kills.total(),
            r.events.boundary.total()
        );
    }
    write_reports(&out, &reports).expect("write");
    println!("wrote {}", out.display());
}
