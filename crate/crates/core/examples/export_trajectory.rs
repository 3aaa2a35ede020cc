//! Records one evaluation episode round by round, writes it as JSON lines,
//! reads it back and summarizes where each aircraft ended.

use dogfight::env::{Level, ScenarioConfig};
use dogfight::eval::{export_trajectory, record_episode, AgentSpec, EvalConfig, OpponentSpec, TrajectoryLog};
use dogfight::scripted::ScriptLevel;
use dogfight::train::TeamPolicy;

fn main() {
    let index = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let path = std::env::temp_dir().join(format!("dogfight-episode-{index}.jsonl"));
    let cfg = EvalConfig { scenario: ScenarioConfig::low_level(Level::L3), seed: 3, ..Default::default() };
    let agents = AgentSpec::LowLevel(TeamPolicy::Scripted(ScriptLevel::L3));
    let opponents = OpponentSpec::Team(TeamPolicy::Scripted(ScriptLevel::L2));
    let log = record_episode(&agents, &opponents, &cfg, index).expect("episode");
    export_trajectory(&log, &path).expect("export");

    let back = TrajectoryLog::import(&path).expect("import");
    assert_eq!(back, log);
    let rounds = back.rounds().count();
    println!("{}: {rounds} rounds, outcome {:?}", path.display(), back.header.outcome);
    for m in back.landmarks() {
        let by = m.shooter.map_or(String::new(), |s| format!(" by aircraft {s}"));
        println!("  round {:>5}: {:?} {:?} {} down at ({:.1}, {:.1}), {:?}{by}", m.round, m.team, m.kind, m.id, m.x, m.y, m.cause);
    }
    if let Some(last) = back.rounds().last() {
        for a in last.aircraft.iter().filter(|a| a.alive) {
            println!("  survivor {:?} {:?} {} at ({:.1}, {:.1})", a.team, a.kind, a.id, a.x, a.y);
        }
    }
}
