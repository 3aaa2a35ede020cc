//! Trains a fight policy through the first curriculum levels with a run
//! directory, then evaluates it against the hardest scripted opponent.
//!
//! `cargo run --release --example train_curriculum -- [steps_per_level] [run_dir]`

use std::path::PathBuf;
use std::sync::Arc;

use dogfight::env::{Level, ScenarioConfig};
use dogfight::eval::{evaluate, AgentSpec, EvalConfig, OpponentSpec};
use dogfight::scripted::ScriptLevel;
use dogfight::train::{run_curriculum, CurriculumConfig, TeamPolicy};

fn main() {
    let mut args = std::env::args().skip(1);
    let steps = args.next().and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let dir = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("dogfight-curriculum"));
    let cfg = CurriculumConfig {
        levels: vec![Level::L1, Level::L2, Level::L3],
        steps_per_level: steps,
        seed: 4,
        ..Default::default()
    };
    // resuming is a no-op on a fresh directory and continues an interrupted run otherwise
    let (model, league, records) = run_curriculum(&cfg, Some(&dir), true).expect("training");
    for r in records.iter().filter(|r| r.update % 5 == 0) {
        println!(
            "{:>3} update {:>3}  steps {:>7}  win {:.2}  len {:>5.1}  reward {:>6.2}  entropy {:.2}",
            r.phase, r.update, r.env_steps, r.win_rate, r.mean_episode_length, r.mean_episode_reward, r.stats.entropy
        );
    }
    println!("league snapshots: {:?}, run dir {}", league.levels(), dir.display());

    let policy = AgentSpec::LowLevel(TeamPolicy::Model { model: Arc::new(model), greedy: true });
    for level in [ScriptLevel::L1, ScriptLevel::L3] {
        let ec = EvalConfig { scenario: ScenarioConfig::low_level(Level::L3), episodes: 200, seed: 9, ..Default::default() };
        let r = evaluate(&policy, &OpponentSpec::Team(TeamPolicy::Scripted(level)), &ec).expect("eval");
        println!("vs {level:?}: win {:.3} loss {:.3} draw {:.3}", r.win_rate, r.loss_rate, r.draw_rate);
    }
}
