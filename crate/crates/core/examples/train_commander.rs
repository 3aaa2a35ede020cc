//! Builds the full hierarchy on a small budget: fight curriculum, escape
//! policy, then a commander over both, compared with an always-fight team.
//!
//! `cargo run --release --example train_commander -- [steps]`

use std::sync::Arc;

use dogfight::env::{Level, ScenarioConfig};
use dogfight::eval::{evaluate, AgentSpec, EvalConfig, OpponentSpec};
use dogfight::train::{run_curriculum, train_commander, train_escape, CommanderConfig, CurriculumConfig, EscapeTrainConfig};

fn main() {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let cur = CurriculumConfig { levels: Level::CURRICULUM.to_vec(), steps_per_level: steps, seed: 2, ..Default::default() };
    let (fight, _, _) = run_curriculum(&cur, None, false).expect("fight curriculum");
    let fight = Arc::new(fight);
    println!("fight policy trained ({} steps per level)", steps);

    let esc = EscapeTrainConfig { phase1_steps: steps, phase2_steps: steps, seed: 2, ..Default::default() };
    let (escape, _) = train_escape(&esc, Some(fight.clone()), None).expect("escape training");
    let escape = Arc::new(escape);
    println!("escape policy trained");

    let cfg = CommanderConfig { env_steps: steps, seed: 2, ..Default::default() };
    let (commander, records) = train_commander(&cfg, Some(fight.clone()), Some(escape.clone()), None).expect("commander");
    if let Some(last) = records.last() {
        println!("commander: {} updates, last win rate {:.2}", records.len(), last.win_rate);
    }

    let ec = EvalConfig { scenario: ScenarioConfig::commander(), episodes: 100, seed: 5, ..Default::default() };
    let teams = [
        ("always fight", AgentSpec::Hierarchical { commander: None, fight: fight.clone(), escape: escape.clone() }),
        ("commander", AgentSpec::Hierarchical { commander: Some(Arc::new(commander)), fight, escape }),
    ];
    for (name, spec) in teams {
        let r = evaluate(&spec, &OpponentSpec::Options, &ec).expect("eval");
        let fight_ratio = r.commands.map_or(1.0, |c| c.fight_ratio);
        println!("{name:<13} win {:.3} loss {:.3} draw {:.3}  fight ratio {fight_ratio:.2}", r.win_rate, r.loss_rate, r.draw_rate);
    }
}
