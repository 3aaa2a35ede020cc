use std::path::Path;
use std::process::Command;

use dogfight::env::{Level, ScenarioConfig};
use dogfight::eval::{
    evaluate, record_episode, AgentSpec, DeathCause, EvalConfig, EvalReport, OpponentSpec, TrajectoryEntry,
    TrajectoryLog,
};
use dogfight::scripted::ScriptLevel;
use dogfight::train::{run_curriculum, CurriculumConfig, PpoConfig, TeamPolicy};

fn random_vs_l2(episodes: u64, seed: u64) -> (AgentSpec, OpponentSpec, EvalConfig) {
    let cfg = EvalConfig { scenario: ScenarioConfig::low_level(Level::L1), episodes, seed, ..Default::default() };
    (AgentSpec::LowLevel(TeamPolicy::Random), OpponentSpec::Team(TeamPolicy::Scripted(ScriptLevel::L2)), cfg)
}

#[test]
fn trajectory_round_trips_and_marks_every_loss() {
    let (agents, opps, cfg) = random_vs_l2(1, 11);
    let dir = tempfile::tempdir().unwrap();
    for index in 0..4 {
        let log = record_episode(&agents, &opps, &cfg, index).unwrap();
        log.validate().unwrap();
        let path = dir.path().join(format!("ep{index}.jsonl"));
        log.export(&path).unwrap();
        assert_eq!(TrajectoryLog::import(&path).unwrap(), log);

        let last = log.rounds().last().unwrap();
        let dead: Vec<_> = last.aircraft.iter().filter(|a| !a.alive).collect();
        let marks: Vec<_> = log.landmarks().collect();
        assert_eq!(marks.len(), dead.len());
        for m in &marks {
            let snap = dead.iter().find(|a| a.id == m.id).unwrap();
            assert_eq!((m.x, m.y), (snap.x, snap.y));
            assert_eq!(m.shooter.is_none(), m.cause == DeathCause::Boundary);
        }
        // a landmark always follows the round that destroyed the aircraft
        for pair in log.entries.windows(2) {
            if let TrajectoryEntry::Landmark(m) = &pair[1] {
                match &pair[0] {
                    TrajectoryEntry::Round(r) => assert_eq!(r.round, m.round),
                    TrajectoryEntry::Landmark(prev) => assert_eq!(prev.round, m.round),
                }
            }
        }
    }
}

#[test]
fn trajectory_import_rejects_missing_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    std::fs::write(&path, "{\"record\":\"round\",\"round\":1,\"aircraft\":[],\"events\":[]}\n").unwrap();
    assert!(TrajectoryLog::import(&path).is_err());
}

#[test]
fn recorded_episode_matches_evaluation() {
    let (agents, opps, cfg) = random_vs_l2(6, 12);
    let report = evaluate(&agents, &opps, &cfg).unwrap();
    let outcomes: Vec<_> = (0..6).map(|i| record_episode(&agents, &opps, &cfg, i).unwrap().header.outcome).collect();
    let wins = outcomes.iter().filter(|o| matches!(o, Some(dogfight::env::Outcome::Win))).count();
    assert_eq!(wins as u64, report.wins);
}

fn tiny_curriculum(levels: Vec<Level>) -> CurriculumConfig {
    CurriculumConfig {
        levels,
        steps_per_level: 300,
        ppo: PpoConfig { batch_size: 150, epochs: 1, minibatches: 2, ..Default::default() },
        seed: 21,
        ..Default::default()
    }
}

#[test]
fn resumed_curriculum_matches_uninterrupted_run() {
    let full_dir = tempfile::tempdir().unwrap();
    let (full, _, _) = run_curriculum(&tiny_curriculum(vec![Level::L1, Level::L2]), Some(full_dir.path()), false).unwrap();

    let split_dir = tempfile::tempdir().unwrap();
    run_curriculum(&tiny_curriculum(vec![Level::L1]), Some(split_dir.path()), false).unwrap();
    let (resumed, league, _) =
        run_curriculum(&tiny_curriculum(vec![Level::L1, Level::L2]), Some(split_dir.path()), true).unwrap();

    assert_eq!(full.checksum(), resumed.checksum());
    assert_eq!(league.levels(), vec![Level::L1, Level::L2]);
    let read = |d: &Path| std::fs::read(d.join("metrics.jsonl")).unwrap();
    assert_eq!(read(full_dir.path()), read(split_dir.path()));
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dogfight")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
    assert_eq!(cli(&["evaluate", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(cli(&["evaluate", "--teams", "three"]).status.code(), Some(2));
    let missing = cli(&["evaluate", "--agents", "model:/nonexistent/model.bin", "--episodes", "1"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn cli_evaluate_and_export_write_readable_files() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.jsonl");
    let out = cli(&["evaluate", "--teams", "1v1", "--episodes", "3", "--seed", "5", "--out", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let reports = EvalReport::read(&report).unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0].wins + reports[0].losses + reports[0].draws, 3);

    let traj = dir.path().join("traj.jsonl");
    let out = cli(&["export-traj", "--teams", "1v1", "--episode", "2", "--out", traj.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    TrajectoryLog::import(&traj).unwrap().validate().unwrap();

    let sweep = dir.path().join("sweep.jsonl");
    let out = cli(&["sweep", "--grid", "1v1-PF,2v2-PE", "--episodes", "2", "--out", sweep.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let labels: Vec<_> = EvalReport::read(&sweep).unwrap().into_iter().map(|r| r.label).collect();
    assert_eq!(labels, vec!["1v1-PF", "2v2-PE"]);
}
