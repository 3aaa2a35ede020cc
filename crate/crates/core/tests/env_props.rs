use dogfight::env::{CombatEnv, Level, LowLevelAction, Outcome, RewardMode, ScenarioConfig, ACTION_ARITIES};
use dogfight::sim::{AircraftState, Team};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_action(rng: &mut ChaCha8Rng) -> LowLevelAction {
    let idx: Vec<usize> = ACTION_ARITIES.iter().map(|&n| rng.gen_range(0..n)).collect();
    LowLevelAction::from_indices(&idx).unwrap()
}

fn random_step(env: &mut CombatEnv, rng: &mut ChaCha8Rng, mode: RewardMode) -> dogfight::env::StepResult {
    let acts: Vec<_> = env.world.aircraft.iter().filter(|a| a.alive).map(|a| a.id).collect();
    let acts: Vec<_> = acts.into_iter().map(|id| (id, random_action(rng))).collect();
    env.step(&acts, mode).unwrap()
}

fn scenario(level: Level, agents: usize, opponents: usize, seed: u64) -> ScenarioConfig {
    let base = if level == Level::Commander { ScenarioConfig::commander() } else { ScenarioConfig::low_level(level) };
    base.with_teams(agents, opponents).with_seed(seed)
}

fn level() -> impl Strategy<Value = Level> {
    prop_oneof![Just(Level::L1), Just(Level::L3), Just(Level::Commander)]
}

fn check_obs(values: &[f64]) -> Result<(), TestCaseError> {
    for &v in values {
        prop_assert!(v.is_finite() && (0.0..=1.0).contains(&v), "observation value {v}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn observations_stay_normalized(lvl in level(), agents in 1usize..4, opponents in 1usize..4, seed in any::<u64>()) {
        let mut env = CombatEnv::reset(&scenario(lvl, agents, opponents, seed)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths: Vec<usize> = env.agent_ids().iter().map(|&id| env.obs_fight(id).unwrap().data.len()).collect();
        for _ in 0..40 {
            for id in env.alive_agents() {
                let fight = env.obs_fight(id).unwrap();
                prop_assert_eq!(fight.data.len(), widths[id]);
                check_obs(&fight.data)?;
                check_obs(&env.obs_escape(id).unwrap().data)?;
                check_obs(&env.obs_commander(id, 3).unwrap().data)?;
            }
            if env.is_done() {
                break;
            }
            random_step(&mut env, &mut rng, RewardMode::None);
        }
    }

    #[test]
    fn replay_is_exact(lvl in level(), seed in any::<u64>(), action_seed in any::<u64>()) {
        let cfg = scenario(lvl, 2, 2, seed);
        let run = || {
            let mut env = CombatEnv::reset(&cfg).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(action_seed);
            let mut events = vec![];
            while !env.is_done() && env.steps < 60 {
                events.push(random_step(&mut env, &mut rng, RewardMode::None).events);
            }
            (env.world.aircraft.clone(), env.world.rockets.clone(), env.outcome, format!("{events:?}"))
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn outcome_matches_alive_recount(seed in any::<u64>(), agents in 1usize..4, opponents in 1usize..4) {
        let mut cfg = scenario(Level::L1, agents, opponents, seed);
        cfg.horizon = 80;
        cfg.map_size = 15.0;
        let mut env = CombatEnv::reset(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let mut last = Outcome::Ongoing;
        while !env.is_done() {
            last = random_step(&mut env, &mut rng, RewardMode::None).outcome;
        }
        let alive = |team| env.world.aircraft.iter().filter(|a: &&AircraftState| a.team == team && a.alive).count();
        let (a, o) = (alive(Team::Agent), alive(Team::Opponent));
        let expected = match (a, o) {
            (0, 0) => Outcome::Draw,
            (_, 0) => Outcome::Win,
            (0, _) => Outcome::Loss,
            _ => Outcome::Draw,
        };
        prop_assert_eq!(last, expected);
        prop_assert_eq!(env.outcome, expected);
        prop_assert!(a > 0 && o > 0 || env.steps <= cfg.horizon);
        prop_assert!(!(a > 0 && o > 0) || env.steps == cfg.horizon);
    }

    #[test]
    fn dead_aircraft_stay_put(seed in any::<u64>()) {
        let mut cfg = scenario(Level::L1, 3, 3, seed);
        cfg.map_size = 12.0;
        let mut env = CombatEnv::reset(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut graves: Vec<Option<AircraftState>> = vec![None; env.world.aircraft.len()];
        while !env.is_done() {
            random_step(&mut env, &mut rng, RewardMode::None);
            for a in &env.world.aircraft {
                match &graves[a.id] {
                    Some(g) => prop_assert_eq!(g.pos, a.pos),
                    None if !a.alive => graves[a.id] = Some(a.clone()),
                    None => prop_assert!(env.world.in_bounds(a.pos)),
                }
            }
        }
    }
}

#[test]
fn finished_episodes_reject_steps() {
    let mut env = CombatEnv::reset(&scenario(Level::L1, 1, 1, 4)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    while !env.is_done() {
        random_step(&mut env, &mut rng, RewardMode::None);
    }
    assert!(env.step(&[], RewardMode::None).is_err());
}
