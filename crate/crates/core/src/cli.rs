//! Command-line front end.
//!
//! Every subcommand takes an optional JSON config file (`--config`) whose
//! schema is the matching library config type; flags given on the command
//! line override fields of the file. Exit codes: 0 success, 1 runtime
//! failure, 2 usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use crate::env::{Level, RewardMode, ScenarioConfig};
use crate::eval::{
    evaluate, record_episode, scenario_sweep, write_reports, AgentSpec, EvalConfig, OpponentSpec, SweepCell,
};
use crate::nn::gradcheck::{run_all, GradcheckConfig};
use crate::scripted::ScriptLevel;
use crate::train::{
    run_curriculum, train_commander, train_escape, train_standard_baseline, CommanderConfig, CommanderModel,
    CommanderVariant, CurriculumConfig, EscapeTrainConfig, Framework, LowLevelModel, TeamPolicy,
};

#[derive(Debug, Parser)]
#[command(name = "dogfight", version, about = "Multi-agent air combat training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a low-level fight, escape or standard policy.
    TrainLow(TrainLowArgs),
    /// Train a commander over frozen fight and escape policies.
    TrainCommander(TrainCommanderArgs),
    /// Evaluate a policy and write an EvalReport.
    Evaluate(EvaluateArgs),
    /// Evaluate over a grid of team sizes and opponent behaviors.
    Sweep(SweepArgs),
    /// Record one evaluation episode as a trajectory log.
    ExportTraj(ExportArgs),
    /// Run the finite-difference gradient check.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Fight,
    Escape,
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FrameworkArg {
    Ctde,
    Ctce,
    Dtde,
}

impl From<FrameworkArg> for Framework {
    fn from(f: FrameworkArg) -> Self {
        match f {
            FrameworkArg::Ctde => Framework::Ctde,
            FrameworkArg::Ctce => Framework::Ctce,
            FrameworkArg::Dtde => Framework::Dtde,
        }
    }
}

#[derive(Debug, Args)]
struct TrainLowArgs {
    #[arg(long, value_enum, default_value = "fight")]
    policy: PolicyArg,
    /// Curriculum level or range, e.g. `3` or `1-5` (fight policy only).
    #[arg(long, value_parser = parse_levels)]
    level: Option<Vec<Level>>,
    /// JSON config: CurriculumConfig for fight/standard, EscapeTrainConfig
    /// for escape.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Env steps per level (fight), per phase (escape) or in total
    /// (standard).
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    framework: Option<FrameworkArg>,
    /// Map side, km.
    #[arg(long)]
    map_size: Option<f64>,
    /// Frozen fight policy for escape phase two.
    #[arg(long)]
    fight: Option<PathBuf>,
    /// Continue an interrupted fight curriculum in `--out`.
    #[arg(long)]
    resume: bool,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainCommanderArgs {
    /// Variant label such as `Shared-N2-Opt-Assess`.
    #[arg(long)]
    variant: Option<String>,
    /// JSON CommanderConfig.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    fight: PathBuf,
    #[arg(long)]
    escape: PathBuf,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

/// Who flies each side. Low-level agents come from `--agents`; passing
/// `--fight` and `--escape` selects a hierarchical team instead, played in
/// the 3-vs-3 commander scenario unless `--config` says otherwise.
#[derive(Debug, Args)]
struct SideArgs {
    /// `model:PATH`, `random` or `scripted:L1|L2|L3`.
    #[arg(long, default_value = "random")]
    agents: String,
    /// `model:PATH`, `random` or `scripted:L1|L2|L3` (low-level agents).
    #[arg(long, default_value = "scripted:L1")]
    opponents: String,
    /// Commander checkpoint, or `always-fight`.
    #[arg(long, default_value = "always-fight")]
    commander: String,
    #[arg(long)]
    fight: Option<PathBuf>,
    #[arg(long)]
    escape: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalCommon {
    /// JSON EvalConfig.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sample actions instead of taking the argmax.
    #[arg(long)]
    stochastic: bool,
    /// Team sizes, e.g. `3v3`.
    #[arg(long, value_parser = parse_cell)]
    teams: Option<SweepCell>,
    #[arg(long)]
    map_size: Option<f64>,
    #[arg(long)]
    horizon: Option<u32>,
    /// Probability that an opponent picks its fight option.
    #[arg(long)]
    opponent_fight_prob: Option<f64>,
    #[command(flatten)]
    sides: SideArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: EvalCommon,
    #[arg(long)]
    episodes: Option<u64>,
    /// Report file (JSON lines).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: EvalCommon,
    /// Comma-separated cells such as `2v2,3v3,2v4,3v3-PF,3v3-PE`.
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_cell)]
    grid: Vec<SweepCell>,
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[command(flatten)]
    common: EvalCommon,
    /// Index of the evaluation episode to record.
    #[arg(long, default_value_t = 0)]
    episode: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_cell(text: &str) -> Result<SweepCell, String> {
    SweepCell::parse(text).map_err(|e| e.to_string())
}

fn parse_levels(text: &str) -> Result<Vec<Level>, String> {
    let num = |s: &str| -> Result<u32, String> {
        let s = s.trim().trim_start_matches(['L', 'l']);
        s.parse::<u32>().ok().filter(|n| (1..=5).contains(n)).ok_or_else(|| format!("bad level {s:?}, expected 1..5"))
    };
    let (lo, hi) = match text.split_once('-') {
        Some((a, b)) => (num(a)?, num(b)?),
        None => (num(text)?, num(text)?),
    };
    if lo > hi {
        return Err(format!("empty level range {text:?}"));
    }
    Ok((lo..=hi).filter_map(Level::from_number).collect())
}

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            Ok(serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?)
        }
    }
}

fn load_model(path: &Path) -> CliResult<Arc<LowLevelModel>> {
    Ok(Arc::new(LowLevelModel::load(path)?.0))
}

fn team_policy(text: &str, greedy: bool) -> CliResult<TeamPolicy> {
    Ok(match text.split_once(':') {
        None if text == "random" => TeamPolicy::Random,
        Some(("model", p)) => TeamPolicy::Model { model: load_model(Path::new(p))?, greedy },
        Some(("scripted", l)) => TeamPolicy::Scripted(match l.to_ascii_uppercase().as_str() {
            "L1" => ScriptLevel::L1,
            "L2" => ScriptLevel::L2,
            "L3" => ScriptLevel::L3,
            _ => return Err(format!("unknown scripted level {l:?}").into()),
        }),
        _ => return Err(format!("bad policy {text:?}; use model:PATH, random or scripted:L1..L3").into()),
    })
}

fn sides(args: &SideArgs) -> CliResult<(AgentSpec, OpponentSpec)> {
    match (&args.fight, &args.escape) {
        (Some(f), Some(e)) => {
            let commander = match args.commander.as_str() {
                "always-fight" => None,
                p => Some(Arc::new(CommanderModel::load(Path::new(p))?)),
            };
            let agents = AgentSpec::Hierarchical { commander, fight: load_model(f)?, escape: load_model(e)? };
            Ok((agents, OpponentSpec::Options))
        }
        (None, None) => Ok((
            AgentSpec::LowLevel(team_policy(&args.agents, true)?),
            // frozen opponent snapshots keep sampling, like during training
            OpponentSpec::Team(team_policy(&args.opponents, false)?),
        )),
        _ => Err("--fight and --escape must be given together".into()),
    }
}

fn eval_config(c: &EvalCommon) -> CliResult<EvalConfig> {
    let mut cfg: EvalConfig = read_config(c.config.as_deref())?;
    if c.config.is_none() && c.sides.fight.is_some() {
        cfg.scenario = ScenarioConfig::commander();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if c.stochastic {
        cfg.greedy = false;
    }
    if let Some(cell) = &c.teams {
        cfg.scenario = cell.scenario(&cfg.scenario);
    }
    if let Some(m) = c.map_size {
        cfg.scenario.map_size = m;
    }
    if let Some(h) = c.horizon {
        cfg.scenario.horizon = h;
    }
    if let Some(p) = c.opponent_fight_prob {
        cfg.scenario.opponent_fight_prob = p;
    }
    cfg.scenario.validate()?;
    Ok(cfg)
}

fn train_low(a: &TrainLowArgs) -> CliResult<()> {
    match a.policy {
        PolicyArg::Fight | PolicyArg::Standard => {
            let mut cfg: CurriculumConfig = read_config(a.config.as_deref())?;
            if let Some(l) = &a.level {
                cfg.levels = l.clone();
            }
            if let Some(s) = a.steps {
                cfg.steps_per_level = s;
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            if let Some(f) = a.framework {
                cfg.framework = f.into();
            }
            if let Some(m) = a.map_size {
                cfg.scenario.map_size = m;
            }
            if a.policy == PolicyArg::Standard {
                if a.level.is_some() {
                    return Err("the standard baseline always trains at L3; drop --level".into());
                }
                let (_, records) =
                    train_standard_baseline(&cfg.scenario, &cfg.ppo, cfg.steps_per_level, cfg.seed, Some(&a.out))?;
                print_last(&records);
            } else {
                if !matches!(cfg.reward, RewardMode::Fight(_)) {
                    return Err("fight training needs a fight reward".into());
                }
                let (_, league, records) = run_curriculum(&cfg, Some(&a.out), a.resume)?;
                print_last(&records);
                println!("league levels: {:?}", league.levels());
            }
        }
        PolicyArg::Escape => {
            let mut cfg: EscapeTrainConfig = read_config(a.config.as_deref())?;
            if a.level.is_some() {
                return Err("escape training has fixed phases; drop --level".into());
            }
            if let Some(s) = a.steps {
                cfg.phase1_steps = s;
                cfg.phase2_steps = s;
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            if let Some(f) = a.framework {
                cfg.framework = f.into();
            }
            if let Some(m) = a.map_size {
                cfg.scenario.map_size = m;
            }
            let fight = a.fight.as_deref().map(load_model).transpose()?;
            let (_, records) = train_escape(&cfg, fight, Some(&a.out))?;
            print_last(&records);
        }
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn print_last(records: &[crate::train::MetricsRecord]) {
    if let Some(r) = records.last() {
        println!(
            "{} update {} env_steps {} win_rate {:.3} mean_reward {:.3}",
            r.phase, r.update, r.env_steps, r.win_rate, r.mean_episode_reward
        );
    }
}

fn train_commander_cmd(a: &TrainCommanderArgs) -> CliResult<()> {
    let mut cfg: CommanderConfig = read_config(a.config.as_deref())?;
    if let Some(v) = &a.variant {
        cfg.variant = CommanderVariant::from_label(v).ok_or_else(|| format!("unknown commander variant {v:?}"))?;
    }
    if let Some(s) = a.steps {
        cfg.env_steps = s;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let fight = load_model(&a.fight)?;
    let escape = load_model(&a.escape)?;
    let (_, records) = train_commander(&cfg, Some(fight), Some(escape), Some(&a.out))?;
    print_last(&records);
    println!("wrote {}", a.out.display());
    Ok(())
}

fn evaluate_cmd(a: &EvaluateArgs) -> CliResult<()> {
    let mut cfg = eval_config(&a.common)?;
    if let Some(n) = a.episodes {
        cfg.episodes = n;
    }
    let (agents, opponents) = sides(&a.common.sides)?;
    let report = evaluate(&agents, &opponents, &cfg)?;
    println!(
        "{}: {} episodes, win {:.3} loss {:.3} draw {:.3}",
        report.label, report.episodes, report.win_rate, report.loss_rate, report.draw_rate
    );
    match &a.out {
        Some(p) => {
            report.write(p)?;
            println!("wrote {}", p.display());
        }
        None => println!("{}", report.to_json_line()),
    }
    Ok(())
}

fn sweep_cmd(a: &SweepArgs) -> CliResult<()> {
    let mut cfg = eval_config(&a.common)?;
    if let Some(n) = a.episodes {
        cfg.episodes = n;
    }
    let (agents, opponents) = sides(&a.common.sides)?;
    let reports = scenario_sweep(&agents, &opponents, &cfg, &a.grid)?;
    for r in &reports {
        println!("{:<8} win {:.3} loss {:.3} draw {:.3}", r.label, r.win_rate, r.loss_rate, r.draw_rate);
    }
    if let Some(p) = &a.out {
        write_reports(p, &reports)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn export_cmd(a: &ExportArgs) -> CliResult<()> {
    let cfg = eval_config(&a.common)?;
    let (agents, opponents) = sides(&a.common.sides)?;
    let log = record_episode(&agents, &opponents, &cfg, a.episode)?;
    log.export(&a.out)?;
    println!("wrote {} rounds to {}", log.rounds().count(), a.out.display());
    Ok(())
}

fn gradcheck_cmd(a: &GradcheckArgs) -> CliResult<bool> {
    let mut cfg = GradcheckConfig::default();
    if let Some(d) = a.draws {
        cfg.draws = d;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let mut ok = true;
    for r in run_all(&cfg) {
        println!("{r}");
        ok &= r.passed;
    }
    Ok(ok)
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::TrainLow(a) => train_low(a),
        Command::TrainCommander(a) => train_commander_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::ExportTraj(a) => export_cmd(a),
        Command::Gradcheck(a) => match gradcheck_cmd(a) {
            Ok(true) => Ok(()),
            Ok(false) => Err("gradient check failed".into()),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
