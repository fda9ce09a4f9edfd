use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use redugoal::bench::{load_results, run_experiment, write_report, ExperimentSpec};
use redugoal::collision::{RobotGeometry, Scene};
use redugoal::error::{Error, Result};
use redugoal::ik::{compute_goal_configurations, select_goals, SelectionStrategy, TaskGoal};
use redugoal::kinematics::{Configuration, KinematicChain};
use redugoal::planner::{iterations_per_ms_from_env, plan, PlannerConfig, CALIBRATION_ENV};
use redugoal::scenes::{build_scene, CubicleParams, SceneSpec, VineParams};
use redugoal::timing::JointDynamics;

#[derive(Parser)]
#[command(
    name = "redugoal",
    version,
    about = "Multi-goal motion planning with redundant goal configurations"
)]
#[command(after_help = "Set REDUGOAL_CALIBRATION to override the planner's iterations-per-millisecond constant.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run or summarize a benchmark.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Plan one query and write the result as JSON.
    Plan(PlanArgs),
    /// Print the ranked goal set of a task goal.
    Goalset(GoalsetArgs),
}

#[derive(Subcommand)]
enum BenchCommand {
    Run(RunArgs),
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scene spec JSON, or `cubicles` / `vine` for the default generators.
    #[arg(long)]
    scene: String,
    /// Overrides the chain named by the scene spec.
    #[arg(long)]
    chain: Option<String>,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 16])]
    k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [SelectionStrategy::Random, SelectionStrategy::Closest])]
    strategy: Vec<SelectionStrategy>,
    #[arg(long, default_value_t = 50)]
    queries: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 2000.0)]
    budget_ms: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Joint dynamics JSON used for execution times.
    #[arg(long)]
    dynamics: Option<PathBuf>,
    /// Edge collision-check spacing in radians.
    #[arg(long, default_value_t = PlannerConfig::default().edge_check_step)]
    edge_step: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PlanArgs {
    /// Scene JSON with obstacles, a scene spec JSON, or `cubicles` / `vine`.
    #[arg(long)]
    scene: String,
    /// Comma-separated joint angles, or a JSON file holding an array.
    #[arg(long)]
    start: String,
    /// Task goal JSON (inline or a file). Without it, `--target` picks one of
    /// a generated scene's tasks.
    #[arg(long)]
    goal: Option<String>,
    #[arg(long)]
    target: Option<usize>,
    #[arg(long)]
    chain: Option<String>,
    #[arg(long)]
    robot: Option<String>,
    /// Plan to at most this many goals picked by `--strategy`.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = SelectionStrategy::Closest)]
    strategy: SelectionStrategy,
    #[arg(long, default_value_t = 2000.0)]
    budget_ms: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge collision-check spacing in radians.
    #[arg(long, default_value_t = PlannerConfig::default().edge_check_step)]
    edge_step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GoalsetArgs {
    #[arg(long, default_value = "ur5-elbow-limited")]
    chain: String,
    #[arg(long)]
    goal: String,
    #[arg(long)]
    start: String,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bench(BenchCommand::Run(a)) => bench_run(a),
        Command::Bench(BenchCommand::Report(a)) => bench_report(a),
        Command::Plan(a) => plan_cmd(a),
        Command::Goalset(a) => goalset(a),
    }
}

fn scene_spec(arg: &str, seed: u64) -> Result<SceneSpec> {
    match arg {
        "cubicles" => Ok(SceneSpec::cubicles(CubicleParams::default(), seed)),
        "vine" => Ok(SceneSpec::vine(VineParams::default(), seed)),
        path => SceneSpec::load(path),
    }
}

fn bench_run(a: RunArgs) -> Result<()> {
    let mut spec = ExperimentSpec::new(scene_spec(&a.scene, a.seed)?, a.k, a.strategy, a.queries);
    spec.chain = a.chain;
    spec.repetitions = a.reps;
    spec.budget_ms = a.budget_ms;
    spec.base_seed = a.seed;
    spec.iterations_per_ms = iterations_per_ms_from_env()?;
    spec.planner.edge_check_step = a.edge_step;
    if let Some(p) = &a.dynamics {
        spec.dynamics = Some(JointDynamics::load(p)?);
    }
    let exp = run_experiment(&spec, a.workers.max(1))?;
    exp.save(&a.out)?;
    let ok = exp.runs.iter().filter(|r| r.row.success).count();
    eprintln!("{} runs ({ok} solved) written to {}", exp.runs.len(), a.out.display());
    Ok(())
}

fn bench_report(a: ReportArgs) -> Result<()> {
    let saved = load_results(&a.input)?;
    let report = write_report(&saved, &a.out_dir)?;
    let mut out = String::from("strategy  k    runs  solved  length          exec_time       improvement\n");
    for s in &report.summary {
        let cell = |m: Option<f64>, c: Option<f64>| match (m, c) {
            (Some(m), Some(c)) => format!("{m:.3} ± {c:.3}"),
            (Some(m), None) => format!("{m:.3}"),
            _ => "N/A".to_string(),
        };
        let imp = s
            .length_improvement_pct
            .map_or("N/A".to_string(), |v| format!("{v:.1}%"));
        let _ = writeln!(
            out,
            "{:<9} {:<4} {:<5} {:<7} {:<15} {:<15} {}",
            s.strategy.as_str(),
            s.k,
            s.runs,
            s.successes,
            cell(s.length_mean, s.length_ci95),
            cell(s.exec_time_mean, s.exec_time_ci95),
            imp
        );
    }
    for c in &report.comparisons {
        let _ = writeln!(
            out,
            "welch {} k={} vs k=1 ({:?}, n={}/{}): {:.3} vs {:.3}, p={:.3e}",
            c.strategy, c.k, c.unit, c.n_k, c.n_one, c.mean_k, c.mean_one, c.p
        );
    }
    let (slower, total) = report.exec_time_regressions;
    let _ = writeln!(out, "trace improvements that executed slower: {slower}/{total}");
    emit(&out)?;
    for why in &report.skipped_plots {
        eprintln!("skipped {why}");
    }
    eprintln!("{} files written to {}", report.files.len(), a.out_dir.display());
    Ok(())
}

/// Inline JSON, or the contents of a file.
fn json_arg(arg: &str) -> Result<String> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        return Ok(arg.to_string());
    }
    std::fs::read_to_string(arg).map_err(|e| Error::io(Path::new(arg), e))
}

fn configuration_arg(arg: &str) -> Result<Configuration> {
    if Path::new(arg).is_file() || arg.trim_start().starts_with('[') {
        let v: Vec<f64> = serde_json::from_str(&json_arg(arg)?)?;
        return Ok(Configuration(v));
    }
    arg.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad joint angle `{s}`")))
        })
        .collect::<Result<Vec<f64>>>()
        .map(Configuration)
}

fn plan_cmd(a: PlanArgs) -> Result<()> {
    let (scene, tasks, default_chain, default_robot) = match a.scene.as_str() {
        "cubicles" | "vine" => {
            let spec = scene_spec(&a.scene, a.seed)?;
            let (scene, tasks) = build_scene(&spec)?;
            (scene, tasks, spec.chain.clone(), spec.robot.clone())
        }
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(Path::new(path), e))?;
            match SceneSpec::load(path) {
                Ok(spec) => {
                    let (scene, tasks) = build_scene(&spec)?;
                    (scene, tasks, spec.chain.clone(), spec.robot.clone())
                }
                Err(_) => {
                    let scene = Scene::from_json(&text)?;
                    let robot = scene.robot_geometry.clone();
                    (scene, Vec::new(), "ur5-elbow-limited".to_string(), robot)
                }
            }
        }
    };
    let chain = KinematicChain::load(a.chain.as_deref().unwrap_or(&default_chain))?;
    let robot = RobotGeometry::load(a.robot.as_deref().unwrap_or(&default_robot))?;
    let goal = match (&a.goal, a.target) {
        (Some(g), _) => TaskGoal::from_json(&json_arg(g)?)?,
        (None, Some(t)) => tasks
            .get(t)
            .cloned()
            .ok_or_else(|| Error::InvalidArgument(format!("scene has {} tasks, no target {t}", tasks.len())))?,
        (None, None) => return Err(Error::InvalidArgument("either --goal or --target is required".into())),
    };
    let start = configuration_arg(&a.start)?;
    let mut goals = compute_goal_configurations(&chain, &goal, &start)?;
    if let Some(k) = a.k {
        goals = select_goals(&goals, k, a.strategy, a.seed)?;
    }
    let cfg = PlannerConfig {
        time_budget_ms: a.budget_ms,
        seed: a.seed,
        iterations_per_ms: iterations_per_ms_from_env()?,
        edge_check_step: a.edge_step,
        ..PlannerConfig::default()
    };
    let result = plan(&scene, &robot, &chain, &start, &goals, &cfg)?;
    let text = result.to_json()? + "\n";
    match &a.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e))?,
        None => emit(&text)?,
    }
    eprintln!(
        "{}: length {:.4} rad, exec time {:.3} s, goal rank {} of {} ({} = {})",
        if result.success { "solved" } else { "no solution" },
        result.length,
        result.exec_time,
        result.goal_rank,
        goals.len(),
        CALIBRATION_ENV,
        cfg.iterations_per_ms
    );
    Ok(())
}

fn goalset(a: GoalsetArgs) -> Result<()> {
    let chain = KinematicChain::load(&a.chain)?;
    let goal = TaskGoal::from_json(&json_arg(&a.goal)?)?;
    let start = configuration_arg(&a.start)?;
    let set = compute_goal_configurations(&chain, &goal, &start)?;
    if a.json {
        return emit(&(serde_json::to_string_pretty(&set)? + "\n"));
    }
    let mut out = String::from("rank  pose  distance  configuration\n");
    for i in set.by_rank() {
        let q: Vec<String> = set.configs[i].iter().map(|v| format!("{v:.4}")).collect();
        let _ = writeln!(
            out,
            "{:<5} {:<5} {:<9.4} [{}]",
            set.ranks[i],
            set.pose_index[i],
            set.distance_to_start(i),
            q.join(", ")
        );
    }
    emit(&out)
}

/// Writes to stdout; a reader that hung up early (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io(Path::new("<stdout>"), e)),
        _ => Ok(()),
    }
}
