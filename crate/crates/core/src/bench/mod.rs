//! Experiment driver: queries between scene targets, goal selection by
//! strategy and `k`, seeded planner runs, and the CSV files they produce.

mod plot;
mod report;
mod stats;

use std::path::{Path as FsPath, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{CollisionWorld, RobotGeometry, Scene};
use crate::error::{Error, Result};
use crate::ik::{
    compute_goal_configurations, distinct_pose_solutions, select_goals, GoalSet, SelectionStrategy, TaskGoal,
};
use crate::kinematics::{Configuration, KinematicChain};
use crate::planner::{plan, Path, PlanResult, PlannerConfig, TraceEntry, DEFAULT_ITERATIONS_PER_MS};
use crate::scenes::{build_scene, SceneSpec};
use crate::timing::JointDynamics;

pub use plot::{axis_range, emit_plots, PlotFiles};
pub use report::{write_report, Report};
pub use stats::{
    cell_lengths, cell_run_lengths, compare_to_single_goal, cost_over_time, even_edges, exec_time_regressions,
    rank_histogram, summarize, t_interval, welch_one_sided, Comparison, CostSeries, RankTable, SampleUnit, SummaryRow,
    WelchTest,
};

/// Everything needed to reproduce a benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scene: SceneSpec,
    /// Chain preset or file; defaults to the scene's chain.
    #[serde(default)]
    pub chain: Option<String>,
    pub k_values: Vec<usize>,
    pub strategies: Vec<SelectionStrategy>,
    pub queries: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    pub budget_ms: f64,
    #[serde(default)]
    pub base_seed: u64,
    /// Defaults to the UR5 limits.
    #[serde(default)]
    pub dynamics: Option<JointDynamics>,
    #[serde(default = "default_calibration")]
    pub iterations_per_ms: f64,
    /// Remaining planner settings; budget, seed, dynamics and calibration
    /// are overwritten per run.
    #[serde(default)]
    pub planner: PlannerConfig,
}

fn default_repetitions() -> usize {
    5
}

fn default_calibration() -> f64 {
    DEFAULT_ITERATIONS_PER_MS
}

impl ExperimentSpec {
    pub fn new(scene: SceneSpec, k_values: Vec<usize>, strategies: Vec<SelectionStrategy>, queries: usize) -> Self {
        ExperimentSpec {
            scene,
            chain: None,
            k_values,
            strategies,
            queries,
            repetitions: default_repetitions(),
            budget_ms: 2000.0,
            base_seed: 0,
            dynamics: None,
            iterations_per_ms: DEFAULT_ITERATIONS_PER_MS,
            planner: PlannerConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::InvalidArgument(
                "k values must be non-empty and at least 1".into(),
            ));
        }
        if self.strategies.is_empty() {
            return Err(Error::InvalidArgument("at least one strategy is required".into()));
        }
        if self.queries == 0 || self.repetitions == 0 {
            return Err(Error::InvalidArgument(
                "queries and repetitions must be at least 1".into(),
            ));
        }
        self.planner_config(0)?.validate()?;
        self.scene.validate()
    }

    pub fn chain_name(&self) -> &str {
        self.chain.as_deref().unwrap_or(&self.scene.chain)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Planner settings for one run.
    pub fn planner_config(&self, seed: u64) -> Result<PlannerConfig> {
        Ok(PlannerConfig {
            time_budget_ms: self.budget_ms,
            seed,
            iterations_per_ms: self.iterations_per_ms,
            dynamics: self.dynamics.clone(),
            ..self.planner.clone()
        })
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a list of integers.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5eed, |h, &p| splitmix(h ^ splitmix(p)))
}

fn strategy_code(s: SelectionStrategy) -> u64 {
    match s {
        SelectionStrategy::Random => 1,
        SelectionStrategy::Closest => 2,
    }
}

/// Seed of one run; goal selection uses it directly and the planner uses
/// [`planner_seed`] of it.
pub fn run_seed(base: u64, query: usize, target: usize, strategy: SelectionStrategy, k: usize, rep: usize) -> u64 {
    derive_seed(&[
        base,
        query as u64,
        target as u64,
        strategy_code(strategy),
        k as u64,
        rep as u64,
    ])
}

pub fn planner_seed(run_seed: u64) -> u64 {
    splitmix(run_seed ^ 0x706c_616e)
}

/// Move from a configuration reaching `start_target` to task `target_id`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: usize,
    pub start_target: usize,
    pub target_id: usize,
    pub start: Configuration,
}

/// Scene, tasks and models shared by every run of an experiment.
pub struct Workbench {
    pub scene: Scene,
    pub tasks: Vec<TaskGoal>,
    pub chain: KinematicChain,
    pub robot: RobotGeometry,
}

impl Workbench {
    pub fn build(spec: &ExperimentSpec) -> Result<Self> {
        let (scene, tasks) = build_scene(&spec.scene)?;
        Ok(Workbench {
            scene,
            tasks,
            chain: KinematicChain::load(spec.chain_name())?,
            robot: spec.scene.load_robot()?,
        })
    }

    pub fn world(&self) -> Result<CollisionWorld<'_>> {
        CollisionWorld::new(&self.scene, &self.robot, &self.chain)
    }

    /// Every collision-free configuration solving task `t`.
    fn free_solutions(&self, t: usize) -> Result<Vec<Configuration>> {
        let world = self.world()?;
        let mut out = Vec::new();
        for q in distinct_pose_solutions(&self.chain, &self.tasks[t])? {
            for e in self.chain.equivalent_configurations(&q)? {
                if !world.config_in_collision(&e)? {
                    out.push(e);
                }
            }
        }
        Ok(out)
    }

    /// Seeded queries: a random start task, a different random target, and
    /// a random collision-free configuration of the start task.
    pub fn queries(&self, count: usize, base_seed: u64) -> Result<Vec<Query>> {
        let n = self.tasks.len();
        if n == 0 {
            return Err(Error::Generation("scene has no tasks".into()));
        }
        let starts: Vec<Vec<Configuration>> = (0..n).map(|t| self.free_solutions(t)).collect::<Result<_>>()?;
        let usable: Vec<usize> = (0..n).filter(|&t| !starts[t].is_empty()).collect();
        if usable.is_empty() {
            return Err(Error::Generation(
                "no task has a collision-free configuration to start from".into(),
            ));
        }
        let mut out = Vec::with_capacity(count);
        for id in 0..count {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[base_seed, 0x7175_6572, id as u64]));
            let start_target = usable[rng.random_range(0..usable.len())];
            let target_id = if n == 1 {
                0
            } else {
                let t = rng.random_range(0..n - 1);
                if t >= start_target {
                    t + 1
                } else {
                    t
                }
            };
            let pool = &starts[start_target];
            let start = pool[rng.random_range(0..pool.len())].clone();
            out.push(Query {
                id,
                start_target,
                target_id,
                start,
            });
        }
        Ok(out)
    }

    /// All collision-free goal configurations of the query's target, ranked
    /// against its start.
    pub fn goal_set(&self, query: &Query) -> Result<GoalSet> {
        let world = self.world()?;
        let full = compute_goal_configurations(&self.chain, &self.tasks[query.target_id], &query.start)?;
        Ok(full.retain(|q| matches!(world.config_in_collision(q), Ok(false))))
    }
}

/// One benchmark run as written to the results CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub query_id: usize,
    pub target_id: usize,
    pub strategy: SelectionStrategy,
    pub k: usize,
    pub repetition: usize,
    pub seed: u64,
    /// Virtual time of the last improvement.
    pub elapsed_ms: Option<f64>,
    pub length_rad: Option<f64>,
    pub exec_time_s: Option<f64>,
    /// Rank of the final goal within the goals given to the planner.
    pub goal_rank: Option<usize>,
    pub success: bool,
    pub trace_ref: String,
}

impl ResultRow {
    fn key(&self) -> (usize, SelectionStrategy, usize, usize) {
        (self.query_id, self.strategy, self.k, self.repetition)
    }
}

/// A row plus what the CSV only references.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub row: ResultRow,
    pub trace: Vec<TraceEntry>,
    pub path: Path,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub spec: ExperimentSpec,
    pub queries: Vec<Query>,
    pub runs: Vec<RunRecord>,
}

#[derive(Clone, Copy)]
struct Cell {
    query: usize,
    strategy: SelectionStrategy,
    k: usize,
    rep: usize,
}

fn trace_ref(c: &Cell) -> String {
    format!("q{}-{}-k{}-r{}", c.query, c.strategy, c.k, c.rep)
}

fn run_cell(spec: &ExperimentSpec, bench: &Workbench, query: &Query, goals: &GoalSet, cell: Cell) -> Result<RunRecord> {
    let seed = run_seed(
        spec.base_seed,
        query.id,
        query.target_id,
        cell.strategy,
        cell.k,
        cell.rep,
    );
    let mut row = ResultRow {
        query_id: query.id,
        target_id: query.target_id,
        strategy: cell.strategy,
        k: cell.k,
        repetition: cell.rep,
        seed,
        elapsed_ms: None,
        length_rad: None,
        exec_time_s: None,
        goal_rank: None,
        success: false,
        trace_ref: trace_ref(&cell),
    };
    if goals.is_empty() {
        return Ok(RunRecord {
            row,
            trace: Vec::new(),
            path: Path::new(vec![query.start.clone()]),
        });
    }
    let result = replay_selected(spec, bench, query, goals, cell.strategy, cell.k, seed)?;
    if result.success {
        row.elapsed_ms = result.solved_at_ms();
        row.length_rad = Some(result.length);
        row.exec_time_s = Some(result.exec_time);
        row.goal_rank = Some(result.goal_rank);
        row.success = true;
    }
    Ok(RunRecord {
        row,
        trace: result.trace,
        path: result.path,
    })
}

fn replay_selected(
    spec: &ExperimentSpec,
    bench: &Workbench,
    query: &Query,
    goals: &GoalSet,
    strategy: SelectionStrategy,
    k: usize,
    seed: u64,
) -> Result<PlanResult> {
    let selected = select_goals(goals, k, strategy, seed)?;
    let cfg = spec.planner_config(planner_seed(seed))?;
    plan(&bench.scene, &bench.robot, &bench.chain, &query.start, &selected, &cfg)
}

/// Re-runs the plan behind `row`.
pub fn replay(spec: &ExperimentSpec, bench: &Workbench, query: &Query, row: &ResultRow) -> Result<PlanResult> {
    let goals = bench.goal_set(query)?;
    replay_selected(spec, bench, query, &goals, row.strategy, row.k, row.seed)
}

/// Goals the planner saw in the run behind `row`.
pub fn selected_goals(bench: &Workbench, query: &Query, row: &ResultRow) -> Result<GoalSet> {
    select_goals(&bench.goal_set(query)?, row.k, row.strategy, row.seed)
}

/// Runs every (query, strategy, k, repetition) cell on up to `workers`
/// threads. Rows come back in canonical order whatever the scheduling.
pub fn run_experiment(spec: &ExperimentSpec, workers: usize) -> Result<Experiment> {
    spec.validate()?;
    let bench = Workbench::build(spec)?;
    run_on(spec, &bench, workers)
}

pub fn run_on(spec: &ExperimentSpec, bench: &Workbench, workers: usize) -> Result<Experiment> {
    spec.validate()?;
    let queries = bench.queries(spec.queries, spec.base_seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let goal_sets: Vec<GoalSet> =
        pool.install(|| queries.par_iter().map(|q| bench.goal_set(q)).collect::<Result<_>>())?;

    let mut cells = Vec::new();
    for q in 0..queries.len() {
        for &strategy in &spec.strategies {
            for &k in &spec.k_values {
                for rep in 0..spec.repetitions {
                    cells.push(Cell {
                        query: q,
                        strategy,
                        k,
                        rep,
                    });
                }
            }
        }
    }
    let mut runs: Vec<RunRecord> = pool.install(|| {
        cells
            .par_iter()
            .map(|&c| run_cell(spec, bench, &queries[c.query], &goal_sets[c.query], c))
            .collect::<Result<_>>()
    })?;
    runs.sort_by_key(|r| r.row.key());
    Ok(Experiment {
        spec: spec.clone(),
        queries,
        runs,
    })
}

/// One trace entry per line, keyed by the row's `trace_ref`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub trace_ref: String,
    pub elapsed_ms: f64,
    pub length_rad: f64,
    pub exec_time_s: f64,
    pub goal_rank: usize,
}

impl Experiment {
    pub fn rows(&self) -> Vec<ResultRow> {
        self.runs.iter().map(|r| r.row.clone()).collect()
    }

    pub fn trace_rows(&self) -> Vec<TraceRow> {
        self.runs
            .iter()
            .flat_map(|r| {
                r.trace.iter().map(|t| TraceRow {
                    trace_ref: r.row.trace_ref.clone(),
                    elapsed_ms: t.elapsed_ms,
                    length_rad: t.length,
                    exec_time_s: t.exec_time,
                    goal_rank: t.goal_rank,
                })
            })
            .collect()
    }

    /// Writes `results.csv`, its `.traces.csv` sidecar and a `.meta.json`
    /// holding the spec and queries.
    pub fn save(&self, csv_path: impl AsRef<FsPath>) -> Result<()> {
        let csv_path = csv_path.as_ref();
        write_csv(csv_path, &self.rows())?;
        write_csv(&sidecar(csv_path, "traces.csv"), &self.trace_rows())?;
        let meta = Meta {
            spec: self.spec.clone(),
            queries: self.queries.clone(),
        };
        let meta_path = sidecar(csv_path, "meta.json");
        std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n").map_err(|e| Error::io(&meta_path, e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub spec: ExperimentSpec,
    pub queries: Vec<Query>,
}

/// `results.csv` → `results.<suffix>`.
pub fn sidecar(csv_path: &FsPath, suffix: &str) -> PathBuf {
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    csv_path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn write_csv<T: Serialize>(path: &FsPath, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &FsPath) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn csv_io(path: &FsPath, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Csv(e)
    }
}

/// Rows, traces and (when present) metadata of a saved experiment.
pub struct SavedResults {
    pub rows: Vec<ResultRow>,
    pub traces: Vec<TraceRow>,
    pub meta: Option<Meta>,
}

pub fn load_results(csv_path: impl AsRef<FsPath>) -> Result<SavedResults> {
    let csv_path = csv_path.as_ref();
    let rows = read_csv(csv_path)?;
    let trace_path = sidecar(csv_path, "traces.csv");
    let traces = if trace_path.exists() {
        read_csv(&trace_path)?
    } else {
        Vec::new()
    };
    let meta_path = sidecar(csv_path, "meta.json");
    let meta = if meta_path.exists() {
        let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        Some(serde_json::from_str(&text)?)
    } else {
        None
    };
    Ok(SavedResults { rows, traces, meta })
}

/// Traces grouped per row, in row order.
pub fn traces_by_row(rows: &[ResultRow], traces: &[TraceRow]) -> Vec<Vec<TraceEntry>> {
    let mut index = std::collections::HashMap::new();
    for (i, r) in rows.iter().enumerate() {
        index.insert(r.trace_ref.as_str(), i);
    }
    let mut out = vec![Vec::new(); rows.len()];
    for t in traces {
        if let Some(&i) = index.get(t.trace_ref.as_str()) {
            out[i].push(TraceEntry {
                elapsed_ms: t.elapsed_ms,
                length: t.length_rad,
                exec_time: t.exec_time_s,
                goal_rank: t.goal_rank,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenes::CubicleParams;

    fn small_spec() -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(
            SceneSpec::cubicles(CubicleParams::default(), 0),
            vec![1, 16],
            vec![SelectionStrategy::Random],
            2,
        );
        spec.repetitions = 3;
        spec.budget_ms = 300.0;
        spec.base_seed = 9;
        spec
    }

    #[test]
    fn row_count_and_order() {
        let exp = run_experiment(&small_spec(), 1).unwrap();
        assert_eq!(exp.runs.len(), 2 * 2 * 3);
        let keys: Vec<_> = exp.runs.iter().map(|r| r.row.key()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        for r in &exp.runs {
            assert_eq!(r.row.success, r.row.length_rad.is_some());
        }
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = run_seed(1, 0, 3, SelectionStrategy::Random, 16, 0);
        assert_eq!(a, run_seed(1, 0, 3, SelectionStrategy::Random, 16, 0));
        assert_ne!(a, run_seed(1, 0, 3, SelectionStrategy::Closest, 16, 0));
        assert_ne!(a, run_seed(1, 0, 3, SelectionStrategy::Random, 16, 1));
        assert_ne!(a, run_seed(2, 0, 3, SelectionStrategy::Random, 16, 0));
    }

    #[test]
    fn csv_round_trip_and_replay() {
        let spec = small_spec();
        let bench = Workbench::build(&spec).unwrap();
        let exp = run_on(&spec, &bench, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        exp.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(
            "query_id,target_id,strategy,k,repetition,seed,elapsed_ms,length_rad,exec_time_s,goal_rank,success,trace_ref\n"
        ));
        assert!(!text.contains('\r'));
        let saved = load_results(&path).unwrap();
        assert_eq!(saved.rows, exp.rows());
        assert_eq!(saved.meta.unwrap().queries, exp.queries);
        let traces = traces_by_row(&saved.rows, &saved.traces);
        for (run, t) in exp.runs.iter().zip(&traces) {
            assert_eq!(&run.trace, t);
        }
        let row = exp.runs.iter().find(|r| r.row.success).unwrap();
        let again = replay(&spec, &bench, &exp.queries[row.row.query_id], &row.row).unwrap();
        assert_eq!(Some(again.length), row.row.length_rad);
        assert_eq!(again.path, row.path);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = small_spec();
        spec.k_values = vec![0];
        assert!(run_experiment(&spec, 1).is_err());
        let mut spec = small_spec();
        spec.queries = 0;
        assert!(spec.validate().is_err());
    }
}
