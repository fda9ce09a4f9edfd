//! Multi-goal anytime planner: a start tree and a goal forest rooted at every
//! goal configuration grow toward each other RRT-Connect style with RRT*
//! parent selection and rewiring. Once a solution exists, sampling is
//! restricted to the informed set and the incumbent is shortcut in rounds.
//!
//! The budget is an iteration count, `ceil(time_budget_ms × iterations_per_ms)`,
//! so results depend only on the inputs and the seed. Trace times are
//! "virtual" milliseconds, `iteration / iterations_per_ms`.

mod informed;
mod nn;
mod shortcut;
mod tree;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::collision::{CollisionWorld, RobotGeometry, Scene};
use crate::error::{check_dim, Error, Result};
use crate::ik::GoalSet;
use crate::kinematics::{distance, Configuration, KinematicChain};
use crate::timing::{execution_time, JointDynamics};

pub use informed::{informed_sample, InformedSampler};
pub use nn::{KdTree, LinearScan, NearestNeighbors};
pub use shortcut::shortcut;

use tree::{Extend, Growth, Tree};

/// Iterations per virtual millisecond unless configured otherwise. Measured
/// on one core, a 2 s cubicle query at this rate takes about 1 s of wall
/// time; the planner's cost per iteration grows with tree size, so no single
/// constant matches wall time for every budget.
pub const DEFAULT_ITERATIONS_PER_MS: f64 = 5.0;

/// Environment variable overriding [`DEFAULT_ITERATIONS_PER_MS`] in the CLI.
pub const CALIBRATION_ENV: &str = "REDUGOAL_CALIBRATION";

/// Calibration constant from [`CALIBRATION_ENV`], falling back to the default.
pub fn iterations_per_ms_from_env() -> Result<f64> {
    match std::env::var(CALIBRATION_ENV) {
        Ok(text) => {
            let v: f64 = text
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("{CALIBRATION_ENV}={text:?} is not a number")))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{CALIBRATION_ENV} must be positive")));
            }
            Ok(v)
        }
        Err(_) => Ok(DEFAULT_ITERATIONS_PER_MS),
    }
}

// Shortcut the incumbent this often even without a new solution.
const SHORTCUT_PERIOD: usize = 64;
const COST_EPS: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Configuration>,
}

impl Path {
    pub fn new(waypoints: Vec<Configuration>) -> Self {
        Path { waypoints }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn length(&self) -> f64 {
        polyline_length(&self.waypoints)
    }

    /// Every waypoint within limits and every edge free at resolution `step`.
    pub fn is_collision_free(&self, world: &CollisionWorld<'_>, step: f64) -> bool {
        match self.waypoints.as_slice() {
            [] => false,
            [only] => matches!(world.config_in_collision(only), Ok(false)),
            many => many
                .windows(2)
                .all(|w| matches!(world.edge_in_collision(&w[0], &w[1], step), Ok(false))),
        }
    }
}

fn polyline_length(waypoints: &[Configuration]) -> f64 {
    waypoints.windows(2).map(|w| distance(&w[0], &w[1])).sum()
}

/// Sum of joint-space segment lengths; zero for a single waypoint.
pub fn path_length(path: &Path) -> f64 {
    path.length()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeighborIndex {
    #[default]
    Linear,
    KdTree,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub time_budget_ms: f64,
    pub extend_step: f64,
    pub edge_check_step: f64,
    pub seed: u64,
    pub shortcut_attempts_per_round: usize,
    pub informed_sampling: bool,
    /// Trace timestamps are rounded up to a multiple of this; 0 keeps them exact.
    pub trace_resolution_ms: f64,
    /// Probability of steering the start tree straight at a goal.
    pub goal_bias: f64,
    pub rewire_radius: f64,
    pub iterations_per_ms: f64,
    /// Defaults to π rad/s and 2π rad/s² on every joint.
    pub dynamics: Option<JointDynamics>,
    pub nearest_neighbors: NeighborIndex,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            time_budget_ms: 1000.0,
            extend_step: 0.2,
            edge_check_step: 0.02,
            seed: 0,
            shortcut_attempts_per_round: 20,
            informed_sampling: true,
            trace_resolution_ms: 1.0,
            goal_bias: 0.05,
            rewire_radius: 1.0,
            iterations_per_ms: DEFAULT_ITERATIONS_PER_MS,
            dynamics: None,
            nearest_neighbors: NeighborIndex::Linear,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("time_budget_ms", self.time_budget_ms),
            ("extend_step", self.extend_step),
            ("edge_check_step", self.edge_check_step),
            ("iterations_per_ms", self.iterations_per_ms),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err(Error::InvalidArgument("goal_bias must lie in [0, 1]".into()));
        }
        if !(self.rewire_radius >= 0.0) || !(self.trace_resolution_ms >= 0.0) {
            return Err(Error::InvalidArgument(
                "rewire_radius and trace_resolution_ms must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn iteration_budget(&self) -> usize {
        (self.time_budget_ms * self.iterations_per_ms).ceil() as usize
    }

    fn dynamics_for(&self, dof: usize) -> Result<JointDynamics> {
        match &self.dynamics {
            Some(d) => {
                check_dim(dof, d.dof())?;
                Ok(d.clone())
            }
            None => JointDynamics::uniform(dof, std::f64::consts::PI, std::f64::consts::TAU),
        }
    }
}

/// The best solution as of `elapsed_ms`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub elapsed_ms: f64,
    pub length: f64,
    pub exec_time: f64,
    pub goal_rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    #[serde(flatten)]
    pub path: Path,
    pub length: f64,
    pub exec_time: f64,
    /// Rank of the path's final waypoint in the goal set; 0 without a solution.
    pub goal_rank: usize,
    pub success: bool,
    pub trace: Vec<TraceEntry>,
    pub seed: u64,
    pub iterations_per_ms: f64,
    pub iterations: usize,
    /// Wall-clock duration; informational only.
    pub wall_ms: f64,
}

impl PlanResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Virtual time at which the final solution was found.
    pub fn solved_at_ms(&self) -> Option<f64> {
        self.trace.last().map(|t| t.elapsed_ms)
    }
}

struct Incumbent {
    waypoints: Vec<Configuration>,
    length: f64,
    goal: usize,
}

struct Search<'w, 'a, N> {
    cfg: &'w PlannerConfig,
    growth: Growth<'w, 'a>,
    goals: &'w GoalSet,
    start: &'w [f64],
    free: Vec<usize>,
    start_tree: Tree<N>,
    goal_tree: Tree<N>,
    best_tree_cost: Vec<f64>,
    incumbent: Option<Incumbent>,
    trace: Vec<TraceEntry>,
    dynamics: JointDynamics,
    rng: ChaCha8Rng,
}

impl<N: NearestNeighbors> Search<'_, '_, N> {
    fn now_ms(&self, iteration: usize) -> f64 {
        let t = iteration as f64 / self.cfg.iterations_per_ms;
        let res = self.cfg.trace_resolution_ms;
        if res > 0.0 {
            (t / res).ceil() * res
        } else {
            t
        }
    }

    fn record(&mut self, iteration: usize) -> Result<()> {
        let inc = self.incumbent.as_ref().expect("recording requires a solution");
        let entry = TraceEntry {
            elapsed_ms: self.now_ms(iteration),
            length: inc.length,
            exec_time: execution_time(&inc.waypoints, &self.dynamics)?,
            goal_rank: self.goals.ranks[inc.goal],
        };
        match self.trace.last_mut() {
            Some(last) if last.elapsed_ms == entry.elapsed_ms => *last = entry,
            _ => self.trace.push(entry),
        }
        Ok(())
    }

    fn edge_ok(&self, a: &[f64], b: &[f64]) -> bool {
        matches!(
            self.growth.world.edge_in_collision(a, b, self.cfg.edge_check_step),
            Ok(false)
        )
    }

    fn shortcut_round(&mut self, path: &mut Vec<Configuration>) -> bool {
        let attempts = self.cfg.shortcut_attempts_per_round;
        let full = shortcut::shortcut_in_place(
            path,
            self.growth.world,
            attempts.div_ceil(2),
            self.cfg.edge_check_step,
            &mut self.rng,
        );
        let partial = shortcut::partial_shortcut_in_place(
            path,
            self.growth.world,
            attempts / 2,
            self.cfg.edge_check_step,
            &mut self.rng,
        );
        full | partial
    }

    /// A connection between start-tree node `s` and goal-forest node `g`.
    /// Returns whether the incumbent changed.
    fn consider(&mut self, s: usize, g: usize) -> bool {
        let goal = self.goal_tree.root_tag(g);
        let tree_cost = self.start_tree.cost(s) + self.goal_tree.cost(g);
        if tree_cost >= self.best_tree_cost[goal] - COST_EPS {
            return false;
        }
        self.best_tree_cost[goal] = tree_cost;

        let mut path = self.start_tree.branch(s);
        path.reverse();
        path.extend(self.goal_tree.branch(g));
        path.dedup_by(|b, a| distance(a, b) == 0.0);
        let valid = path.iter().all(|q| self.growth.world.chain.within_limits(q))
            && path.windows(2).all(|w| self.edge_ok(&w[0], &w[1]));
        if !valid {
            return false;
        }
        if let Some((best, best_goal)) = self.incumbent.as_ref().map(|i| (i.length, i.goal)) {
            if polyline_length(&path) >= best - COST_EPS {
                // A raw tree path to a different goal may still beat the
                // smoothed incumbent once smoothed itself.
                let bound = distance(self.start, &self.goals.configs[goal]);
                if goal == best_goal || bound >= best - COST_EPS {
                    return false;
                }
                self.shortcut_round(&mut path);
                if polyline_length(&path) >= best - COST_EPS {
                    return false;
                }
            }
        }
        self.shortcut_round(&mut path);
        let length = polyline_length(&path);
        self.incumbent = Some(Incumbent {
            waypoints: path,
            length,
            goal,
        });
        true
    }

    fn improve_incumbent(&mut self) -> bool {
        let Some(mut inc) = self.incumbent.take() else {
            return false;
        };
        let mut improved = self.switch_goals(&mut inc);
        improved |= self.shortcut_round(&mut inc.waypoints);
        if improved {
            inc.length = polyline_length(&inc.waypoints);
        }
        self.incumbent = Some(inc);
        improved
    }

    /// Tries to replace the tail of the incumbent after a random point with a
    /// straight segment to some other goal that would make it shorter.
    fn switch_goals(&mut self, inc: &mut Incumbent) -> bool {
        if self.free.len() < 2 {
            return false;
        }
        let mut improved = false;
        for _ in 0..self.cfg.shortcut_attempts_per_round.div_ceil(2) {
            let path = &inc.waypoints;
            let mut cumulative = vec![0.0];
            for w in path.windows(2) {
                cumulative.push(cumulative.last().unwrap() + distance(&w[0], &w[1]));
            }
            let total = *cumulative.last().unwrap();
            let s = self.rng.random::<f64>() * total;
            let seg = cumulative
                .partition_point(|&c| c <= s)
                .saturating_sub(1)
                .min(path.len().saturating_sub(2));
            let point: Vec<f64> = if path.len() < 2 {
                path[0].to_vec()
            } else {
                let len = cumulative[seg + 1] - cumulative[seg];
                let t = if len > 0.0 { (s - cumulative[seg]) / len } else { 0.0 };
                path[seg]
                    .iter()
                    .zip(path[seg + 1].iter())
                    .map(|(a, b)| a + (b - a) * t)
                    .collect()
            };
            let candidates: Vec<usize> = self
                .free
                .iter()
                .copied()
                .filter(|&g| g != inc.goal && s + distance(&point, &self.goals.configs[g]) < total - COST_EPS)
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let g = candidates[self.rng.random_range(0..candidates.len())];
            let goal = &self.goals.configs[g];
            if !self.growth.world.chain.within_limits(&point)
                || !self.edge_ok(&path[seg], &point)
                || !self.edge_ok(&point, goal)
            {
                continue;
            }
            let mut next = path[..=seg].to_vec();
            next.push(Configuration(point));
            next.push(goal.clone());
            next.dedup_by(|b, a| distance(a, b) == 0.0);
            inc.waypoints = next;
            inc.length = polyline_length(&inc.waypoints);
            inc.goal = g;
            improved = true;
        }
        improved
    }

    fn pick_goal(&mut self) -> Option<Vec<f64>> {
        let bound = self.incumbent.as_ref().map_or(f64::INFINITY, |i| i.length);
        let admissible: Vec<usize> = self
            .free
            .iter()
            .copied()
            .filter(|&i| distance(self.start, &self.goals.configs[i]) < bound)
            .collect();
        if admissible.is_empty() {
            return None;
        }
        let i = admissible[self.rng.random_range(0..admissible.len())];
        Some(self.goals.configs[i].to_vec())
    }

    fn run(mut self, sampler: &mut InformedSampler<'_>) -> Result<(Option<Incumbent>, Vec<TraceEntry>, usize)> {
        let budget = self.cfg.iteration_budget();
        for iteration in 1..=budget {
            // Grow the smaller tree: a tree stuck in a narrow region gets the
            // attempts it needs to get out.
            let grow_start = self.start_tree.len() <= self.goal_tree.len();
            let mut target = None;
            if grow_start && self.cfg.goal_bias > 0.0 && self.rng.random::<f64>() < self.cfg.goal_bias {
                target = self.pick_goal();
            }
            let target = match target {
                Some(t) => t,
                None if self.cfg.informed_sampling && self.incumbent.is_some() => sampler.sample(&mut self.rng).0,
                None => self.growth.world.chain.sample_uniform(&mut self.rng).0,
            };

            let mut improved = false;
            let (grown, other) = if grow_start {
                (&mut self.start_tree, &mut self.goal_tree)
            } else {
                (&mut self.goal_tree, &mut self.start_tree)
            };
            let ex = grown.extend(&self.growth, &target);
            if let Extend::Advanced(id) | Extend::Reached(id) = ex {
                let q_new = grown.q(id).to_vec();
                if let Extend::Reached(jd) = other.connect(&self.growth, &q_new) {
                    let (s, g) = if grow_start { (id, jd) } else { (jd, id) };
                    improved = self.consider(s, g);
                }
            }
            if self.incumbent.is_some() && iteration % SHORTCUT_PERIOD == 0 {
                improved |= self.improve_incumbent();
            }
            if improved {
                let cost = self.incumbent.as_ref().unwrap().length;
                sampler.set_cost(cost);
                self.record(iteration)?;
            }
        }
        Ok((self.incumbent, self.trace, budget))
    }
}

fn failure(start: &Configuration, cfg: &PlannerConfig, iterations: usize, began: Instant) -> PlanResult {
    PlanResult {
        path: Path::new(vec![start.clone()]),
        length: 0.0,
        exec_time: 0.0,
        goal_rank: 0,
        success: false,
        trace: Vec::new(),
        seed: cfg.seed,
        iterations_per_ms: cfg.iterations_per_ms,
        iterations,
        wall_ms: began.elapsed().as_secs_f64() * 1e3,
    }
}

/// Plans from `start` to any member of `goals`, minimizing joint-space path
/// length within the configured iteration budget.
pub fn plan(
    scene: &Scene,
    robot: &RobotGeometry,
    chain: &KinematicChain,
    start: &Configuration,
    goals: &GoalSet,
    cfg: &PlannerConfig,
) -> Result<PlanResult> {
    let began = Instant::now();
    cfg.validate()?;
    check_dim(chain.dof(), start.len())?;
    let dynamics = cfg.dynamics_for(chain.dof())?;
    if goals.is_empty() {
        return Err(Error::Empty("goal set".into()));
    }
    for g in &goals.configs {
        check_dim(chain.dof(), g.len())?;
    }
    let world = CollisionWorld::new(scene, robot, chain)?;
    if !chain.within_limits(start) {
        return Err(Error::Precondition(
            "start configuration is outside the joint limits".into(),
        ));
    }
    if world.collides_unchecked(start) {
        return Err(Error::Precondition("start configuration is in collision".into()));
    }

    let free: Vec<usize> = (0..goals.len())
        .filter(|&i| chain.within_limits(&goals.configs[i]) && !world.collides_unchecked(&goals.configs[i]))
        .collect();
    if free.is_empty() {
        return Ok(failure(start, cfg, 0, began));
    }
    if let Some(&i) = free.iter().find(|&&i| distance(start, &goals.configs[i]) == 0.0) {
        let rank = goals.ranks[i];
        return Ok(PlanResult {
            path: Path::new(vec![start.clone()]),
            length: 0.0,
            exec_time: 0.0,
            goal_rank: rank,
            success: true,
            trace: vec![TraceEntry {
                elapsed_ms: 0.0,
                length: 0.0,
                exec_time: 0.0,
                goal_rank: rank,
            }],
            seed: cfg.seed,
            iterations_per_ms: cfg.iterations_per_ms,
            iterations: 0,
            wall_ms: began.elapsed().as_secs_f64() * 1e3,
        });
    }

    let outcome = match cfg.nearest_neighbors {
        NeighborIndex::Linear => search(&world, start, goals, free, cfg, dynamics.clone(), LinearScan::new)?,
        NeighborIndex::KdTree => search(&world, start, goals, free, cfg, dynamics.clone(), KdTree::new)?,
    };
    let (incumbent, trace, iterations) = outcome;
    let Some(inc) = incumbent else {
        return Ok(failure(start, cfg, iterations, began));
    };
    let exec_time = execution_time(&inc.waypoints, &dynamics)?;
    Ok(PlanResult {
        path: Path::new(inc.waypoints),
        length: inc.length,
        exec_time,
        goal_rank: goals.ranks[inc.goal],
        success: true,
        trace,
        seed: cfg.seed,
        iterations_per_ms: cfg.iterations_per_ms,
        iterations,
        wall_ms: began.elapsed().as_secs_f64() * 1e3,
    })
}

type Outcome = (Option<Incumbent>, Vec<TraceEntry>, usize);

fn search<N: NearestNeighbors>(
    world: &CollisionWorld<'_>,
    start: &Configuration,
    goals: &GoalSet,
    free: Vec<usize>,
    cfg: &PlannerConfig,
    dynamics: JointDynamics,
    make_index: impl Fn(usize) -> N,
) -> Result<Outcome> {
    let dof = start.len();
    let mut start_tree = Tree::new(make_index(dof), true);
    start_tree.add_root(start, 0);
    let mut goal_tree = Tree::new(make_index(dof), false);
    for &i in &free {
        goal_tree.add_root(&goals.configs[i], i);
    }
    let goal_refs: Vec<&[f64]> = free.iter().map(|&i| goals.configs[i].as_slice()).collect();
    let mut sampler = InformedSampler::new(world.chain, start, goal_refs, f64::INFINITY);
    let search = Search {
        cfg,
        growth: Growth {
            world,
            extend_step: cfg.extend_step,
            edge_step: cfg.edge_check_step,
            rewire_radius: cfg.rewire_radius,
        },
        goals,
        start,
        best_tree_cost: vec![f64::INFINITY; goals.len()],
        free,
        start_tree,
        goal_tree,
        incumbent: None,
        trace: Vec::new(),
        dynamics,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    search.run(&mut sampler)
}
