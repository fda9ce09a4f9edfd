//! Closed-form inverse kinematics for UR-class 6R arms and goal-set
//! construction: every distinct arm pose solving a task, expanded by its
//! equivalent configurations, ranked by joint-space distance to the start.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{UnitQuaternion, Vector3};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{distance, Configuration, Frame, KinematicChain, Pose};

/// Tolerance for FK verification of IK solutions (meters and radians).
pub const IK_TOLERANCE: f64 = 1e-6;
/// Two solutions describe the same arm pose iff all link origins agree to this.
pub const SAME_POSE_TOLERANCE: f64 = 1e-9;
/// `|sin(q5)|` below this is a wrist singularity.
pub const WRIST_SINGULAR: f64 = 1e-8;
/// Number of tool-axis roll angles tried for free-orientation goals.
pub const ROLL_GRID: usize = 32;

const GEOMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrientationMode {
    Fixed,
    FreeAboutToolAxis,
}

/// Workspace task: a tool pose, optionally free to roll about the tool z axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TaskGoalRepr", into = "TaskGoalRepr")]
pub struct TaskGoal {
    pub target: Pose,
    pub orientation_mode: OrientationMode,
    pub max_distinct_poses: usize,
    /// Phase seed for the roll grid; unused in fixed mode.
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct TaskGoalRepr {
    position: [f64; 3],
    quaternion: [f64; 4],
    orientation_mode: OrientationMode,
    max_distinct_poses: usize,
    #[serde(default)]
    seed: u64,
}

impl TryFrom<TaskGoalRepr> for TaskGoal {
    type Error = Error;

    fn try_from(r: TaskGoalRepr) -> Result<Self> {
        let [w, x, y, z] = r.quaternion;
        let q = nalgebra::Quaternion::new(w, x, y, z);
        if !(q.norm() > 0.0) {
            return Err(Error::InvalidArgument("zero quaternion".into()));
        }
        let goal = TaskGoal {
            target: Pose::new(Vector3::from(r.position), UnitQuaternion::from_quaternion(q)),
            orientation_mode: r.orientation_mode,
            max_distinct_poses: r.max_distinct_poses,
            seed: r.seed,
        };
        goal.validate()?;
        Ok(goal)
    }
}

impl From<TaskGoal> for TaskGoalRepr {
    fn from(g: TaskGoal) -> Self {
        let q = g.target.orientation.quaternion();
        let p = g.target.position;
        TaskGoalRepr {
            position: [p.x, p.y, p.z],
            quaternion: [q.w, q.i, q.j, q.k],
            orientation_mode: g.orientation_mode,
            max_distinct_poses: g.max_distinct_poses,
            seed: g.seed,
        }
    }
}

impl TaskGoal {
    pub fn fixed(target: Pose, max_distinct_poses: usize) -> Self {
        TaskGoal {
            target,
            orientation_mode: OrientationMode::Fixed,
            max_distinct_poses,
            seed: 0,
        }
    }

    pub fn free_roll(target: Pose, max_distinct_poses: usize, seed: u64) -> Self {
        TaskGoal {
            target,
            orientation_mode: OrientationMode::FreeAboutToolAxis,
            max_distinct_poses,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_distinct_poses == 0 {
            return Err(Error::InvalidArgument("max_distinct_poses must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Tool poses to try, in order.
    fn candidate_targets(&self) -> Vec<Pose> {
        match self.orientation_mode {
            OrientationMode::Fixed => vec![self.target],
            OrientationMode::FreeAboutToolAxis => {
                let phase: f64 = ChaCha8Rng::seed_from_u64(self.seed).random();
                (0..ROLL_GRID)
                    .map(|k| {
                        let roll = (k as f64 + phase) * TAU / ROLL_GRID as f64;
                        let spin = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), roll);
                        Pose::new(self.target.position, self.target.orientation * spin)
                    })
                    .collect()
            }
        }
    }
}

/// UR-class geometry extracted from a chain's DH rows.
#[derive(Clone, Copy, Debug)]
struct UrGeometry {
    a2: f64,
    a3: f64,
    d4: f64,
    d6: f64,
}

fn ur_geometry(chain: &KinematicChain) -> Result<UrGeometry> {
    let j = chain.joints();
    if j.len() != 6 {
        return Err(Error::UnsupportedChain(format!(
            "closed-form solver needs 6 joints, chain has {}",
            j.len()
        )));
    }
    let alphas = [FRAC_PI_2, 0.0, 0.0, FRAC_PI_2, -FRAC_PI_2, 0.0];
    let ok_alpha = j.iter().zip(alphas).all(|(jm, a)| (jm.alpha - a).abs() < GEOMETRY_TOL);
    let zero_a = [0, 3, 4, 5].iter().all(|&i| j[i].a.abs() < GEOMETRY_TOL);
    let zero_d = [1, 2].iter().all(|&i| j[i].d.abs() < GEOMETRY_TOL);
    let nonzero = j[1].a.abs() > GEOMETRY_TOL && j[2].a.abs() > GEOMETRY_TOL && j[5].d.abs() > GEOMETRY_TOL;
    if !(ok_alpha && zero_a && zero_d && nonzero) {
        return Err(Error::UnsupportedChain(format!(
            "`{}` does not have UR-class DH structure",
            chain.name()
        )));
    }
    Ok(UrGeometry {
        a2: j[1].a,
        a3: j[2].a,
        d4: j[3].d,
        d6: j[5].d,
    })
}

fn clamp_unit(x: f64, tol: f64) -> Option<f64> {
    if x.abs() > 1.0 + tol {
        None
    } else {
        Some(x.clamp(-1.0, 1.0))
    }
}

/// Raw DH joint angles (before offsets and wrapping) solving `flange`,
/// the pose of the last DH frame relative to the base frame.
fn solve_raw(chain: &KinematicChain, geo: UrGeometry, flange: &Frame) -> Vec<[f64; 6]> {
    let joints = chain.joints();
    let dh = |i: usize, theta: f64| joints[i].transform(theta - joints[i].theta_offset);
    let r = flange.rotation.to_rotation_matrix();
    let r = r.matrix();
    let p06 = flange.translation.vector;
    let p05 = p06 - geo.d6 * r.column(2);

    let radius = p05.x.hypot(p05.y);
    let Some(ratio) = (radius > 0.0)
        .then(|| geo.d4 / radius)
        .and_then(|x| clamp_unit(x, 1e-12))
    else {
        return Vec::new();
    };
    let psi = p05.y.atan2(p05.x);
    let phi = ratio.acos();

    let mut out = Vec::with_capacity(8);
    for theta1 in [psi + phi + FRAC_PI_2, psi - phi + FRAC_PI_2] {
        let (s1, c1) = theta1.sin_cos();
        let Some(c5) = clamp_unit((p06.x * s1 - p06.y * c1 - geo.d4) / geo.d6, 1e-9) else {
            continue;
        };
        let acos5 = c5.acos();
        for theta5 in [acos5, -acos5] {
            let s5 = theta5.sin();
            let singular = s5.abs() < WRIST_SINGULAR;
            let theta6 = if singular {
                0.0
            } else {
                let y = (-r[(0, 1)] * s1 + r[(1, 1)] * c1) / s5;
                let x = (r[(0, 0)] * s1 - r[(1, 0)] * c1) / s5;
                y.atan2(x)
            };
            let t14 = dh(0, theta1).inverse() * flange * (dh(4, theta5) * dh(5, theta6)).inverse();
            let p14 = t14.translation.vector;
            let rot14 = t14.rotation.to_rotation_matrix();
            let theta234 = rot14[(1, 0)].atan2(rot14[(0, 0)]);
            let reach_sq = p14.x * p14.x + p14.y * p14.y;
            let Some(c3) = clamp_unit(
                (reach_sq - geo.a2 * geo.a2 - geo.a3 * geo.a3) / (2.0 * geo.a2 * geo.a3),
                1e-9,
            ) else {
                continue;
            };
            let acos3 = c3.acos();
            for theta3 in [acos3, -acos3] {
                let s3 = theta3.sin();
                let theta2 = p14.y.atan2(p14.x) - (geo.a3 * s3).atan2(geo.a2 + geo.a3 * c3);
                let mut theta4 = theta234 - theta2 - theta3;
                let mut theta6 = theta6;
                if singular {
                    // Joint 4 and joint 6 axes coincide; fold the whole
                    // rotation into joint 6.
                    theta6 += if c5 > 0.0 { theta4 } else { -theta4 };
                    theta4 = 0.0;
                }
                out.push([theta1, theta2, theta3, theta4, theta5, theta6]);
            }
        }
    }
    out
}

fn same_pose(a: &[Frame], b: &[Frame]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x.translation.vector - y.translation.vector).norm() <= SAME_POSE_TOLERANCE)
}

/// Maps an angle into `(-π, π]` before limit wrapping so results do not
/// depend on which branch `atan2` chose.
fn principal(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    if a > PI {
        a - TAU
    } else {
        a
    }
}

/// All closed-form IK solutions for a UR-class chain, wrapped into the joint
/// limits and verified by forward kinematics. Unreachable targets give an
/// empty list; at most one configuration is returned per distinct arm pose.
pub fn analytic_ik_6r(chain: &KinematicChain, target: &Pose) -> Result<Vec<Configuration>> {
    let geo = ur_geometry(chain)?;
    let flange = chain.base_frame().inverse() * target.to_frame() * chain.tool_frame().inverse();
    let mut solutions: Vec<(Configuration, Vec<Frame>)> = Vec::new();
    'raw: for raw in solve_raw(chain, geo, &flange) {
        let mut q = Vec::with_capacity(6);
        for (joint, theta) in chain.joints().iter().zip(raw) {
            match joint.wrap_into_limits(principal(theta - joint.theta_offset)) {
                Some(v) => q.push(v),
                None => continue 'raw,
            }
        }
        let frames = chain.link_frames(&q)?;
        let reached = Pose::from_frame(frames.last().expect("six frames"));
        let (dp, dr) = reached.error_to(target);
        if !(dp <= IK_TOLERANCE && dr <= IK_TOLERANCE) {
            continue;
        }
        if solutions.iter().any(|(_, f)| same_pose(f, &frames)) {
            continue;
        }
        solutions.push((Configuration(q), frames));
    }
    Ok(solutions.into_iter().map(|(q, _)| q).collect())
}

/// Goal configurations for one task, ranked by distance to `start`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalSet {
    pub configs: Vec<Configuration>,
    pub start: Configuration,
    /// `ranks[i]` is the 1-based rank of `configs[i]`.
    pub ranks: Vec<usize>,
    /// Index of the distinct arm pose each configuration came from.
    pub pose_index: Vec<usize>,
}

impl GoalSet {
    /// Builds a set from configurations in insertion order and ranks them.
    pub fn new(start: Configuration, configs: Vec<Configuration>, pose_index: Vec<usize>) -> Self {
        let ranks = compute_ranks(&start, &configs);
        GoalSet {
            configs,
            start,
            ranks,
            pose_index,
        }
    }

    pub fn empty(start: Configuration) -> Self {
        GoalSet::new(start, Vec::new(), Vec::new())
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    /// Indices into `configs` ordered by rank.
    pub fn by_rank(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by_key(|&i| self.ranks[i]);
        order
    }

    pub fn distance_to_start(&self, i: usize) -> f64 {
        distance(&self.start, &self.configs[i])
    }

    /// Index of the member equal to `q` within 1e-12 per coordinate.
    pub fn position_of(&self, q: &[f64]) -> Option<usize> {
        self.configs.iter().position(|c| nearly_equal(c, q))
    }

    pub fn rank_of(&self, q: &[f64]) -> Option<usize> {
        self.position_of(q).map(|i| self.ranks[i])
    }

    /// Keeps only members for which `keep` returns true, re-ranking the rest.
    pub fn retain(&self, mut keep: impl FnMut(&Configuration) -> bool) -> GoalSet {
        let (configs, pose_index): (Vec<_>, Vec<_>) = self
            .configs
            .iter()
            .zip(&self.pose_index)
            .filter(|(c, _)| keep(c))
            .map(|(c, &p)| (c.clone(), p))
            .unzip();
        GoalSet::new(self.start.clone(), configs, pose_index)
    }
}

fn nearly_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12)
}

fn compute_ranks(start: &[f64], configs: &[Configuration]) -> Vec<usize> {
    let dists: Vec<f64> = configs.iter().map(|c| distance(start, c)).collect();
    let mut order: Vec<usize> = (0..configs.len()).collect();
    // stable: ties keep insertion order
    order.sort_by(|&a, &b| dists[a].total_cmp(&dists[b]));
    let mut ranks = vec![0; configs.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

/// Distinct-pose IK solutions for the task, capped at `max_distinct_poses`.
pub fn distinct_pose_solutions(chain: &KinematicChain, goal: &TaskGoal) -> Result<Vec<Configuration>> {
    goal.validate()?;
    let mut picked: Vec<(Configuration, Vec<Frame>)> = Vec::new();
    'targets: for target in goal.candidate_targets() {
        for q in analytic_ik_6r(chain, &target)? {
            if picked.len() >= goal.max_distinct_poses {
                break 'targets;
            }
            let frames = chain.link_frames(&q)?;
            if !picked.iter().any(|(_, f)| same_pose(f, &frames)) {
                picked.push((q, frames));
            }
        }
        if picked.len() >= goal.max_distinct_poses {
            break;
        }
    }
    Ok(picked.into_iter().map(|(q, _)| q).collect())
}

/// Inverse solutions for the task, each expanded into its equivalent
/// configurations, deduplicated and ranked against `start`.
pub fn compute_goal_configurations(chain: &KinematicChain, goal: &TaskGoal, start: &Configuration) -> Result<GoalSet> {
    chain.check_in_limits(start)?;
    let mut configs: Vec<Configuration> = Vec::new();
    let mut pose_index = Vec::new();
    for (pose, q) in distinct_pose_solutions(chain, goal)?.into_iter().enumerate() {
        for eq in chain.equivalent_configurations(&q)? {
            if !configs.iter().any(|c| nearly_equal(c, &eq)) {
                configs.push(eq);
                pose_index.push(pose);
            }
        }
    }
    Ok(GoalSet::new(start.clone(), configs, pose_index))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionStrategy {
    Random,
    Closest,
}

impl SelectionStrategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectionStrategy::Random => "random",
            SelectionStrategy::Closest => "closest",
        }
    }
}

impl std::str::FromStr for SelectionStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SelectionStrategy::Random),
            "closest" => Ok(SelectionStrategy::Closest),
            other => Err(Error::InvalidArgument(format!("unknown strategy `{other}`"))),
        }
    }
}

impl std::fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Picks `k` goals: the `k` best-ranked, or `k` drawn without replacement
/// with a seeded generator. The result keeps the input's relative order and
/// is re-ranked against the same start.
pub fn select_goals(set: &GoalSet, k: usize, strategy: SelectionStrategy, seed: u64) -> Result<GoalSet> {
    if set.is_empty() {
        return Err(Error::Empty("cannot select from an empty goal set".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k >= set.len() {
        return Ok(set.clone());
    }
    let mut chosen: Vec<usize> = match strategy {
        SelectionStrategy::Closest => set.by_rank().into_iter().take(k).collect(),
        SelectionStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            index::sample(&mut rng, set.len(), k).into_vec()
        }
    };
    chosen.sort_unstable();
    let configs = chosen.iter().map(|&i| set.configs[i].clone()).collect();
    let pose_index = chosen.iter().map(|&i| set.pose_index[i]).collect();
    Ok(GoalSet::new(set.start.clone(), configs, pose_index))
}
