//! C ABI over the redugoal toolkit.
//!
//! Every fallible call returns an [`RgStatus`]; on failure the message is kept
//! per thread and can be read with [`rg_last_error`]. Arrays are caller-owned:
//! functions that produce a variable number of configurations take a buffer
//! capacity (in configurations), always report the required count, and fail
//! with `RG_BUFFER_TOO_SMALL` when it does not fit.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use redugoal::collision::{RobotGeometry, Scene};
use redugoal::ik::{analytic_ik_6r, compute_goal_configurations, select_goals, SelectionStrategy, TaskGoal};
use redugoal::kinematics::{Configuration, KinematicChain, Pose};
use redugoal::planner::{plan, PlannerConfig};
use redugoal::scenes::{build_scene, CubicleParams, SceneSpec, VineParams};
use redugoal::timing::{execution_time, segment_time, JointDynamics};
use redugoal::Error;

#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RgStatus {
    RG_OK = 0,
    RG_NULL_POINTER = 1,
    RG_INVALID_ARGUMENT = 2,
    RG_DIMENSION_MISMATCH = 3,
    RG_OUT_OF_LIMITS = 4,
    RG_UNSUPPORTED_CHAIN = 5,
    RG_PRECONDITION = 6,
    RG_NOT_FOUND = 7,
    RG_EMPTY = 8,
    RG_IO = 9,
    RG_PARSE = 10,
    RG_GENERATION = 11,
    RG_BUFFER_TOO_SMALL = 12,
    RG_PANIC = 13,
}

#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RgStrategy {
    RG_STRATEGY_CLOSEST = 0,
    RG_STRATEGY_RANDOM = 1,
}

/// Opaque kinematic chain.
pub struct RgChain(KinematicChain);

/// Opaque obstacle scene together with the robot geometry checked against it.
pub struct RgScene {
    scene: Scene,
    robot: RobotGeometry,
    tasks: Vec<TaskGoal>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RgStatus {
    match e {
        Error::DimensionMismatch { .. } => RgStatus::RG_DIMENSION_MISMATCH,
        Error::InvalidArgument(_) => RgStatus::RG_INVALID_ARGUMENT,
        Error::OutOfLimits(_) => RgStatus::RG_OUT_OF_LIMITS,
        Error::UnsupportedChain(_) => RgStatus::RG_UNSUPPORTED_CHAIN,
        Error::Precondition(_) => RgStatus::RG_PRECONDITION,
        Error::Generation(_) => RgStatus::RG_GENERATION,
        Error::UnknownPreset(_) => RgStatus::RG_NOT_FOUND,
        Error::Empty(_) => RgStatus::RG_EMPTY,
        Error::Io { .. } => RgStatus::RG_IO,
        Error::Json(_) | Error::Csv(_) => RgStatus::RG_PARSE,
    }
}

struct Failure(RgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RgStatus::RG_NULL_POINTER, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RgStatus::RG_OK,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RgStatus::RG_PANIC
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(RgStatus::RG_INVALID_ARGUMENT, format!("`{what}` is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Copies `configs` row-major into `out`, which holds `capacity` rows of `dof`.
unsafe fn write_configs(
    configs: &[Configuration],
    dof: usize,
    out: *mut f64,
    capacity: usize,
    out_count: *mut usize,
) -> Result<(), Failure> {
    *out_ref(out_count, "out_count")? = configs.len();
    if configs.len() > capacity {
        return Err(Failure(
            RgStatus::RG_BUFFER_TOO_SMALL,
            format!("{} configurations do not fit in a buffer of {capacity}", configs.len()),
        ));
    }
    if configs.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("out"));
    }
    let buf = std::slice::from_raw_parts_mut(out, capacity * dof);
    for (row, q) in buf.chunks_exact_mut(dof).zip(configs) {
        row.copy_from_slice(q.as_slice());
    }
    Ok(())
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(RgStatus::RG_INVALID_ARGUMENT, "string contains a NUL byte".into()))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a chain preset by name (`ur5`, `ur5-elbow-limited`, `ur5-vine`) or
/// from a JSON file.
///
/// # Safety
/// `name_or_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_chain_load(name_or_path: *const c_char, out: *mut *mut RgChain) -> RgStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let chain = KinematicChain::load(str_arg(name_or_path, "name_or_path")?)?;
        *out = Box::into_raw(Box::new(RgChain(chain)));
        Ok(())
    })
}

/// # Safety
/// `chain` must be null or a handle from [`rg_chain_load`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rg_chain_free(chain: *mut RgChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Number of joints, or 0 for a null handle.
///
/// # Safety
/// `chain` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rg_chain_dof(chain: *const RgChain) -> usize {
    chain.as_ref().map_or(0, |c| c.0.dof())
}

/// Upper bound on the equivalent configurations of any single configuration.
///
/// # Safety
/// `chain` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rg_chain_max_equivalent_count(chain: *const RgChain) -> usize {
    chain.as_ref().map_or(0, |c| c.0.max_equivalent_count())
}

/// Tool pose for `q`: position (x, y, z) and unit quaternion (w, x, y, z).
///
/// # Safety
/// `q` must hold `n` values, `position` 3 and `quaternion` 4.
#[no_mangle]
pub unsafe extern "C" fn rg_forward_kinematics(
    chain: *const RgChain,
    q: *const f64,
    n: usize,
    position: *mut f64,
    quaternion: *mut f64,
) -> RgStatus {
    guard(|| {
        let chain = &chain.as_ref().ok_or_else(|| null("chain"))?.0;
        let pose = chain.forward_kinematics(slice_arg(q, n, "q")?)?;
        if position.is_null() || quaternion.is_null() {
            return Err(null("position/quaternion"));
        }
        let p = pose.position;
        let r = pose.orientation.quaternion();
        std::slice::from_raw_parts_mut(position, 3).copy_from_slice(&[p.x, p.y, p.z]);
        std::slice::from_raw_parts_mut(quaternion, 4).copy_from_slice(&[r.w, r.i, r.j, r.k]);
        Ok(())
    })
}

/// All in-limit configurations `q + 2πk` (including `q` itself when it is
/// within limits), written row-major into `out`.
///
/// # Safety
/// `q` must hold `n` values; `out` must hold `capacity * dof` values.
#[no_mangle]
pub unsafe extern "C" fn rg_equivalent_configurations(
    chain: *const RgChain,
    q: *const f64,
    n: usize,
    out: *mut f64,
    capacity: usize,
    out_count: *mut usize,
) -> RgStatus {
    guard(|| {
        let chain = &chain.as_ref().ok_or_else(|| null("chain"))?.0;
        let eq = chain.equivalent_configurations(slice_arg(q, n, "q")?)?;
        write_configs(&eq, chain.dof(), out, capacity, out_count)
    })
}

/// Closed-form inverse kinematics for a pose given as position (x, y, z) and
/// quaternion (w, x, y, z). Solutions are wrapped into the joint limits.
///
/// # Safety
/// `position` must hold 3 values, `quaternion` 4; `out` must hold
/// `capacity * dof` values.
#[no_mangle]
pub unsafe extern "C" fn rg_inverse_kinematics(
    chain: *const RgChain,
    position: *const f64,
    quaternion: *const f64,
    out: *mut f64,
    capacity: usize,
    out_count: *mut usize,
) -> RgStatus {
    guard(|| {
        let chain = &chain.as_ref().ok_or_else(|| null("chain"))?.0;
        let pose = pose_arg(position, quaternion)?;
        let sols = analytic_ik_6r(chain, &pose)?;
        write_configs(&sols, chain.dof(), out, capacity, out_count)
    })
}

unsafe fn pose_arg(position: *const f64, quaternion: *const f64) -> Result<Pose, Failure> {
    let p = slice_arg(position, 3, "position")?;
    let r = slice_arg(quaternion, 4, "quaternion")?;
    let q = Quaternion::new(r[0], r[1], r[2], r[3]);
    if !(q.norm() > 0.0) {
        return Err(Failure(RgStatus::RG_INVALID_ARGUMENT, "zero quaternion".into()));
    }
    Ok(Pose::new(
        Vector3::new(p[0], p[1], p[2]),
        UnitQuaternion::from_quaternion(q),
    ))
}

/// The goal configurations of a task goal (JSON), ordered by rank: the first
/// row is the configuration closest to `start`.
///
/// # Safety
/// `goal_json` must be a NUL-terminated string; `start` must hold `n` values;
/// `out` must hold `capacity * dof` values.
#[no_mangle]
pub unsafe extern "C" fn rg_goal_set(
    chain: *const RgChain,
    goal_json: *const c_char,
    start: *const f64,
    n: usize,
    out: *mut f64,
    capacity: usize,
    out_count: *mut usize,
) -> RgStatus {
    guard(|| {
        let chain = &chain.as_ref().ok_or_else(|| null("chain"))?.0;
        let goal = TaskGoal::from_json(str_arg(goal_json, "goal_json")?)?;
        let start = Configuration::new(slice_arg(start, n, "start")?.to_vec());
        let set = compute_goal_configurations(chain, &goal, &start)?;
        let ranked: Vec<Configuration> = set.by_rank().into_iter().map(|i| set.configs[i].clone()).collect();
        write_configs(&ranked, chain.dof(), out, capacity, out_count)
    })
}

/// Builds a scene from `source`: `cubicles` or `vine` (generated with `seed`),
/// a scene spec or scene JSON file, or inline scene JSON.
///
/// # Safety
/// `source` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_scene_load(source: *const c_char, seed: u64, out: *mut *mut RgScene) -> RgStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let source = str_arg(source, "source")?;
        let spec = match source {
            "cubicles" => Some(SceneSpec::cubicles(CubicleParams::default(), seed)),
            "vine" => Some(SceneSpec::vine(VineParams::default(), seed)),
            s if s.trim_start().starts_with('{') => None,
            path => SceneSpec::load(path).ok(),
        };
        let handle = match spec {
            Some(spec) => {
                let (scene, tasks) = build_scene(&spec)?;
                RgScene {
                    scene,
                    robot: RobotGeometry::load(&spec.robot)?,
                    tasks,
                }
            }
            None => {
                let scene = if source.trim_start().starts_with('{') {
                    Scene::from_json(source)?
                } else {
                    Scene::load(source)?
                };
                let robot = RobotGeometry::load(&scene.robot_geometry)?;
                RgScene {
                    scene,
                    robot,
                    tasks: Vec::new(),
                }
            }
        };
        *out = Box::into_raw(Box::new(handle));
        Ok(())
    })
}

/// # Safety
/// `scene` must be null or a handle from [`rg_scene_load`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rg_scene_free(scene: *mut RgScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Number of task goals a generated scene carries (0 for plain scenes).
///
/// # Safety
/// `scene` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rg_scene_task_count(scene: *const RgScene) -> usize {
    scene.as_ref().map_or(0, |s| s.tasks.len())
}

/// Task goal `index` of a generated scene as JSON; free with [`rg_string_free`].
///
/// # Safety
/// `scene` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_scene_task_json(
    scene: *const RgScene,
    index: usize,
    out_json: *mut *mut c_char,
) -> RgStatus {
    guard(|| {
        let out = out_ref(out_json, "out_json")?;
        *out = ptr::null_mut();
        let scene = scene.as_ref().ok_or_else(|| null("scene"))?;
        let task = scene.tasks.get(index).ok_or_else(|| {
            Failure(
                RgStatus::RG_INVALID_ARGUMENT,
                format!("scene has {} tasks, no task {index}", scene.tasks.len()),
            )
        })?;
        *out = into_c_string(task.to_json()?)?;
        Ok(())
    })
}

/// Plans from `start` to the goal configurations of `goal_json`, keeping `k`
/// of them picked by `strategy` (`k == 0` keeps all). The result is written
/// as JSON to `out_json`; free it with [`rg_string_free`]. An unsolved query
/// is not an error: check the `success` field.
///
/// # Safety
/// Handles must be live; `goal_json` NUL-terminated; `start` must hold `n`
/// values; `out_json` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn rg_plan_json(
    scene: *const RgScene,
    chain: *const RgChain,
    start: *const f64,
    n: usize,
    goal_json: *const c_char,
    k: usize,
    strategy: RgStrategy,
    budget_ms: f64,
    seed: u64,
    out_json: *mut *mut c_char,
) -> RgStatus {
    guard(|| {
        let out = out_ref(out_json, "out_json")?;
        *out = ptr::null_mut();
        let scene = scene.as_ref().ok_or_else(|| null("scene"))?;
        let chain = &chain.as_ref().ok_or_else(|| null("chain"))?.0;
        let goal = TaskGoal::from_json(str_arg(goal_json, "goal_json")?)?;
        let start = Configuration::new(slice_arg(start, n, "start")?.to_vec());
        let mut goals = compute_goal_configurations(chain, &goal, &start)?;
        if k > 0 {
            let strategy = match strategy {
                RgStrategy::RG_STRATEGY_CLOSEST => SelectionStrategy::Closest,
                RgStrategy::RG_STRATEGY_RANDOM => SelectionStrategy::Random,
            };
            goals = select_goals(&goals, k, strategy, seed)?;
        }
        let cfg = PlannerConfig {
            time_budget_ms: budget_ms,
            seed,
            ..PlannerConfig::default()
        };
        let result = plan(&scene.scene, &scene.robot, chain, &start, &goals, &cfg)?;
        *out = into_c_string(result.to_json()?)?;
        Ok(())
    })
}

/// Time for one straight joint-space segment of displacement `delta`, with
/// all joints synchronized to the slowest one.
///
/// # Safety
/// `delta`, `v_max` and `a_max` must each hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_segment_time(
    delta: *const f64,
    v_max: *const f64,
    a_max: *const f64,
    n: usize,
    out: *mut f64,
) -> RgStatus {
    guard(|| {
        let dyn_ = dynamics_arg(v_max, a_max, n)?;
        *out_ref(out, "out")? = segment_time(slice_arg(delta, n, "delta")?, &dyn_)?;
        Ok(())
    })
}

/// Execution time of a path of `count` waypoints stored row-major.
///
/// # Safety
/// `waypoints` must hold `count * n` values; `v_max` and `a_max` `n` each.
#[no_mangle]
pub unsafe extern "C" fn rg_execution_time(
    waypoints: *const f64,
    count: usize,
    v_max: *const f64,
    a_max: *const f64,
    n: usize,
    out: *mut f64,
) -> RgStatus {
    guard(|| {
        let dyn_ = dynamics_arg(v_max, a_max, n)?;
        if n == 0 {
            return Err(Failure(RgStatus::RG_INVALID_ARGUMENT, "n must be positive".into()));
        }
        let flat = slice_arg(waypoints, count * n, "waypoints")?;
        let path: Vec<Configuration> = flat.chunks_exact(n).map(|r| Configuration::new(r.to_vec())).collect();
        *out_ref(out, "out")? = execution_time(&path, &dyn_)?;
        Ok(())
    })
}

unsafe fn dynamics_arg(v_max: *const f64, a_max: *const f64, n: usize) -> Result<JointDynamics, Failure> {
    let v = slice_arg(v_max, n, "v_max")?.to_vec();
    let a = slice_arg(a_max, n, "a_max")?.to_vec();
    Ok(JointDynamics::new(v, a)?)
}
