//! Scene generators: a shelf of cubicles in front of the arm, and a vine-like
//! field of thin canes in a plane with a mounting wall behind the arm.
//! Each generator returns the obstacles plus one task per target.

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::collision::{CollisionWorld, RobotGeometry, Scene, Shape};
use crate::error::{Error, Result};
use crate::ik::{analytic_ik_6r, distinct_pose_solutions, TaskGoal};
use crate::kinematics::{KinematicChain, Pose};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CubicleParams {
    pub rows: usize,
    pub cols: usize,
    /// Pitch of the grid; every cubicle is `cell_size` wide and tall.
    pub cell_size: f64,
    pub wall_thickness: f64,
    pub depth: f64,
    /// Distance from the arm base to the open face along +x.
    pub front_distance: f64,
    /// Height of the grid center above the base.
    pub center_height: f64,
    /// The flange stops this far short of the cubicle center along the
    /// approach axis, so that a tool of this length ends at the center.
    pub tool_offset: f64,
}

impl Default for CubicleParams {
    fn default() -> Self {
        CubicleParams {
            rows: 3,
            cols: 3,
            cell_size: 0.30,
            wall_thickness: 0.01,
            depth: 0.30,
            front_distance: 0.55,
            center_height: 0.10,
            tool_offset: 0.12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VineParams {
    pub canes: usize,
    pub cane_radius: f64,
    /// Canes lie in the plane `z = plane_height`, inside this x/y rectangle.
    pub plane_height: f64,
    pub region_min: [f64; 2],
    pub region_max: [f64; 2],
    pub cane_length: [f64; 2],
    /// Largest tilt of a cane away from the y axis, radians.
    pub max_tilt: f64,
    /// Flange distance from the cut point along the approach axis.
    pub standoff: f64,
    pub back_wall: bool,
    pub max_distinct_poses: usize,
}

impl Default for VineParams {
    fn default() -> Self {
        VineParams {
            canes: 40,
            cane_radius: 0.005,
            plane_height: 0.45,
            region_min: [-0.35, 0.15],
            region_max: [0.35, 0.55],
            cane_length: [0.15, 0.35],
            max_tilt: 0.5,
            standoff: 0.17,
            back_wall: true,
            max_distinct_poses: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileParams {
    pub scene: PathBuf,
    pub goals: Vec<TaskGoal>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    Cubicles(CubicleParams),
    Vine(VineParams),
    File(FileParams),
}

/// What to build, for which chain and robot geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct SceneSpec {
    pub generator: Generator,
    pub seed: u64,
    pub chain: String,
    pub robot: String,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum GeneratorKind {
    Cubicles,
    Vine,
    File,
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    generator: GeneratorKind,
    #[serde(default)]
    parameters: serde_json::Value,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    chain: Option<String>,
    #[serde(default)]
    robot: Option<String>,
}

fn params_or_default<T: Default + serde::de::DeserializeOwned>(v: serde_json::Value) -> Result<T> {
    if v.is_null() {
        Ok(T::default())
    } else {
        Ok(serde_json::from_value(v)?)
    }
}

impl TryFrom<SpecRepr> for SceneSpec {
    type Error = Error;

    fn try_from(r: SpecRepr) -> Result<Self> {
        let generator = match r.generator {
            GeneratorKind::Cubicles => Generator::Cubicles(params_or_default(r.parameters)?),
            GeneratorKind::Vine => Generator::Vine(params_or_default(r.parameters)?),
            GeneratorKind::File => Generator::File(serde_json::from_value(r.parameters)?),
        };
        let mut spec = SceneSpec::new(generator, r.seed);
        if let Some(chain) = r.chain {
            spec.chain = chain;
        }
        if let Some(robot) = r.robot {
            spec.robot = robot;
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl From<SceneSpec> for SpecRepr {
    fn from(s: SceneSpec) -> Self {
        let (generator, parameters) = match s.generator {
            Generator::Cubicles(p) => (GeneratorKind::Cubicles, serde_json::to_value(p)),
            Generator::Vine(p) => (GeneratorKind::Vine, serde_json::to_value(p)),
            Generator::File(p) => (GeneratorKind::File, serde_json::to_value(p)),
        };
        SpecRepr {
            generator,
            parameters: parameters.expect("parameters are plain data"),
            seed: s.seed,
            chain: Some(s.chain),
            robot: Some(s.robot),
        }
    }
}

impl SceneSpec {
    /// Spec with the chain preset matching the generator: elbow-limited for
    /// cubicles, the shoulder- and elbow-limited preset for the vine.
    pub fn new(generator: Generator, seed: u64) -> Self {
        let chain = match generator {
            Generator::Vine(_) => "ur5-vine",
            _ => "ur5-elbow-limited",
        };
        SceneSpec {
            generator,
            seed,
            chain: chain.into(),
            robot: "ur5".into(),
        }
    }

    pub fn cubicles(params: CubicleParams, seed: u64) -> Self {
        SceneSpec::new(Generator::Cubicles(params), seed)
    }

    pub fn vine(params: VineParams, seed: u64) -> Self {
        SceneSpec::new(Generator::Vine(params), seed)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        match &self.generator {
            Generator::Cubicles(p) => {
                if p.rows == 0 || p.cols == 0 {
                    return bad("cubicle grid needs at least one row and column");
                }
                if !(p.cell_size > 0.0 && p.depth > 0.0 && p.front_distance > 0.0) {
                    return bad("cubicle dimensions must be positive");
                }
                if !(p.wall_thickness > 0.0 && p.wall_thickness < p.cell_size) {
                    return bad("wall thickness must be positive and below the cubicle size");
                }
                if !p.center_height.is_finite() || !(p.tool_offset >= 0.0) {
                    return bad("center height must be finite and tool offset non-negative");
                }
            }
            Generator::Vine(p) => {
                if p.canes == 0 || p.max_distinct_poses == 0 {
                    return bad("vine needs at least one cane and one pose per cut");
                }
                if !(p.cane_radius > 0.0 && p.standoff > 0.0) {
                    return bad("cane radius and standoff must be positive");
                }
                if !(p.region_min[0] < p.region_max[0] && p.region_min[1] < p.region_max[1]) {
                    return bad("vine region is empty");
                }
                if !(p.cane_length[0] > 0.0 && p.cane_length[0] <= p.cane_length[1]) {
                    return bad("cane length range is invalid");
                }
                if !(p.max_tilt >= 0.0) {
                    return bad("max tilt must be non-negative");
                }
            }
            Generator::File(p) => {
                if p.goals.is_empty() {
                    return bad("file scene lists no goals");
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = SceneSpec::from_json(&text)?;
        // relative scene files resolve against the spec's directory
        if let Generator::File(p) = &mut spec.generator {
            if p.scene.is_relative() {
                if let Some(dir) = path.parent() {
                    p.scene = dir.join(&p.scene);
                }
            }
        }
        Ok(spec)
    }

    pub fn load_chain(&self) -> Result<KinematicChain> {
        KinematicChain::load(&self.chain)
    }

    pub fn load_robot(&self) -> Result<RobotGeometry> {
        RobotGeometry::load(&self.robot)
    }
}

/// Builds whichever scene `spec` describes.
pub fn build_scene(spec: &SceneSpec) -> Result<(Scene, Vec<TaskGoal>)> {
    match &spec.generator {
        Generator::Cubicles(_) => build_cubicles(spec),
        Generator::Vine(_) => build_vine(spec),
        Generator::File(p) => {
            spec.validate()?;
            Ok((Scene::load(&p.scene)?, p.goals.clone()))
        }
    }
}

fn aabb(center: [f64; 3], half: [f64; 3]) -> Shape {
    Shape::aabb(Vector3::from(center), Vector3::from(half))
}

/// Tool z axis pointing along +x, into the shelf.
pub fn shelf_approach() -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::y_axis(), FRAC_PI_2)
}

/// An open-fronted shelf of `rows × cols` cubicles facing the arm and one
/// fixed-orientation task at the center of each cubicle, row-major from the
/// bottom-left as seen from the arm.
pub fn build_cubicles(spec: &SceneSpec) -> Result<(Scene, Vec<TaskGoal>)> {
    spec.validate()?;
    let Generator::Cubicles(p) = &spec.generator else {
        return Err(Error::InvalidArgument("spec does not describe cubicles".into()));
    };
    let chain = spec.load_chain()?;
    let width = p.cols as f64 * p.cell_size;
    let height = p.rows as f64 * p.cell_size;
    let t = p.wall_thickness;
    let x_mid = p.front_distance + p.depth / 2.0;
    let y0 = -width / 2.0;
    let z0 = p.center_height - height / 2.0;

    let mut obstacles = Vec::new();
    for j in 0..=p.cols {
        let y = y0 + j as f64 * p.cell_size;
        obstacles.push(aabb(
            [x_mid, y, p.center_height],
            [p.depth / 2.0, t / 2.0, (height + t) / 2.0],
        ));
    }
    for i in 0..=p.rows {
        let z = z0 + i as f64 * p.cell_size;
        obstacles.push(aabb([x_mid, 0.0, z], [p.depth / 2.0, (width + t) / 2.0, t / 2.0]));
    }
    obstacles.push(aabb(
        [p.front_distance + p.depth + t / 2.0, 0.0, p.center_height],
        [t / 2.0, (width + t) / 2.0, (height + t) / 2.0],
    ));

    let mut goals = Vec::with_capacity(p.rows * p.cols);
    for i in 0..p.rows {
        for j in 0..p.cols {
            let center = Vector3::new(
                x_mid,
                y0 + (j as f64 + 0.5) * p.cell_size,
                z0 + (i as f64 + 0.5) * p.cell_size,
            );
            let approach = shelf_approach();
            let pose = Pose::new(center - approach * Vector3::z() * p.tool_offset, approach);
            if analytic_ik_6r(&chain, &pose)?.is_empty() {
                return Err(Error::Generation(format!(
                    "cubicle (row {i}, col {j}) center {:?} is out of reach of {}",
                    [center.x, center.y, center.z],
                    chain.name()
                )));
            }
            goals.push(TaskGoal::fixed(pose, 8));
        }
    }
    let name = format!("cubicles-{}x{}", p.rows, p.cols);
    Ok((Scene::new(name, obstacles), goals))
}

/// Thin canes scattered in a plane in front of the arm, optionally with the
/// mounting wall behind it, and one free-roll cut task per cane. Cuts with
/// no collision-free solution are dropped.
pub fn build_vine(spec: &SceneSpec) -> Result<(Scene, Vec<TaskGoal>)> {
    spec.validate()?;
    let Generator::Vine(p) = &spec.generator else {
        return Err(Error::InvalidArgument("spec does not describe a vine".into()));
    };
    let chain = spec.load_chain()?;
    let robot = spec.load_robot()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut obstacles = Vec::new();
    if p.back_wall {
        // the surface the arm is mounted on, 1 cm clear of the base link
        obstacles.push(aabb([0.0, 0.0, -0.08], [1.5, 1.5, 0.01]));
    }
    let mut cuts = Vec::with_capacity(p.canes);
    for _ in 0..p.canes {
        let cx = rng.random_range(p.region_min[0]..=p.region_max[0]);
        let cy = rng.random_range(p.region_min[1]..=p.region_max[1]);
        let len = rng.random_range(p.cane_length[0]..=p.cane_length[1]);
        let tilt = rng.random_range(-p.max_tilt..=p.max_tilt);
        let dir = Vector3::new(tilt.sin(), tilt.cos(), 0.0);
        let center = Vector3::new(cx, cy, p.plane_height);
        let a = center - dir * (len / 2.0);
        let b = center + dir * (len / 2.0);
        obstacles.push(Shape::capsule(a, b, p.cane_radius));
        let along: f64 = rng.random_range(0.2..=0.8);
        cuts.push((a + (b - a) * along, rng.random::<u64>()));
    }
    let scene = Scene::new(format!("vine-{}", p.canes), obstacles);
    let world = CollisionWorld::new(&scene, &robot, &chain)?;

    let mut goals = Vec::new();
    for (point, seed) in cuts {
        // approach along +z, toward the plane of canes
        let flange = point - Vector3::z() * p.standoff;
        let goal = TaskGoal::free_roll(
            Pose::new(flange, UnitQuaternion::identity()),
            p.max_distinct_poses,
            seed,
        );
        let feasible = distinct_pose_solutions(&chain, &goal)?.iter().any(|q| {
            chain
                .equivalent_configurations(q)
                .map(|eqs| eqs.iter().any(|e| !world.collides_unchecked(e)))
                .unwrap_or(false)
        });
        if feasible {
            goals.push(goal);
        }
    }
    if goals.is_empty() {
        return Err(Error::Generation("no vine cut has a collision-free solution".into()));
    }
    Ok((scene, goals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ik::compute_goal_configurations;
    use std::collections::HashSet;

    #[test]
    fn default_cubicles() {
        let spec = SceneSpec::cubicles(CubicleParams::default(), 0);
        let (scene, goals) = build_cubicles(&spec).unwrap();
        assert_eq!(goals.len(), 9);
        let centers: HashSet<_> = goals
            .iter()
            .map(|g| {
                g.target
                    .position
                    .iter()
                    .map(|v| (v * 1e6).round() as i64)
                    .collect::<Vec<_>>()
            })
            .collect();
        assert_eq!(centers.len(), 9);
        assert_eq!(scene.obstacles.len(), 4 + 4 + 1);
        let chain = spec.load_chain().unwrap();
        for g in &goals {
            assert!(!analytic_ik_6r(&chain, &g.target).unwrap().is_empty());
        }
    }

    #[test]
    fn cubicle_centers_have_free_goals() {
        let spec = SceneSpec::cubicles(CubicleParams::default(), 0);
        let (scene, goals) = build_cubicles(&spec).unwrap();
        let chain = spec.load_chain().unwrap();
        let robot = spec.load_robot().unwrap();
        let world = CollisionWorld::new(&scene, &robot, &chain).unwrap();
        for g in &goals {
            let q0 = distinct_pose_solutions(&chain, g).unwrap()[0].clone();
            let set = compute_goal_configurations(&chain, g, &q0).unwrap();
            assert_eq!(set.len(), 8 * 32);
            let free = set
                .configs
                .iter()
                .filter(|q| !world.config_in_collision(q).unwrap())
                .count();
            assert!(free >= 4 * 32, "{:?}", g.target.position);
        }
    }

    #[test]
    fn invalid_cubicles_rejected() {
        let zero_wall = CubicleParams {
            wall_thickness: 0.0,
            ..CubicleParams::default()
        };
        assert!(build_cubicles(&SceneSpec::cubicles(zero_wall, 0)).is_err());
        let far = CubicleParams {
            front_distance: 3.0,
            ..CubicleParams::default()
        };
        assert!(matches!(
            build_cubicles(&SceneSpec::cubicles(far, 0)),
            Err(Error::Generation(_))
        ));
    }

    #[test]
    fn vine_is_deterministic_and_feasible() {
        let spec = SceneSpec::vine(VineParams::default(), 3);
        let (scene_a, goals_a) = build_vine(&spec).unwrap();
        let (scene_b, goals_b) = build_vine(&spec).unwrap();
        assert_eq!(scene_a, scene_b);
        assert_eq!(goals_a, goals_b);
        assert!(!goals_a.is_empty());

        let chain = spec.load_chain().unwrap();
        let robot = spec.load_robot().unwrap();
        let world = CollisionWorld::new(&scene_a, &robot, &chain).unwrap();
        let shoulder = &chain.joints()[1];
        for g in &goals_a {
            let sols = distinct_pose_solutions(&chain, g).unwrap();
            assert!(!sols.is_empty());
            // the preset keeps the shoulder on the open side of the wall
            assert!(sols.iter().all(|q| shoulder.contains(q[1])));
            let free = sols
                .iter()
                .flat_map(|q| chain.equivalent_configurations(q).unwrap())
                .any(|q| !world.config_in_collision(&q).unwrap());
            assert!(free);
        }
        let other = build_vine(&SceneSpec::vine(VineParams::default(), 4)).unwrap();
        assert_ne!(other.0, scene_a);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = SceneSpec::cubicles(CubicleParams::default(), 42);
        let back = SceneSpec::from_json(&spec.to_json().unwrap()).unwrap();
        assert_eq!(back, spec);
        let minimal = SceneSpec::from_json(r#"{"generator": "vine", "seed": 1}"#).unwrap();
        assert_eq!(minimal.chain, "ur5-vine");
        assert_eq!(minimal.generator, Generator::Vine(VineParams::default()));
        assert!(SceneSpec::from_json(r#"{"generator": "cubicles", "parameters": {"rows": 0}}"#).is_err());
    }
}
