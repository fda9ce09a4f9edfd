//! Collision checking between robot link capsules and static scene shapes,
//! and motion (edge) checking by joint-space discretization.

use std::collections::VecDeque;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kinematics::{distance, Frame, KinematicChain};

/// Default joint-space resolution for edge checks, in radians.
pub const DEFAULT_EDGE_STEP: f64 = 0.02;

type V3 = Vector3<f64>;

/// A convex primitive. Units are meters.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Sphere {
        center: V3,
        radius: f64,
    },
    Capsule {
        a: V3,
        b: V3,
        radius: f64,
    },
    Box {
        center: V3,
        half_extents: V3,
        orientation: UnitQuaternion<f64>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ShapeRepr {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    Capsule {
        a: [f64; 3],
        b: [f64; 3],
        radius: f64,
    },
    Box {
        center: [f64; 3],
        half_extents: [f64; 3],
        #[serde(default = "identity_quat")]
        orientation: [f64; 4],
    },
}

fn identity_quat() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

impl Serialize for Shape {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let arr = |v: &V3| [v.x, v.y, v.z];
        match self {
            Shape::Sphere { center, radius } => ShapeRepr::Sphere {
                center: arr(center),
                radius: *radius,
            },
            Shape::Capsule { a, b, radius } => ShapeRepr::Capsule {
                a: arr(a),
                b: arr(b),
                radius: *radius,
            },
            Shape::Box {
                center,
                half_extents,
                orientation,
            } => {
                let q = orientation.quaternion();
                ShapeRepr::Box {
                    center: arr(center),
                    half_extents: arr(half_extents),
                    orientation: [q.w, q.i, q.j, q.k],
                }
            }
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Shape {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let shape = match ShapeRepr::deserialize(d)? {
            ShapeRepr::Sphere { center, radius } => Shape::Sphere {
                center: center.into(),
                radius,
            },
            ShapeRepr::Capsule { a, b, radius } => Shape::Capsule {
                a: a.into(),
                b: b.into(),
                radius,
            },
            ShapeRepr::Box {
                center,
                half_extents,
                orientation: [w, x, y, z],
            } => Shape::Box {
                center: center.into(),
                half_extents: half_extents.into(),
                orientation: UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)),
            },
        };
        shape.validate().map_err(serde::de::Error::custom)?;
        Ok(shape)
    }
}

impl Shape {
    pub fn sphere(center: V3, radius: f64) -> Self {
        Shape::Sphere { center, radius }
    }

    pub fn capsule(a: V3, b: V3, radius: f64) -> Self {
        Shape::Capsule { a, b, radius }
    }

    pub fn aabb(center: V3, half_extents: V3) -> Self {
        Shape::Box {
            center,
            half_extents,
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Shape::Sphere { radius, .. } | Shape::Capsule { radius, .. } => *radius > 0.0,
            Shape::Box { half_extents, .. } => half_extents.iter().all(|&h| h > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("degenerate shape {self:?}")))
        }
    }

    /// The shape moved by a rigid transform.
    pub fn transformed(&self, frame: &Frame) -> Shape {
        match self {
            Shape::Sphere { center, radius } => Shape::Sphere {
                center: (frame * nalgebra::Point3::from(*center)).coords,
                radius: *radius,
            },
            Shape::Capsule { a, b, radius } => Shape::Capsule {
                a: (frame * nalgebra::Point3::from(*a)).coords,
                b: (frame * nalgebra::Point3::from(*b)).coords,
                radius: *radius,
            },
            Shape::Box {
                center,
                half_extents,
                orientation,
            } => Shape::Box {
                center: (frame * nalgebra::Point3::from(*center)).coords,
                half_extents: *half_extents,
                orientation: frame.rotation * orientation,
            },
        }
    }

    fn world_bounds(&self) -> (V3, V3) {
        match self {
            Shape::Sphere { center, radius } => (center.add_scalar(-radius), center.add_scalar(*radius)),
            Shape::Capsule { a, b, radius } => (a.inf(b).add_scalar(-radius), a.sup(b).add_scalar(*radius)),
            Shape::Box {
                center,
                half_extents,
                orientation,
            } => {
                let m = orientation.to_rotation_matrix();
                let reach = m.matrix().abs() * half_extents;
                (center - reach, center + reach)
            }
        }
    }

    fn bounding_sphere(&self) -> (V3, f64) {
        match self {
            Shape::Sphere { center, radius } => (*center, *radius),
            Shape::Capsule { a, b, radius } => ((a + b) * 0.5, (b - a).norm() * 0.5 + radius),
            Shape::Box {
                center, half_extents, ..
            } => (*center, half_extents.norm()),
        }
    }
}

fn closest_on_segment(p: &V3, a: &V3, b: &V3) -> V3 {
    let ab = b - a;
    let len_sq = ab.norm_squared();
    if len_sq == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len_sq).clamp(0.0, 1.0);
    a + ab * t
}

fn point_segment_distance(p: &V3, a: &V3, b: &V3) -> f64 {
    (p - closest_on_segment(p, a, b)).norm()
}

/// Distance between segments `p1q1` and `p2q2`.
fn segment_segment_distance(p1: &V3, q1: &V3, p2: &V3, q2: &V3) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    const EPS: f64 = 1e-18;
    let (s, t);
    if a <= EPS && e <= EPS {
        return r.norm();
    }
    if a <= EPS {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > EPS {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}

/// Signed distance from a point to a box given in the box's local frame
/// (negative inside).
fn point_box_local(p: &V3, h: &V3) -> f64 {
    let d = p.abs() - h;
    let outside = d.map(|x| x.max(0.0)).norm();
    let inside = d.x.max(d.y).max(d.z).min(0.0);
    outside + inside
}

/// Unsigned distance from segment `p0 + t·u`, `t ∈ [0, 1]`, to a box in its
/// local frame. The squared distance is piecewise quadratic in `t` with
/// breakpoints where a coordinate crosses a face plane; each piece is
/// minimized in closed form.
fn segment_box_local(p0: &V3, u: &V3, h: &V3) -> f64 {
    let mut cuts = [0.0_f64; 8];
    let mut n = 0;
    cuts[n] = 0.0;
    n += 1;
    for i in 0..3 {
        if u[i] != 0.0 {
            for bound in [-h[i], h[i]] {
                let t = (bound - p0[i]) / u[i];
                if t > 0.0 && t < 1.0 {
                    cuts[n] = t;
                    n += 1;
                }
            }
        }
    }
    cuts[n] = 1.0;
    n += 1;
    let cuts = &mut cuts[..n];
    cuts.sort_by(f64::total_cmp);

    let excess_sq = |t: f64| -> f64 {
        let p = p0 + u * t;
        (0..3)
            .map(|i| {
                let e = (p[i].abs() - h[i]).max(0.0);
                e * e
            })
            .sum()
    };

    let mut best = excess_sq(0.0).min(excess_sq(1.0));
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mid = p0 + u * (0.5 * (lo + hi));
        // On this piece the squared distance is Σ (p_i(t) - b_i)² over the
        // axes outside the slab, where b_i is the violated bound.
        let (mut qa, mut qb) = (0.0, 0.0);
        for i in 0..3 {
            let bound = if mid[i] > h[i] {
                h[i]
            } else if mid[i] < -h[i] {
                -h[i]
            } else {
                continue;
            };
            qa += u[i] * u[i];
            qb += u[i] * (p0[i] - bound);
        }
        if qa > 0.0 {
            let t = (-qb / qa).clamp(lo, hi);
            best = best.min(excess_sq(t));
        } else {
            best = best.min(excess_sq(lo));
        }
        if best == 0.0 {
            break;
        }
    }
    best.sqrt()
}

#[derive(Clone, Debug)]
struct BoxFrame {
    center: V3,
    axes: [V3; 3],
    h: V3,
}

impl BoxFrame {
    fn new(center: &V3, half_extents: &V3, orientation: &UnitQuaternion<f64>) -> Self {
        let m = orientation.to_rotation_matrix();
        BoxFrame {
            center: *center,
            axes: [
                m.matrix().column(0).into_owned(),
                m.matrix().column(1).into_owned(),
                m.matrix().column(2).into_owned(),
            ],
            h: *half_extents,
        }
    }

    fn to_local(&self, p: &V3) -> V3 {
        let d = p - self.center;
        V3::new(d.dot(&self.axes[0]), d.dot(&self.axes[1]), d.dot(&self.axes[2]))
    }

    fn to_local_dir(&self, v: &V3) -> V3 {
        V3::new(v.dot(&self.axes[0]), v.dot(&self.axes[1]), v.dot(&self.axes[2]))
    }

    fn point_distance(&self, p: &V3) -> f64 {
        point_box_local(&self.to_local(p), &self.h)
    }

    fn segment_distance(&self, a: &V3, b: &V3) -> f64 {
        let p0 = self.to_local(a);
        let u = self.to_local_dir(&(b - a));
        segment_box_local(&p0, &u, &self.h)
    }

    fn corners(&self) -> [V3; 8] {
        let mut out = [V3::zeros(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
            *c = self.center
                + self.axes[0] * (sx * self.h.x)
                + self.axes[1] * (sy * self.h.y)
                + self.axes[2] * (sz * self.h.z);
        }
        out
    }

    fn edges(&self) -> Vec<(V3, V3)> {
        let c = self.corners();
        let mut out = Vec::with_capacity(12);
        for i in 0..8usize {
            for bit in [1usize, 2, 4] {
                if i & bit == 0 {
                    out.push((c[i], c[i | bit]));
                }
            }
        }
        out
    }

    fn projected_radius(&self, axis: &V3) -> f64 {
        (0..3).map(|i| self.h[i] * self.axes[i].dot(axis).abs()).sum()
    }
}

/// Smallest overlap over the separating-axis candidates; negative when some
/// axis separates the boxes.
fn box_box_overlap(a: &BoxFrame, b: &BoxFrame) -> f64 {
    let mut axes: Vec<V3> = Vec::with_capacity(15);
    axes.extend_from_slice(&a.axes);
    axes.extend_from_slice(&b.axes);
    for x in &a.axes {
        for y in &b.axes {
            let c = x.cross(y);
            let n = c.norm();
            if n > 1e-9 {
                axes.push(c / n);
            }
        }
    }
    let d = b.center - a.center;
    axes.iter()
        .map(|ax| a.projected_radius(ax) + b.projected_radius(ax) - d.dot(ax).abs())
        .fold(f64::INFINITY, f64::min)
}

fn box_box_distance(a: &BoxFrame, b: &BoxFrame) -> f64 {
    let overlap = box_box_overlap(a, b);
    if overlap >= 0.0 {
        return -overlap;
    }
    let (edges_a, edges_b) = (a.edges(), b.edges());
    let from_a = edges_a.iter().map(|(p, q)| b.segment_distance(p, q));
    let from_b = edges_b.iter().map(|(p, q)| a.segment_distance(p, q));
    from_a.chain(from_b).fold(f64::INFINITY, f64::min)
}

/// Signed clearance between two shapes: distance minus radii, `≤ 0` on
/// contact or penetration. Symmetric in its arguments.
pub fn shape_distance(a: &Shape, b: &Shape) -> f64 {
    use Shape::*;
    match (a, b) {
        (Sphere { center: c1, radius: r1 }, Sphere { center: c2, radius: r2 }) => (c1 - c2).norm() - r1 - r2,
        (Sphere { center, radius: rs }, Capsule { a, b, radius: rc })
        | (Capsule { a, b, radius: rc }, Sphere { center, radius: rs }) => {
            point_segment_distance(center, a, b) - rs - rc
        }
        (
            Capsule {
                a: a1,
                b: b1,
                radius: r1,
            },
            Capsule {
                a: a2,
                b: b2,
                radius: r2,
            },
        ) => {
            // Order the pair so the result does not depend on argument order.
            let key = |p: &V3, q: &V3| [p.x, p.y, p.z, q.x, q.y, q.z];
            let d = if key(a1, b1) <= key(a2, b2) {
                segment_segment_distance(a1, b1, a2, b2)
            } else {
                segment_segment_distance(a2, b2, a1, b1)
            };
            d - r1 - r2
        }
        (
            Sphere { center, radius },
            Box {
                center: bc,
                half_extents,
                orientation,
            },
        )
        | (
            Box {
                center: bc,
                half_extents,
                orientation,
            },
            Sphere { center, radius },
        ) => BoxFrame::new(bc, half_extents, orientation).point_distance(center) - radius,
        (
            Capsule { a, b, radius },
            Box {
                center,
                half_extents,
                orientation,
            },
        )
        | (
            Box {
                center,
                half_extents,
                orientation,
            },
            Capsule { a, b, radius },
        ) => BoxFrame::new(center, half_extents, orientation).segment_distance(a, b) - radius,
        (
            Box {
                center: c1,
                half_extents: h1,
                orientation: o1,
            },
            Box {
                center: c2,
                half_extents: h2,
                orientation: o2,
            },
        ) => {
            let f1 = BoxFrame::new(c1, h1, o1);
            let f2 = BoxFrame::new(c2, h2, o2);
            let key = |c: &V3, h: &V3| [c.x, c.y, c.z, h.x, h.y, h.z];
            if key(c1, h1) <= key(c2, h2) {
                box_box_distance(&f1, &f2)
            } else {
                box_box_distance(&f2, &f1)
            }
        }
    }
}

/// A capsule attached to a link, in that link's frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkCapsule {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub radius: f64,
}

/// Collision geometry of the arm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotGeometry {
    #[serde(default)]
    pub name: String,
    /// `links[i]` holds the capsules rigidly attached to link frame `i`.
    pub links: Vec<Vec<LinkCapsule>>,
    #[serde(default)]
    pub self_check_pairs: Vec<(usize, usize)>,
}

const GEOMETRY_PRESETS: &[(&str, &str)] = &[("ur5", include_str!("../presets/ur5-geometry.json"))];

impl RobotGeometry {
    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = GEOMETRY_PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::UnknownPreset(name.to_string()))?;
        RobotGeometry::from_json(text)
    }

    pub fn load(name_or_path: &str) -> Result<Self> {
        if GEOMETRY_PRESETS.iter().any(|(n, _)| *n == name_or_path) {
            return RobotGeometry::preset(name_or_path);
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            return Err(Error::UnknownPreset(name_or_path.to_string()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RobotGeometry::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: RobotGeometry = serde_json::from_str(text)?;
        for (i, link) in g.links.iter().enumerate() {
            for c in link {
                if !(c.radius > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "link {i}: capsule radius must be positive"
                    )));
                }
            }
        }
        Ok(g)
    }

    /// One capsule per link running from the previous joint to the link
    /// origin along the link's x axis; matches planar chains.
    pub fn along_x(lengths: &[f64], radius: f64) -> Self {
        RobotGeometry {
            name: "planar".into(),
            links: lengths
                .iter()
                .map(|&l| {
                    vec![LinkCapsule {
                        a: [-l, 0.0, 0.0],
                        b: [0.0, 0.0, 0.0],
                        radius,
                    }]
                })
                .collect(),
            self_check_pairs: Vec::new(),
        }
    }

    fn check_fits(&self, chain: &KinematicChain) -> Result<()> {
        if self.links.len() > chain.dof() {
            return Err(Error::InvalidArgument(format!(
                "geometry has {} links but chain `{}` has {} joints",
                self.links.len(),
                chain.name(),
                chain.dof()
            )));
        }
        Ok(())
    }

    fn world_capsules_into(&self, frames: &[Frame], out: &mut Vec<(usize, V3, V3, f64)>) {
        out.clear();
        for (i, (link, frame)) in self.links.iter().zip(frames).enumerate() {
            for c in link {
                let a = frame * nalgebra::Point3::from(c.a);
                let b = frame * nalgebra::Point3::from(c.b);
                out.push((i, a.coords, b.coords, c.radius));
            }
        }
    }
}

/// Static obstacles.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default)]
    pub name: String,
    /// Robot geometry preset name or file this scene is meant for.
    #[serde(default = "default_robot")]
    pub robot_geometry: String,
    pub obstacles: Vec<Shape>,
}

fn default_robot() -> String {
    "ur5".into()
}

impl Scene {
    pub fn new(name: impl Into<String>, obstacles: Vec<Shape>) -> Self {
        Scene {
            name: name.into(),
            robot_geometry: default_robot(),
            obstacles,
        }
    }

    pub fn empty() -> Self {
        Scene::new("empty", Vec::new())
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
        Scene::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Precomputed per-obstacle data for fast repeated queries.
#[derive(Clone, Debug)]
pub struct CollisionWorld<'a> {
    pub scene: &'a Scene,
    pub robot: &'a RobotGeometry,
    pub chain: &'a KinematicChain,
    bounds: Vec<(V3, f64)>,
    aabbs: Vec<(V3, V3)>,
    boxes: Vec<Option<BoxFrame>>,
}

/// Link frames and world capsules `(link, a, b, radius)` of the pose being checked.
type Scratch = (Vec<Frame>, Vec<(usize, V3, V3, f64)>);

thread_local! {
    static SCRATCH: std::cell::RefCell<Scratch> =
        const { std::cell::RefCell::new((Vec::new(), Vec::new())) };
}

impl<'a> CollisionWorld<'a> {
    pub fn new(scene: &'a Scene, robot: &'a RobotGeometry, chain: &'a KinematicChain) -> Result<Self> {
        robot.check_fits(chain)?;
        let bounds = scene.obstacles.iter().map(Shape::bounding_sphere).collect();
        let boxes = scene
            .obstacles
            .iter()
            .map(|s| match s {
                Shape::Box {
                    center,
                    half_extents,
                    orientation,
                } => Some(BoxFrame::new(center, half_extents, orientation)),
                _ => None,
            })
            .collect();
        let aabbs = scene.obstacles.iter().map(Shape::world_bounds).collect();
        Ok(CollisionWorld {
            scene,
            robot,
            chain,
            bounds,
            aabbs,
            boxes,
        })
    }

    fn capsule_hits(&self, a: &V3, b: &V3, r: f64) -> bool {
        let lo = a.inf(b).add_scalar(-r);
        let hi = a.sup(b).add_scalar(r);
        for (i, obstacle) in self.scene.obstacles.iter().enumerate() {
            let (olo, ohi) = &self.aabbs[i];
            if (0..3).any(|k| hi[k] < olo[k] || lo[k] > ohi[k]) {
                continue;
            }
            let (bc, br) = self.bounds[i];
            if point_segment_distance(&bc, a, b) > br + r {
                continue;
            }
            let clearance = match (obstacle, &self.boxes[i]) {
                (_, Some(bx)) => bx.segment_distance(a, b) - r,
                (other, None) => shape_distance(&Shape::capsule(*a, *b, r), other),
            };
            if clearance <= 0.0 {
                return true;
            }
        }
        false
    }

    /// Collision test without the joint-limit precondition.
    pub(crate) fn collides_unchecked(&self, q: &[f64]) -> bool {
        SCRATCH.with(|cell| {
            let mut guard = cell.borrow_mut();
            let (frames, capsules) = &mut *guard;
            if self.chain.link_frames_into(q, frames).is_err() {
                return true;
            }
            self.robot.world_capsules_into(frames, capsules);
            self.capsules_collide(capsules)
        })
    }

    fn capsules_collide(&self, capsules: &[(usize, V3, V3, f64)]) -> bool {
        if capsules.iter().any(|(_, a, b, r)| self.capsule_hits(a, b, *r)) {
            return true;
        }
        for &(li, lj) in &self.robot.self_check_pairs {
            for (_, a1, b1, r1) in capsules.iter().filter(|c| c.0 == li) {
                for (_, a2, b2, r2) in capsules.iter().filter(|c| c.0 == lj) {
                    if segment_segment_distance(a1, b1, a2, b2) - r1 - r2 <= 0.0 {
                        return true;
                    }
                }
            }
        }
        false
    }

    pub fn config_in_collision(&self, q: &[f64]) -> Result<bool> {
        self.chain.check_in_limits(q)?;
        Ok(self.collides_unchecked(q))
    }

    pub fn edge_in_collision(&self, q1: &[f64], q2: &[f64], step: f64) -> Result<bool> {
        self.chain.check_in_limits(q1)?;
        self.chain.check_in_limits(q2)?;
        if !(step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "edge step must be positive, got {step}"
            )));
        }
        if self.collides_unchecked(q1) {
            return Ok(true);
        }
        Ok(self.edge_collides_from_free(q1, q2, step))
    }

    /// Edge test assuming `q1` is already known to be collision-free.
    pub(crate) fn edge_collides_from_free(&self, q1: &[f64], q2: &[f64], step: f64) -> bool {
        let n = segment_count(q1, q2, step);
        if n == 0 {
            return false;
        }
        if self.collides_unchecked(q2) {
            return true;
        }
        let mut buf = vec![0.0; q1.len()];
        let mut queue = VecDeque::from([(0usize, n)]);
        while let Some((lo, hi)) = queue.pop_front() {
            if hi - lo < 2 {
                continue;
            }
            let mid = (lo + hi) / 2;
            interpolate_into(q1, q2, mid as f64 / n as f64, &mut buf);
            if self.collides_unchecked(&buf) {
                return true;
            }
            queue.push_back((lo, mid));
            queue.push_back((mid, hi));
        }
        false
    }
}

/// Number of sub-segments used to check the motion `q1 → q2`.
pub fn segment_count(q1: &[f64], q2: &[f64], step: f64) -> usize {
    let d = distance(q1, q2);
    if d == 0.0 {
        0
    } else {
        (d / step).ceil() as usize
    }
}

pub(crate) fn interpolate_into(q1: &[f64], q2: &[f64], t: f64, out: &mut [f64]) {
    for ((o, a), b) in out.iter_mut().zip(q1).zip(q2) {
        *o = a + (b - a) * t;
    }
}

/// Whether the arm at `q` touches an obstacle or itself.
pub fn config_in_collision(scene: &Scene, robot: &RobotGeometry, chain: &KinematicChain, q: &[f64]) -> Result<bool> {
    CollisionWorld::new(scene, robot, chain)?.config_in_collision(q)
}

/// Whether any configuration sampled along `q1 → q2` at fractions `i/n`,
/// `n = ceil(|q2 - q1| / step)`, is in collision. Endpoints are included.
pub fn edge_in_collision(
    scene: &Scene,
    robot: &RobotGeometry,
    chain: &KinematicChain,
    q1: &[f64],
    q2: &[f64],
    step: f64,
) -> Result<bool> {
    check_dim(q1.len(), q2.len())?;
    CollisionWorld::new(scene, robot, chain)?.edge_in_collision(q1, q2, step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::TAU;

    fn v(x: f64, y: f64, z: f64) -> V3 {
        V3::new(x, y, z)
    }

    #[test]
    fn sphere_capsule_examples() {
        let cap = Shape::capsule(v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), 0.05);
        let far = Shape::sphere(v(0.0, 0.0, 1.0), 0.1);
        assert_abs_diff_eq!(shape_distance(&far, &cap), 0.85, epsilon = 1e-12);
        let near = Shape::sphere(v(0.5, 0.0, 0.1), 0.1);
        assert_abs_diff_eq!(shape_distance(&near, &cap), -0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(shape_distance(&far, &far), -0.2, epsilon = 1e-12);
    }

    #[test]
    fn segment_box_cases() {
        let bx = Shape::aabb(v(0.0, 0.0, 0.0), v(1.0, 1.0, 1.0));
        // parallel to a face
        let c = Shape::capsule(v(-3.0, 0.0, 2.0), v(3.0, 0.0, 2.0), 0.1);
        assert_abs_diff_eq!(shape_distance(&c, &bx), 0.9, epsilon = 1e-12);
        // closest to an edge, diagonal approach
        let c = Shape::capsule(v(2.0, 2.0, -5.0), v(2.0, 2.0, 5.0), 0.1);
        assert_abs_diff_eq!(shape_distance(&c, &bx), 2f64.sqrt() - 0.1, epsilon = 1e-12);
        // crossing a corner region
        let c = Shape::capsule(v(3.0, 1.0, 2.0), v(1.0, 3.0, 2.0), 0.0 + 1e-3);
        let brute = brute_segment_box(v(3.0, 1.0, 2.0), v(1.0, 3.0, 2.0), v(1.0, 1.0, 1.0));
        assert_abs_diff_eq!(shape_distance(&c, &bx), brute - 1e-3, epsilon = 1e-9);
        // piercing
        let c = Shape::capsule(v(-3.0, 0.2, 0.1), v(3.0, 0.2, 0.1), 0.1);
        assert!(shape_distance(&c, &bx) <= 0.0);
    }

    fn brute_segment_box(a: V3, b: V3, h: V3) -> f64 {
        (0..=200_000)
            .map(|i| point_box_local(&(a + (b - a) * (i as f64 / 200_000.0)), &h).max(0.0))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn sphere_inside_box_is_negative() {
        let bx = Shape::aabb(v(0.0, 0.0, 0.0), v(1.0, 2.0, 3.0));
        let s = Shape::sphere(v(0.5, 0.0, 0.0), 0.1);
        assert_abs_diff_eq!(shape_distance(&s, &bx), -0.6, epsilon = 1e-12);
    }

    #[test]
    fn box_box_separated_and_overlapping() {
        let a = Shape::aabb(v(0.0, 0.0, 0.0), v(1.0, 1.0, 1.0));
        let b = Shape::aabb(v(3.0, 0.5, 0.0), v(0.5, 0.5, 0.5));
        assert_abs_diff_eq!(shape_distance(&a, &b), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(shape_distance(&b, &a), 1.5, epsilon = 1e-12);
        let c = Shape::aabb(v(1.2, 0.0, 0.0), v(0.5, 0.5, 0.5));
        assert_abs_diff_eq!(shape_distance(&a, &c), -0.3, epsilon = 1e-12);
        let rotated = Shape::Box {
            center: v(3.0, 3.0, 0.0),
            half_extents: v(0.5, 0.5, 0.5),
            orientation: UnitQuaternion::from_axis_angle(&V3::z_axis(), TAU / 8.0),
        };
        // rotated 45°, a face of the second box faces the vertical edge of `a`
        let expect = (v(3.0, 3.0, 0.0) - v(1.0, 1.0, 0.0)).norm() - 0.5;
        assert_abs_diff_eq!(shape_distance(&a, &rotated), expect, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_shapes_rejected() {
        assert!(Shape::sphere(v(0.0, 0.0, 0.0), 0.0).validate().is_err());
        assert!(Shape::aabb(v(0.0, 0.0, 0.0), v(1.0, 0.0, 1.0)).validate().is_err());
        let text = r#"{"type":"sphere","center":[0,0,0],"radius":-1}"#;
        assert!(serde_json::from_str::<Shape>(text).is_err());
    }

    fn planar() -> (KinematicChain, RobotGeometry) {
        (
            KinematicChain::planar(&[1.0, 1.0], -TAU, TAU).unwrap(),
            RobotGeometry::along_x(&[1.0, 1.0], 0.05),
        )
    }

    #[test]
    fn empty_scene_never_collides() {
        let (chain, robot) = planar();
        let scene = Scene::empty();
        for q in [[0.0, 0.0], [1.0, -2.0], [3.0, 3.0]] {
            assert!(!config_in_collision(&scene, &robot, &chain, &q).unwrap());
        }
    }

    #[test]
    fn engulfed_base_always_collides() {
        let (chain, robot) = planar();
        let scene = Scene::new("blob", vec![Shape::sphere(v(0.0, 0.0, 0.0), 0.5)]);
        for q in [[0.0, 0.0], [1.0, -2.0], [3.0, 3.0]] {
            assert!(config_in_collision(&scene, &robot, &chain, &q).unwrap());
        }
    }

    #[test]
    fn out_of_limits_is_an_error() {
        let (chain, robot) = planar();
        assert!(matches!(
            config_in_collision(&Scene::empty(), &robot, &chain, &[TAU, 0.0]),
            Err(Error::OutOfLimits(_))
        ));
        assert!(edge_in_collision(&Scene::empty(), &robot, &chain, &[0.0, 0.0], &[0.1, 0.0], 0.0).is_err());
    }

    #[test]
    fn midpoint_obstacle_found_by_edge_check() {
        let (chain, robot) = planar();
        let scene = Scene::new("pin", vec![Shape::sphere(v(2.2, 0.0, 0.0), 0.16)]);
        let (q1, q2) = ([-0.5, 0.0], [0.5, 0.0]);
        let world = CollisionWorld::new(&scene, &robot, &chain).unwrap();
        assert!(!world.config_in_collision(&q1).unwrap());
        assert!(!world.config_in_collision(&q2).unwrap());
        // dense sweep oracle
        let hits: Vec<f64> = (0..=10_000)
            .map(|i| -0.5 + i as f64 * 1e-4)
            .filter(|&t| world.config_in_collision(&[t, 0.0]).unwrap())
            .collect();
        assert!(!hits.is_empty());
        assert!(hits.iter().all(|t| t.abs() < 0.2));
        assert!(world.edge_in_collision(&q1, &q2, DEFAULT_EDGE_STEP).unwrap());
        assert!(!world.edge_in_collision(&q1, &q1, DEFAULT_EDGE_STEP).unwrap());
    }

    #[test]
    fn colliding_endpoint_reported_at_any_step() {
        let (chain, robot) = planar();
        let scene = Scene::new("pin", vec![Shape::sphere(v(2.0, 0.0, 0.0), 0.1)]);
        let world = CollisionWorld::new(&scene, &robot, &chain).unwrap();
        for step in [0.01, 0.5, 10.0] {
            assert!(world.edge_in_collision(&[1.0, 0.0], &[0.0, 0.0], step).unwrap());
        }
    }

    #[test]
    fn scene_json_round_trip() {
        let scene = Scene::new(
            "mixed",
            vec![
                Shape::sphere(v(1.0, 2.0, 3.0), 0.2),
                Shape::capsule(v(0.0, 0.0, 0.0), v(0.0, 0.0, 1.0), 0.01),
                Shape::aabb(v(0.5, 0.0, 0.0), v(0.1, 0.2, 0.3)),
            ],
        );
        let back = Scene::from_json(&scene.to_json().unwrap()).unwrap();
        assert_eq!(back.obstacles.len(), 3);
        assert_eq!(back.to_json().unwrap(), scene.to_json().unwrap());
    }
}
