//! Serial-arm model: revolute joints described by standard Denavit–Hartenberg
//! rows, forward kinematics, the joint-space metric, and enumeration of
//! equivalent configurations (joint vectors that differ by whole revolutions
//! and therefore place every link identically).

use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Deref, DerefMut};
use std::path::Path;

use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Rigid transform used for link frames and base/tool offsets.
pub type Frame = Isometry3<f64>;

/// Joint angles in radians, one per joint.
#[derive(Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(pub Vec<f64>);

impl Configuration {
    pub fn new(angles: Vec<f64>) -> Self {
        Configuration(angles)
    }

    pub fn zeros(n: usize) -> Self {
        Configuration(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Configuration {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Configuration {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Configuration {
    fn from(v: Vec<f64>) -> Self {
        Configuration(v)
    }
}

impl From<&[f64]> for Configuration {
    fn from(v: &[f64]) -> Self {
        Configuration(v.to_vec())
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// End-effector pose: position in meters and a unit quaternion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Pose { position, orientation }
    }

    pub fn identity() -> Self {
        Pose::new(Vector3::zeros(), UnitQuaternion::identity())
    }

    pub fn from_frame(frame: &Frame) -> Self {
        Pose::new(frame.translation.vector, frame.rotation)
    }

    pub fn to_frame(&self) -> Frame {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    /// Position error in meters and rotation error in radians.
    pub fn error_to(&self, other: &Pose) -> (f64, f64) {
        (
            (self.position - other.position).norm(),
            self.orientation.angle_to(&other.orientation),
        )
    }
}

/// JSON form of a pose: `{"position": [x, y, z], "orientation": [w, x, y, z]}`.
#[derive(Serialize, Deserialize)]
struct PoseRepr {
    position: [f64; 3],
    orientation: [f64; 4],
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let q = self.orientation.quaternion();
        PoseRepr {
            position: [self.position.x, self.position.y, self.position.z],
            orientation: [q.w, q.i, q.j, q.k],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PoseRepr::deserialize(d)?;
        let [w, x, y, z] = r.orientation;
        let q = Quaternion::new(w, x, y, z);
        if !(q.norm() > 0.0) {
            return Err(serde::de::Error::custom("zero quaternion"));
        }
        Ok(Pose::new(Vector3::from(r.position), UnitQuaternion::from_quaternion(q)))
    }
}

/// One revolute joint: its standard DH row and half-open limits `[lo, hi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointModel {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    #[serde(default)]
    pub theta_offset: f64,
    pub limit_lo: f64,
    pub limit_hi: f64,
}

impl JointModel {
    pub fn span(&self) -> f64 {
        self.limit_hi - self.limit_lo
    }

    pub fn contains(&self, angle: f64) -> bool {
        self.limit_lo <= angle && angle < self.limit_hi
    }

    /// DH transform `Rz(θ) · Tz(d) · Tx(a) · Rx(α)` for the given joint angle.
    pub fn transform(&self, angle: f64) -> Frame {
        let theta = angle + self.theta_offset;
        // Rz(θ)·Rx(α) multiplied out in half angles.
        let (sz, cz) = (0.5 * theta).sin_cos();
        let (sa, ca) = (0.5 * self.alpha).sin_cos();
        let (s, c) = (2.0 * sz * cz, cz * cz - sz * sz);
        let rotation = UnitQuaternion::new_unchecked(Quaternion::new(cz * ca, cz * sa, sz * sa, sz * ca));
        Isometry3::from_parts(Translation3::new(self.a * c, self.a * s, self.d), rotation)
    }

    /// Largest number of whole-revolution offsets any single angle can have
    /// inside the limits.
    pub fn revolution_capacity(&self) -> usize {
        let ratio = self.span() / TAU;
        let nearest = ratio.round();
        let count = if (ratio - nearest).abs() < 1e-9 {
            nearest
        } else {
            ratio.ceil()
        };
        (count as usize).max(1)
    }

    /// Every `angle + k·2π` inside the limits, ascending in `k`.
    pub fn equivalent_angles(&self, angle: f64) -> Vec<f64> {
        let k_lo = ((self.limit_lo - angle) / TAU).floor() as i64 - 1;
        let k_hi = ((self.limit_hi - angle) / TAU).ceil() as i64 + 1;
        (k_lo..=k_hi)
            .map(|k| angle + k as f64 * TAU)
            .filter(|&v| self.contains(v))
            .collect()
    }

    /// Shifts `angle` by whole revolutions into the limits, preferring the
    /// representative closest to the original value.
    pub fn wrap_into_limits(&self, angle: f64) -> Option<f64> {
        self.equivalent_angles(angle)
            .into_iter()
            .min_by(|x, y| (x - angle).abs().total_cmp(&(y - angle).abs()))
    }
}

#[derive(Serialize, Deserialize)]
struct ChainRepr {
    name: String,
    joints: Vec<JointModel>,
    #[serde(default = "Pose::identity")]
    base_frame: Pose,
    #[serde(default = "Pose::identity")]
    tool_frame: Pose,
}

/// Ordered list of revolute joints plus fixed base and tool offsets.
#[derive(Clone, Debug, PartialEq)]
pub struct KinematicChain {
    name: String,
    joints: Vec<JointModel>,
    base_frame: Frame,
    tool_frame: Frame,
}

const PRESETS: &[(&str, &str)] = &[
    ("ur5", include_str!("../presets/ur5.json")),
    ("ur5-elbow-limited", include_str!("../presets/ur5-elbow-limited.json")),
    ("ur5-vine", include_str!("../presets/ur5-vine.json")),
];

impl KinematicChain {
    pub fn new(name: impl Into<String>, joints: Vec<JointModel>, base_frame: Frame, tool_frame: Frame) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::InvalidArgument("chain needs at least one joint".into()));
        }
        for (i, j) in joints.iter().enumerate() {
            if !(j.limit_lo < j.limit_hi) {
                return Err(Error::InvalidArgument(format!(
                    "joint {i}: limit_lo {} must be below limit_hi {}",
                    j.limit_lo, j.limit_hi
                )));
            }
            if j.span() > 2.0 * TAU + 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "joint {i}: span {} exceeds two revolutions",
                    j.span()
                )));
            }
        }
        Ok(KinematicChain {
            name: name.into(),
            joints,
            base_frame,
            tool_frame,
        })
    }

    /// Planar chain of `lengths.len()` joints about parallel z axes with
    /// limits `[lo, hi)` on every joint.
    pub fn planar(lengths: &[f64], lo: f64, hi: f64) -> Result<Self> {
        let joints = lengths
            .iter()
            .map(|&a| JointModel {
                a,
                alpha: 0.0,
                d: 0.0,
                theta_offset: 0.0,
                limit_lo: lo,
                limit_hi: hi,
            })
            .collect();
        KinematicChain::new("planar", joints, Frame::identity(), Frame::identity())
    }

    /// Names of the shipped chain presets.
    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|(n, _)| *n)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::UnknownPreset(name.to_string()))?;
        KinematicChain::from_json(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: ChainRepr = serde_json::from_str(text)?;
        KinematicChain::new(
            repr.name,
            repr.joints,
            repr.base_frame.to_frame(),
            repr.tool_frame.to_frame(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        let repr = ChainRepr {
            name: self.name.clone(),
            joints: self.joints.clone(),
            base_frame: Pose::from_frame(&self.base_frame),
            tool_frame: Pose::from_frame(&self.tool_frame),
        };
        Ok(serde_json::to_string_pretty(&repr)?)
    }

    /// Loads a preset by name, or a chain JSON file when `name_or_path`
    /// is not a preset name.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if PRESETS.iter().any(|(n, _)| *n == name_or_path) {
            return KinematicChain::preset(name_or_path);
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            return Err(Error::UnknownPreset(name_or_path.to_string()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        KinematicChain::from_json(&text)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn joints(&self) -> &[JointModel] {
        &self.joints
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn base_frame(&self) -> &Frame {
        &self.base_frame
    }

    pub fn tool_frame(&self) -> &Frame {
        &self.tool_frame
    }

    /// Returns a copy with one joint's limits replaced.
    pub fn with_limits(&self, joint: usize, lo: f64, hi: f64) -> Result<Self> {
        let mut joints = self.joints.clone();
        let j = joints
            .get_mut(joint)
            .ok_or_else(|| Error::InvalidArgument(format!("no joint {joint}")))?;
        j.limit_lo = lo;
        j.limit_hi = hi;
        KinematicChain::new(self.name.clone(), joints, self.base_frame, self.tool_frame)
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof() && self.joints.iter().zip(q).all(|(j, &v)| j.contains(v))
    }

    pub(crate) fn check_in_limits(&self, q: &[f64]) -> Result<()> {
        check_dim(self.dof(), q.len())?;
        match self.joints.iter().zip(q).position(|(j, &v)| !j.contains(v)) {
            None => Ok(()),
            Some(i) => Err(Error::OutOfLimits(format!(
                "joint {i} = {} not in [{}, {})",
                q[i], self.joints[i].limit_lo, self.joints[i].limit_hi
            ))),
        }
    }

    /// Frame of every link: entry `i` is the pose of link `i` after joint
    /// `i`, and the last entry includes the tool offset.
    pub fn link_frames(&self, q: &[f64]) -> Result<Vec<Frame>> {
        let mut frames = Vec::with_capacity(self.dof());
        self.link_frames_into(q, &mut frames)?;
        Ok(frames)
    }

    pub(crate) fn link_frames_into(&self, q: &[f64], frames: &mut Vec<Frame>) -> Result<()> {
        check_dim(self.dof(), q.len())?;
        frames.clear();
        let mut current = self.base_frame;
        for (joint, &angle) in self.joints.iter().zip(q) {
            current *= joint.transform(angle);
            frames.push(current);
        }
        if let Some(last) = frames.last_mut() {
            *last *= self.tool_frame;
        }
        Ok(())
    }

    pub fn forward_kinematics(&self, q: &[f64]) -> Result<Pose> {
        let frames = self.link_frames(q)?;
        Ok(Pose::from_frame(frames.last().expect("chain has joints")))
    }

    /// All configurations reachable from `q` by adding whole revolutions to
    /// any subset of joints while staying inside the limits. `q` itself is
    /// always included.
    pub fn equivalent_configurations(&self, q: &[f64]) -> Result<Vec<Configuration>> {
        self.check_in_limits(q)?;
        let per_joint: Vec<Vec<f64>> = self
            .joints
            .iter()
            .zip(q)
            .map(|(j, &v)| j.equivalent_angles(v))
            .collect();
        Ok(cartesian_product(&per_joint))
    }

    /// Upper bound on the number of equivalent configurations over all
    /// in-limit configurations: the product of per-joint revolution counts.
    pub fn max_equivalent_count(&self) -> usize {
        self.joints.iter().map(JointModel::revolution_capacity).product()
    }

    /// Uniform sample inside the joint limits.
    pub fn sample_uniform<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        Configuration(
            self.joints
                .iter()
                .map(|j| rng.random_range(j.limit_lo..j.limit_hi))
                .collect(),
        )
    }
}

pub(crate) fn cartesian_product(per_axis: &[Vec<f64>]) -> Vec<Configuration> {
    let mut out = vec![Vec::with_capacity(per_axis.len())];
    for options in per_axis {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |&v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    out.into_iter().map(Configuration).collect()
}

/// Euclidean joint-space distance in radians.
pub fn config_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    Ok(distance(a, b))
}

#[inline]
pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    distance_sq(a, b).sqrt()
}

#[inline]
pub(crate) fn distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Largest per-frame position (m) and orientation (rad) difference between
/// two frame lists of equal length.
pub fn frames_deviation(a: &[Frame], b: &[Frame]) -> (f64, f64) {
    a.iter().zip(b).fold((0.0_f64, 0.0_f64), |(dp, dr), (fa, fb)| {
        (
            dp.max((fa.translation.vector - fb.translation.vector).norm()),
            dr.max(fa.rotation.angle_to(&fb.rotation)),
        )
    })
}
