//! Execution-time model: every segment is a synchronized rest-to-rest move
//! whose duration is set by the slowest joint's trapezoidal (or triangular)
//! velocity profile.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kinematics::Configuration;

/// Per-joint velocity (rad/s) and acceleration (rad/s²) limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDynamics {
    pub v_max: Vec<f64>,
    pub a_max: Vec<f64>,
}

const UR5_DYNAMICS: &str = include_str!("../presets/ur5-dynamics.json");

impl JointDynamics {
    pub fn new(v_max: Vec<f64>, a_max: Vec<f64>) -> Result<Self> {
        check_dim(v_max.len(), a_max.len())?;
        if v_max.is_empty() {
            return Err(Error::InvalidArgument("dynamics need at least one joint".into()));
        }
        if v_max.iter().chain(&a_max).any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidArgument(
                "velocity and acceleration limits must be positive".into(),
            ));
        }
        Ok(JointDynamics { v_max, a_max })
    }

    pub fn uniform(n: usize, v_max: f64, a_max: f64) -> Result<Self> {
        JointDynamics::new(vec![v_max; n], vec![a_max; n])
    }

    /// π rad/s and 2π rad/s² on all six joints.
    pub fn ur5_default() -> Self {
        JointDynamics::from_json(UR5_DYNAMICS).expect("bundled dynamics are valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: JointDynamics = serde_json::from_str(text)?;
        JointDynamics::new(raw.v_max, raw.a_max)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        JointDynamics::from_json(&text)
    }

    pub fn dof(&self) -> usize {
        self.v_max.len()
    }
}

/// Rest-to-rest time for one joint to move `delta` radians.
pub fn joint_move_time(delta: f64, v_max: f64, a_max: f64) -> f64 {
    let dist = delta.abs();
    if dist == 0.0 {
        return 0.0;
    }
    if dist * a_max >= v_max * v_max {
        dist / v_max + v_max / a_max
    } else {
        2.0 * (dist / a_max).sqrt()
    }
}

/// Time for a synchronized rest-to-rest move by `delta` (per joint).
pub fn segment_time(delta: &[f64], dyn_: &JointDynamics) -> Result<f64> {
    check_dim(dyn_.dof(), delta.len())?;
    Ok(delta
        .iter()
        .zip(dyn_.v_max.iter().zip(&dyn_.a_max))
        .map(|(&d, (&v, &a))| joint_move_time(d, v, a))
        .fold(0.0, f64::max))
}

/// Total time to follow `waypoints`, stopping at each one.
pub fn execution_time(waypoints: &[Configuration], dyn_: &JointDynamics) -> Result<f64> {
    let mut total = 0.0;
    let mut delta = vec![0.0; dyn_.dof()];
    for pair in waypoints.windows(2) {
        check_dim(dyn_.dof(), pair[0].len())?;
        check_dim(dyn_.dof(), pair[1].len())?;
        for (d, (a, b)) in delta.iter_mut().zip(pair[0].iter().zip(pair[1].iter())) {
            *d = b - a;
        }
        total += segment_time(&delta, dyn_)?;
    }
    if let Some(w) = waypoints.first() {
        check_dim(dyn_.dof(), w.len())?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit(v: f64, a: f64) -> JointDynamics {
        JointDynamics::uniform(1, v, a).unwrap()
    }

    #[test]
    fn closed_form_branches() {
        assert_eq!(segment_time(&[0.0], &unit(1.0, 1.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(segment_time(&[2.0], &unit(1.0, 1.0)).unwrap(), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(segment_time(&[-1.0], &unit(2.0, 1.0)).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn slowest_joint_dominates() {
        let d = JointDynamics::new(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(segment_time(&[2.0, 0.5], &d).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn path_times() {
        let d = JointDynamics::uniform(2, 1.0, 1.0).unwrap();
        let a = Configuration(vec![0.0, 0.0]);
        assert_eq!(execution_time(std::slice::from_ref(&a), &d).unwrap(), 0.0);
        assert_eq!(execution_time(&[a.clone(), a.clone()], &d).unwrap(), 0.0);
        let b = Configuration(vec![2.0, 0.0]);
        let c = Configuration(vec![2.0, 1.0]);
        let whole = execution_time(&[a.clone(), b.clone(), c.clone()], &d).unwrap();
        let parts = execution_time(&[a, b.clone()], &d).unwrap() + execution_time(&[b, c], &d).unwrap();
        assert_abs_diff_eq!(whole, parts, epsilon = 1e-12);
        assert!(execution_time(&[Configuration(vec![0.0])], &d).is_err());
    }

    #[test]
    fn invalid_dynamics() {
        assert!(JointDynamics::new(vec![1.0], vec![0.0]).is_err());
        assert!(JointDynamics::new(vec![1.0, 2.0], vec![1.0]).is_err());
        assert_eq!(JointDynamics::ur5_default().dof(), 6);
    }
}
