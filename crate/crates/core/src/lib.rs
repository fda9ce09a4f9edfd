//! Multi-goal motion planning for revolute arms that exploits workspace
//! redundancy (several inverse-kinematic solutions per task) and
//! configuration-space redundancy (joint vectors separated by whole
//! revolutions) to find shorter paths.

// `!(a < b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod collision;
pub mod error;
pub mod ik;
pub mod kinematics;
pub mod planner;
pub mod scenes;
pub mod timing;

pub use error::{Error, Result};
pub use ik::{
    analytic_ik_6r, compute_goal_configurations, select_goals, GoalSet, OrientationMode, SelectionStrategy, TaskGoal,
};
pub use kinematics::{config_distance, Configuration, Frame, JointModel, KinematicChain, Pose};
pub use planner::{path_length, plan, shortcut, Path, PlanResult, PlannerConfig, TraceEntry};
pub use timing::{execution_time, JointDynamics};
