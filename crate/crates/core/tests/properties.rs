use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use proptest::prelude::*;

use redugoal::collision::{shape_distance, CollisionWorld, RobotGeometry, Scene, Shape};
use redugoal::ik::analytic_ik_6r;
use redugoal::kinematics::{config_distance, frames_deviation, Configuration, KinematicChain};
use redugoal::planner::{path_length, shortcut, Path};
use redugoal::timing::{joint_move_time, segment_time, JointDynamics};

fn joint() -> impl Strategy<Value = f64> {
    -PI..PI
}

fn config6() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(joint(), 6)
}

fn point() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn shape() -> impl Strategy<Value = Shape> {
    prop_oneof![
        (point(), 0.01..0.3f64).prop_map(|(c, r)| Shape::sphere(c, r)),
        (point(), point(), 0.01..0.2f64).prop_map(|(a, b, r)| Shape::capsule(a, b, r)),
        (point(), point()).prop_map(|(c, h)| Shape::aabb(c, h.abs() * 0.4 + Vector3::repeat(0.01))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn equivalents_share_every_link_frame(q in config6()) {
        let chain = KinematicChain::preset("ur5").unwrap();
        let frames = chain.link_frames(&q).unwrap();
        for eq in chain.equivalent_configurations(&q).unwrap() {
            let (dp, dr) = frames_deviation(&frames, &chain.link_frames(&eq).unwrap());
            prop_assert!(dp < 1e-9 && dr < 1e-9);
        }
    }

    #[test]
    fn ik_solutions_reach_the_pose(q in config6()) {
        let chain = KinematicChain::preset("ur5").unwrap();
        let target = chain.forward_kinematics(&q).unwrap();
        let sols = analytic_ik_6r(&chain, &target).unwrap();
        prop_assert!(!sols.is_empty());
        for s in &sols {
            let (dp, dr) = chain.forward_kinematics(s).unwrap().error_to(&target);
            prop_assert!(dp < 1e-6 && dr < 1e-6, "{dp} {dr}");
        }
        let recovered = sols.iter().any(|s| {
            s.iter().zip(&q).all(|(a, b)| {
                let d = (a - b).rem_euclid(TAU);
                d.min(TAU - d) < 1e-6
            })
        });
        prop_assert!(recovered);
    }

    #[test]
    fn shape_distance_is_symmetric(a in shape(), b in shape()) {
        let (ab, ba) = (shape_distance(&a, &b), shape_distance(&b, &a));
        prop_assert!((ab - ba).abs() < 1e-9, "{ab} {ba}");
    }

    #[test]
    fn sphere_distance_is_exact(c1 in point(), c2 in point(), r1 in 0.0..0.5f64, r2 in 0.0..0.5f64) {
        let d = shape_distance(&Shape::sphere(c1, r1), &Shape::sphere(c2, r2));
        prop_assert!((d - ((c1 - c2).norm() - r1 - r2)).abs() < 1e-12);
    }

    #[test]
    fn config_distance_triangle(a in config6(), b in config6(), c in config6()) {
        let ab = config_distance(&a, &b).unwrap();
        let bc = config_distance(&b, &c).unwrap();
        let ac = config_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn move_time_is_monotone_and_even(d in 0.0..10.0f64, e in 0.0..1.0f64, v in 0.1..4.0f64, a in 0.1..10.0f64) {
        let t = joint_move_time(d, v, a);
        prop_assert!(joint_move_time(d + e, v, a) >= t);
        prop_assert_eq!(joint_move_time(-d, v, a), t);
        // Bounded below by either limit alone, above by cruise plus one ramp.
        prop_assert!(t + 1e-12 >= (d / v).max(2.0 * (d / a).sqrt()));
        prop_assert!(t <= d / v + v / a + 1e-12);
    }

    #[test]
    fn segment_time_is_slowest_joint(delta in config6()) {
        let dyn_ = JointDynamics::ur5_default();
        let t = segment_time(&delta, &dyn_).unwrap();
        let each: Vec<f64> = delta.iter().enumerate()
            .map(|(i, d)| joint_move_time(*d, dyn_.v_max[i], dyn_.a_max[i]))
            .collect();
        prop_assert!(each.iter().all(|x| *x <= t));
        prop_assert!(each.contains(&t));
    }

    #[test]
    fn shortcut_never_lengthens(points in prop::collection::vec(config6(), 2..8), seed in any::<u64>()) {
        let chain = KinematicChain::preset("ur5").unwrap();
        let robot = RobotGeometry::preset("ur5").unwrap();
        let scene = Scene::empty();
        let world = CollisionWorld::new(&scene, &robot, &chain).unwrap();
        let path = Path::new(points.into_iter().map(Configuration::new).collect());
        let short = shortcut(&path, &world, 20, 0.05, seed);
        prop_assert!(path_length(&short) <= path_length(&path) + 1e-12);
        prop_assert_eq!(short.waypoints.first(), path.waypoints.first());
        prop_assert_eq!(short.waypoints.last(), path.waypoints.last());
    }
}
