//! Frozen reference values and plain-matrix oracles.

use approx::assert_abs_diff_eq;
use nalgebra::Vector3;
use redugoal::collision::{shape_distance, Shape};
use redugoal::kinematics::KinematicChain;
use redugoal::timing::{joint_move_time, segment_time, JointDynamics};

type M4 = [[f64; 4]; 4];

fn mul(a: &M4, b: &M4) -> M4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

/// Standard DH link transform written out element by element.
fn dh(theta: f64, d: f64, a: f64, alpha: f64) -> M4 {
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = alpha.sin_cos();
    [
        [ct, -st * ca, st * sa, a * ct],
        [st, ct * ca, -ct * sa, a * st],
        [0.0, sa, ca, d],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

const UR5_DH: [(f64, f64, f64); 6] = [
    (0.089159, 0.0, std::f64::consts::FRAC_PI_2),
    (0.0, -0.425, 0.0),
    (0.0, -0.39225, 0.0),
    (0.10915, 0.0, std::f64::consts::FRAC_PI_2),
    (0.09465, 0.0, -std::f64::consts::FRAC_PI_2),
    (0.0823, 0.0, 0.0),
];

fn matrix_fk(q: &[f64]) -> M4 {
    let mut t = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ];
    for (qi, (d, a, alpha)) in q.iter().zip(UR5_DH) {
        t = mul(&t, &dh(*qi, d, a, alpha));
    }
    t
}

#[test]
fn ur5_pose_matches_frozen_reference() {
    let chain = KinematicChain::preset("ur5").unwrap();
    let pose = chain.forward_kinematics(&[0.3, -1.2, 0.8, -0.5, 1.1, 2.0]).unwrap();
    let want_p = [-0.5633725066243187, -0.3276007186375898, 0.6366437548119027];
    let want_r = [
        [0.4587678043620057, -0.7958354277355504, -0.3951937166021724],
        [0.5301255481356774, 0.6020780277382686, -0.5970502087166912],
        [0.7130911617000396, 0.0644051277133315, 0.698106707194192],
    ];
    let r = pose.orientation.to_rotation_matrix();
    for i in 0..3 {
        assert_abs_diff_eq!(pose.position[i], want_p[i], epsilon = 1e-12);
        for j in 0..3 {
            assert_abs_diff_eq!(r[(i, j)], want_r[i][j], epsilon = 1e-12);
        }
    }
}

#[test]
fn ur5_pose_matches_matrix_oracle() {
    let chain = KinematicChain::preset("ur5").unwrap();
    let mut seed = 0x9e3779b97f4a7c15u64;
    let mut next = || {
        seed ^= seed << 13;
        seed ^= seed >> 7;
        seed ^= seed << 17;
        (seed >> 11) as f64 / (1u64 << 53) as f64 * 12.0 - 6.0
    };
    for _ in 0..200 {
        let q: Vec<f64> = (0..6).map(|_| next()).collect();
        let pose = chain.forward_kinematics(&q).unwrap();
        let t = matrix_fk(&q);
        let r = pose.orientation.to_rotation_matrix();
        for i in 0..3 {
            assert_abs_diff_eq!(pose.position[i], t[i][3], epsilon = 1e-12);
            for j in 0..3 {
                assert_abs_diff_eq!(r[(i, j)], t[i][j], epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn preset_equivalent_counts() {
    for (name, n) in [("ur5", 64), ("ur5-elbow-limited", 32), ("ur5-vine", 16)] {
        assert_eq!(
            KinematicChain::preset(name).unwrap().max_equivalent_count(),
            n,
            "{name}"
        );
    }
}

#[test]
fn segment_time_reference_values() {
    // Trapezoid: 2 rad at 1 rad/s, 2 rad/s² -> 2/1 + 1/2.
    assert_abs_diff_eq!(joint_move_time(2.0, 1.0, 2.0), 2.5, epsilon = 1e-15);
    // Triangle: 0.25 rad at 2 rad/s², never reaching v -> 2·sqrt(0.125).
    assert_abs_diff_eq!(joint_move_time(-0.25, 1.0, 2.0), 2.0 * 0.125f64.sqrt(), epsilon = 1e-15);
    let dyn_ = JointDynamics::new(vec![1.0, 3.0], vec![2.0, 1.0]).unwrap();
    // Slowest joint decides: 2.5 s (trapezoid) against 2 s (triangle).
    assert_abs_diff_eq!(segment_time(&[2.0, 1.0], &dyn_).unwrap(), 2.5, epsilon = 1e-15);
    assert_abs_diff_eq!(
        segment_time(&[0.0, 10.0], &dyn_).unwrap(),
        10.0 / 3.0 + 3.0,
        epsilon = 1e-12
    );
}

#[test]
fn box_distance_matches_clamp_oracle() {
    let bx = Shape::aabb(Vector3::new(0.1, -0.2, 0.3), Vector3::new(0.2, 0.1, 0.3));
    for p in [[0.6, 0.0, 0.3], [0.1, -0.2, 1.0], [0.5, 0.3, -0.4], [-0.4, -0.5, 0.9]] {
        let p: Vector3<f64> = Vector3::from(p);
        let lo = Vector3::new(-0.1, -0.3, 0.0);
        let hi = Vector3::new(0.3, -0.1, 0.6);
        let closest = p.zip_zip_map(&lo, &hi, |v: f64, l, h| v.clamp(l, h));
        let want = (p - closest).norm() - 0.05;
        let got = shape_distance(&Shape::sphere(p, 0.05), &bx);
        assert_abs_diff_eq!(got, want, epsilon = 1e-12);
    }
}

#[test]
fn ur5_zero_configuration_frames() {
    let chain = KinematicChain::preset("ur5").unwrap();
    let frames = chain.link_frames(&[0.0; 6]).unwrap();
    let want = [
        [0.0, 0.0, 0.089159],
        [-0.425, 0.0, 0.089159],
        [-0.81725, 0.0, 0.089159],
        [-0.81725, -0.10915, 0.089159],
        [-0.81725, -0.10915, -0.005491],
        [-0.81725, -0.19145, -0.005491],
    ];
    let origins: Vec<_> = frames.iter().map(|f| f.translation.vector).collect();
    let tail = &origins[origins.len() - 6..];
    for (got, want) in tail.iter().zip(want) {
        for i in 0..3 {
            assert_abs_diff_eq!(got[i], want[i], epsilon = 1e-12);
        }
    }
    let r = frames.last().unwrap().rotation.to_rotation_matrix();
    let want_r = [[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]];
    for i in 0..3 {
        for j in 0..3 {
            assert_abs_diff_eq!(r[(i, j)], want_r[i][j], epsilon = 1e-12);
        }
    }
}

#[test]
fn cubicle_and_vine_goal_counts() {
    use redugoal::ik::compute_goal_configurations;
    use redugoal::kinematics::Configuration;
    use redugoal::scenes::{build_scene, CubicleParams, SceneSpec, VineParams};

    let spec = SceneSpec::cubicles(CubicleParams::default(), 0);
    let (_, tasks) = build_scene(&spec).unwrap();
    let chain = KinematicChain::preset(&spec.chain).unwrap();
    let start = Configuration::zeros(6);
    // Eight arm poses per cubicle center, 32 equivalents each.
    for t in &tasks {
        assert_eq!(compute_goal_configurations(&chain, t, &start).unwrap().len(), 256);
    }

    let spec = SceneSpec::vine(VineParams::default(), 0);
    let (_, tasks) = build_scene(&spec).unwrap();
    let chain = KinematicChain::preset(&spec.chain).unwrap();
    let start = Configuration::new(vec![0.0, -1.5, 0.0, 0.0, 0.0, 0.0]);
    for t in &tasks {
        let n = compute_goal_configurations(&chain, t, &start).unwrap().len();
        assert!(n > 0 && n <= 80, "{n}");
    }
}
