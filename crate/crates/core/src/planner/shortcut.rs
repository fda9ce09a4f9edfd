//! Random shortcutting: pick two points along the path by arc length and
//! replace what lies between them with a straight segment when that segment
//! is collision-free.

use rand::Rng;

use crate::collision::CollisionWorld;
use crate::kinematics::{distance, Configuration};

use super::Path;

const MIN_GAIN: f64 = 1e-12;

/// Point at arc length `s`: index of the segment it lies on and the point.
fn locate(path: &[Configuration], cumulative: &[f64], s: f64) -> (usize, Configuration) {
    let seg = cumulative
        .partition_point(|&c| c <= s)
        .saturating_sub(1)
        .min(path.len() - 2);
    let len = cumulative[seg + 1] - cumulative[seg];
    let t = if len > 0.0 {
        ((s - cumulative[seg]) / len).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let a = &path[seg];
    let b = &path[seg + 1];
    if t == 0.0 {
        return (seg, a.clone());
    }
    if t == 1.0 {
        return (seg, b.clone());
    }
    let q = a.iter().zip(b.iter()).map(|(x, y)| x + (y - x) * t).collect();
    (seg, Configuration(q))
}

fn edge_free(world: &CollisionWorld<'_>, a: &[f64], b: &[f64], step: f64) -> bool {
    matches!(world.edge_in_collision(a, b, step), Ok(false))
}

/// Runs `attempts` shortcut attempts on `path` in place. Returns whether
/// the path got shorter.
pub(crate) fn shortcut_in_place<R: Rng + ?Sized>(
    path: &mut Vec<Configuration>,
    world: &CollisionWorld<'_>,
    attempts: usize,
    step: f64,
    rng: &mut R,
) -> bool {
    let mut improved = false;
    for _ in 0..attempts {
        if path.len() <= 2 {
            break;
        }
        let mut cumulative = Vec::with_capacity(path.len());
        cumulative.push(0.0);
        for w in path.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + distance(&w[0], &w[1]));
        }
        let total = *cumulative.last().unwrap();
        if total <= 0.0 {
            break;
        }
        let (mut s1, mut s2) = (rng.random::<f64>() * total, rng.random::<f64>() * total);
        if s1 > s2 {
            std::mem::swap(&mut s1, &mut s2);
        }
        let (i1, p1) = locate(path, &cumulative, s1);
        let (i2, p2) = locate(path, &cumulative, s2);
        if i1 == i2 {
            continue;
        }
        let gain = (s2 - s1) - distance(&p1, &p2);
        if gain <= MIN_GAIN {
            continue;
        }
        let chain = world.chain;
        if !chain.within_limits(&p1) || !chain.within_limits(&p2) {
            continue;
        }
        // The pieces kept from the old segments are re-validated as well:
        // their sample points differ from the original segments'.
        let head = &path[i1];
        let tail = &path[i2 + 1];
        if !edge_free(world, head, &p1, step) || !edge_free(world, &p1, &p2, step) || !edge_free(world, &p2, tail, step)
        {
            continue;
        }
        let mut next = Vec::with_capacity(path.len());
        next.extend_from_slice(&path[..=i1]);
        next.push(p1);
        next.push(p2);
        next.extend_from_slice(&path[i2 + 1..]);
        next.dedup_by(|b, a| distance(a, b) == 0.0);
        *path = next;
        improved = true;
    }
    improved
}

/// Like [`shortcut_in_place`], but each attempt straightens a single joint
/// between the two sampled points and leaves the other joints untouched.
pub(crate) fn partial_shortcut_in_place<R: Rng + ?Sized>(
    path: &mut Vec<Configuration>,
    world: &CollisionWorld<'_>,
    attempts: usize,
    step: f64,
    rng: &mut R,
) -> bool {
    let mut improved = false;
    let dof = world.chain.dof();
    for _ in 0..attempts {
        if path.len() <= 2 {
            break;
        }
        let mut cumulative = Vec::with_capacity(path.len());
        cumulative.push(0.0);
        for w in path.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + distance(&w[0], &w[1]));
        }
        let total = *cumulative.last().unwrap();
        if total <= 0.0 {
            break;
        }
        let (mut s1, mut s2) = (rng.random::<f64>() * total, rng.random::<f64>() * total);
        if s1 > s2 {
            std::mem::swap(&mut s1, &mut s2);
        }
        let joint = rng.random_range(0..dof);
        let (i1, p1) = locate(path, &cumulative, s1);
        let (i2, p2) = locate(path, &cumulative, s2);
        if i1 == i2 || s2 - s1 <= 0.0 {
            continue;
        }
        let mut middle: Vec<Configuration> = Vec::with_capacity(i2 - i1 + 2);
        middle.push(p1.clone());
        for (w, &s) in path[i1 + 1..=i2].iter().zip(&cumulative[i1 + 1..=i2]) {
            let mut q = w.clone();
            q[joint] = p1[joint] + (p2[joint] - p1[joint]) * (s - s1) / (s2 - s1);
            middle.push(q);
        }
        middle.push(p2);
        let old = (cumulative[i1 + 1] - s1) + (s2 - cumulative[i2]) + (cumulative[i2] - cumulative[i1 + 1]);
        let new = super::polyline_length(&middle);
        if old - new <= MIN_GAIN {
            continue;
        }
        if !middle.iter().all(|q| world.chain.within_limits(q)) {
            continue;
        }
        let head = &path[i1];
        let tail = &path[i2 + 1];
        let free = edge_free(world, head, &middle[0], step)
            && middle.windows(2).all(|w| edge_free(world, &w[0], &w[1], step))
            && edge_free(world, middle.last().unwrap(), tail, step);
        if !free {
            continue;
        }
        let mut next = Vec::with_capacity(path.len() + 2);
        next.extend_from_slice(&path[..=i1]);
        next.extend(middle);
        next.extend_from_slice(&path[i2 + 1..]);
        next.dedup_by(|b, a| distance(a, b) == 0.0);
        *path = next;
        improved = true;
    }
    improved
}

/// Shortcut `path` with a seeded generator; endpoints never move and the
/// result is never longer.
pub fn shortcut(path: &Path, world: &CollisionWorld<'_>, attempts: usize, step: f64, seed: u64) -> Path {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut waypoints = path.waypoints.clone();
    shortcut_in_place(&mut waypoints, world, attempts, step, &mut rng);
    Path { waypoints }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::{RobotGeometry, Scene, Shape};
    use crate::kinematics::KinematicChain;
    use nalgebra::Vector3;
    use std::f64::consts::TAU;

    fn cfg(v: &[f64]) -> Configuration {
        Configuration(v.to_vec())
    }

    #[test]
    fn zigzag_straightens_in_free_space() {
        let chain = KinematicChain::planar(&[1.0, 1.0], -TAU, TAU).unwrap();
        let robot = RobotGeometry::along_x(&[1.0, 1.0], 0.05);
        let scene = Scene::empty();
        let world = CollisionWorld::new(&scene, &robot, &chain).unwrap();
        let path = Path::new(vec![cfg(&[0.0, 0.0]), cfg(&[1.0, 1.0]), cfg(&[2.0, 0.0])]);
        let out = shortcut(&path, &world, 200, 0.02, 4);
        assert!(out.length() < path.length());
        assert!(out.length() < 2.0 + 0.02, "{}", out.length());
        assert_eq!(out.waypoints.first(), path.waypoints.first());
        assert_eq!(out.waypoints.last(), path.waypoints.last());
    }

    #[test]
    fn straight_path_unchanged() {
        let chain = KinematicChain::planar(&[1.0, 1.0], -TAU, TAU).unwrap();
        let robot = RobotGeometry::along_x(&[1.0, 1.0], 0.05);
        let scene = Scene::empty();
        let world = CollisionWorld::new(&scene, &robot, &chain).unwrap();
        let path = Path::new(vec![cfg(&[0.0, 0.0]), cfg(&[1.0, 1.0])]);
        assert_eq!(shortcut(&path, &world, 50, 0.02, 1), path);
        let collinear = Path::new(vec![cfg(&[0.0, 0.0]), cfg(&[0.5, 0.5]), cfg(&[1.0, 1.0])]);
        let out = shortcut(&collinear, &world, 50, 0.02, 1);
        assert!((out.length() - collinear.length()).abs() < 1e-12);
    }

    #[test]
    fn blocked_corner_is_kept() {
        // The arm may not sweep through joint-1 angles near zero with the
        // second joint folded back, so the detour must survive.
        let chain = KinematicChain::planar(&[1.0, 1.0], -TAU, TAU).unwrap();
        let robot = RobotGeometry::along_x(&[1.0, 1.0], 0.05);
        let scene = Scene::new("pin", vec![Shape::sphere(Vector3::new(2.0, 0.0, 0.0), 0.2)]);
        let world = CollisionWorld::new(&scene, &robot, &chain).unwrap();
        let path = Path::new(vec![
            cfg(&[-0.6, 0.0]),
            cfg(&[-0.6, 1.2]),
            cfg(&[0.6, 1.2]),
            cfg(&[0.6, 0.0]),
        ]);
        assert!(path.is_collision_free(&world, 0.02));
        let out = shortcut(&path, &world, 300, 0.02, 8);
        assert!(out.is_collision_free(&world, 0.02));
        assert!(out.length() <= path.length());
        assert!(out.length() > 1.2);
    }
}
