//! Nearest-neighbor indices over joint-space points stored by integer id.

use crate::kinematics::distance_sq;

/// Exact nearest-neighbor queries over a growing point set.
pub trait NearestNeighbors {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Adds a point; ids are assigned densely from zero in insertion order.
    fn insert(&mut self, q: &[f64]) -> usize;
    fn point(&self, id: usize) -> &[f64];
    /// Closest point to `q`; ties go to the lowest id.
    fn nearest(&self, q: &[f64]) -> Option<usize>;
    /// Up to `k` closest points with distance `≤ radius`, nearest first,
    /// ties broken by id.
    fn k_nearest_within(&self, q: &[f64], k: usize, radius: f64) -> Vec<usize>;
}

/// Brute-force scan over a flat coordinate buffer.
#[derive(Clone, Debug)]
pub struct LinearScan {
    dim: usize,
    coords: Vec<f64>,
}

impl LinearScan {
    pub fn new(dim: usize) -> Self {
        LinearScan {
            dim,
            coords: Vec::new(),
        }
    }
}

fn push_candidate(best: &mut Vec<(f64, usize)>, k: usize, d: f64, id: usize) {
    if best.len() == k && (d, id) >= best[k - 1] {
        return;
    }
    let pos = best.partition_point(|probe| *probe < (d, id));
    best.insert(pos, (d, id));
    best.truncate(k);
}

impl NearestNeighbors for LinearScan {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    fn insert(&mut self, q: &[f64]) -> usize {
        debug_assert_eq!(q.len(), self.dim);
        self.coords.extend_from_slice(q);
        self.len() - 1
    }

    fn point(&self, id: usize) -> &[f64] {
        &self.coords[id * self.dim..(id + 1) * self.dim]
    }

    fn nearest(&self, q: &[f64]) -> Option<usize> {
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for (id, p) in self.coords.chunks_exact(self.dim).enumerate() {
            let d = distance_sq(p, q);
            if d < best_d {
                best_d = d;
                best = Some(id);
            }
        }
        best
    }

    fn k_nearest_within(&self, q: &[f64], k: usize, radius: f64) -> Vec<usize> {
        if k == 0 {
            return Vec::new();
        }
        let r2 = radius * radius;
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for (id, p) in self.coords.chunks_exact(self.dim).enumerate() {
            let d = distance_sq(p, q);
            if d <= r2 {
                push_candidate(&mut best, k, d, id);
            }
        }
        best.into_iter().map(|(_, id)| id).collect()
    }
}

#[derive(Clone, Debug)]
struct KdNode {
    id: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

/// Incrementally built k-d tree (no rebalancing). Answers are identical to
/// [`LinearScan`], including tie-breaking.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: LinearScan,
    nodes: Vec<KdNode>,
}

impl KdTree {
    pub fn new(dim: usize) -> Self {
        KdTree {
            points: LinearScan::new(dim),
            nodes: Vec::new(),
        }
    }

    fn search(&self, node: Option<usize>, q: &[f64], k: usize, r2: f64, best: &mut Vec<(f64, usize)>) {
        let Some(n) = node else { return };
        let KdNode { id, axis, left, right } = self.nodes[n];
        let p = self.points.point(id);
        let d = distance_sq(p, q);
        if d <= r2 {
            push_candidate(best, k, d, id);
        }
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
        self.search(near, q, k, r2, best);
        let worst = if best.len() == k { best[k - 1].0 } else { r2 };
        if diff * diff <= worst {
            self.search(far, q, k, r2, best);
        }
    }
}

impl NearestNeighbors for KdTree {
    fn dim(&self) -> usize {
        self.points.dim
    }

    fn len(&self) -> usize {
        self.points.len()
    }

    fn insert(&mut self, q: &[f64]) -> usize {
        let id = self.points.insert(q);
        let node_index = self.nodes.len();
        let dim = self.points.dim;
        if node_index == 0 {
            self.nodes.push(KdNode {
                id,
                axis: 0,
                left: None,
                right: None,
            });
            return id;
        }
        let mut cur = 0;
        loop {
            let axis = self.nodes[cur].axis;
            let split = self.points.point(self.nodes[cur].id)[axis];
            let go_left = q[axis] < split;
            let next = if go_left {
                self.nodes[cur].left
            } else {
                self.nodes[cur].right
            };
            match next {
                Some(n) => cur = n,
                None => {
                    self.nodes.push(KdNode {
                        id,
                        axis: (axis + 1) % dim,
                        left: None,
                        right: None,
                    });
                    if go_left {
                        self.nodes[cur].left = Some(node_index);
                    } else {
                        self.nodes[cur].right = Some(node_index);
                    }
                    return id;
                }
            }
        }
    }

    fn point(&self, id: usize) -> &[f64] {
        self.points.point(id)
    }

    fn nearest(&self, q: &[f64]) -> Option<usize> {
        self.k_nearest_within(q, 1, f64::INFINITY).first().copied()
    }

    fn k_nearest_within(&self, q: &[f64], k: usize, radius: f64) -> Vec<usize> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let mut best = Vec::with_capacity(k + 1);
        self.search(Some(0), q, k, radius * radius, &mut best);
        best.into_iter().map(|(_, id)| id).collect()
    }
}
