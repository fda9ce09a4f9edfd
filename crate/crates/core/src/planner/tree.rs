use crate::collision::CollisionWorld;
use crate::kinematics::{distance, Configuration};

use super::nn::NearestNeighbors;

#[derive(Clone, Debug)]
struct Node {
    parent: Option<usize>,
    cost: f64,
    root: usize,
    children: Vec<usize>,
}

pub(super) enum Extend {
    Trapped,
    Advanced(usize),
    Reached(usize),
}

/// Settings shared by both trees of one planning query.
pub(super) struct Growth<'w, 'a> {
    pub world: &'w CollisionWorld<'a>,
    pub extend_step: f64,
    pub edge_step: f64,
    pub rewire_radius: f64,
}

impl Growth<'_, '_> {
    fn neighbor_count(&self, n: usize, dim: usize) -> usize {
        let k = std::f64::consts::E * (1.0 + 1.0 / dim as f64) * ((n + 1) as f64).ln();
        k.ceil() as usize
    }
}

/// RRT*-style tree. In the start tree paths run root → node; in the goal
/// forest they run node → root, and every root is a goal configuration.
pub(super) struct Tree<N> {
    index: N,
    nodes: Vec<Node>,
    /// Whether paths traverse edges parent → child.
    outward: bool,
}

impl<N: NearestNeighbors> Tree<N> {
    pub fn new(index: N, outward: bool) -> Self {
        Tree {
            index,
            nodes: Vec::new(),
            outward,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn add_root(&mut self, q: &[f64], tag: usize) -> usize {
        let id = self.index.insert(q);
        self.nodes.push(Node {
            parent: None,
            cost: 0.0,
            root: tag,
            children: Vec::new(),
        });
        id
    }

    pub fn q(&self, id: usize) -> &[f64] {
        self.index.point(id)
    }

    pub fn cost(&self, id: usize) -> f64 {
        self.nodes[id].cost
    }

    pub fn root_tag(&self, id: usize) -> usize {
        self.nodes[id].root
    }

    /// Configurations from `id` up to its root.
    pub fn branch(&self, id: usize) -> Vec<Configuration> {
        let mut out = vec![Configuration(self.q(id).to_vec())];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            out.push(Configuration(self.q(p).to_vec()));
            cur = p;
        }
        out
    }

    fn edge_free(&self, g: &Growth<'_, '_>, parent: &[f64], child: &[f64]) -> bool {
        if self.outward {
            !g.world.edge_collides_from_free(parent, child, g.edge_step)
        } else {
            !g.world.edge_collides_from_free(child, parent, g.edge_step)
        }
    }

    /// Adds `q_new` (already known reachable from `near`) choosing the
    /// cheapest collision-free parent among nearby nodes, then rewires
    /// neighbors through it.
    fn insert(&mut self, g: &Growth<'_, '_>, q_new: &[f64], near: usize) -> usize {
        let k = g.neighbor_count(self.len(), q_new.len());
        let neighbors = self.index.k_nearest_within(q_new, k, g.rewire_radius);
        let mut parent = near;
        let mut cost = self.nodes[near].cost + distance(self.q(near), q_new);
        let mut ranked: Vec<(f64, usize)> = neighbors
            .iter()
            .filter(|&&n| n != near)
            .map(|&n| (self.nodes[n].cost + distance(self.q(n), q_new), n))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (c, n) in ranked {
            if c >= cost - 1e-12 {
                break;
            }
            if self.edge_free(g, self.q(n), q_new) {
                parent = n;
                cost = c;
                break;
            }
        }
        let id = self.index.insert(q_new);
        let root = self.nodes[parent].root;
        self.nodes.push(Node {
            parent: Some(parent),
            cost,
            root,
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);

        for n in neighbors {
            if n == parent {
                continue;
            }
            let through = cost + distance(self.q(n), q_new);
            if through < self.nodes[n].cost - 1e-12 && self.edge_free(g, q_new, self.q(n)) {
                self.reparent(n, id, through);
            }
        }
        id
    }

    fn reparent(&mut self, node: usize, new_parent: usize, new_cost: f64) {
        if let Some(old) = self.nodes[node].parent {
            self.nodes[old].children.retain(|&c| c != node);
        }
        self.nodes[node].parent = Some(new_parent);
        self.nodes[new_parent].children.push(node);
        let delta = new_cost - self.nodes[node].cost;
        let root = self.nodes[new_parent].root;
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            self.nodes[n].cost += delta;
            self.nodes[n].root = root;
            stack.extend_from_slice(&self.nodes[n].children);
        }
    }

    fn step_from(&mut self, g: &Growth<'_, '_>, from: usize, target: &[f64]) -> Extend {
        let q_from = self.q(from).to_vec();
        let d = distance(&q_from, target);
        if d == 0.0 {
            return Extend::Reached(from);
        }
        let reached = d <= g.extend_step;
        let q_new: Vec<f64> = if reached {
            target.to_vec()
        } else {
            let t = g.extend_step / d;
            q_from.iter().zip(target).map(|(a, b)| a + (b - a) * t).collect()
        };
        let mut reached = reached;
        let mut q_new = q_new;
        if !g.world.chain.within_limits(&q_new) || !self.edge_free(g, &q_from, &q_new) {
            // Keep the longest free prefix; narrow openings are rarely
            // crossed by a full step.
            match self.free_prefix(g, &q_from, &q_new) {
                Some(q) => q_new = q,
                None => return Extend::Trapped,
            }
            reached = false;
        }
        let id = self.insert(g, &q_new, from);
        if reached {
            Extend::Reached(id)
        } else {
            Extend::Advanced(id)
        }
    }

    /// Furthest point of `from → to`, walked at the edge resolution, whose
    /// prefix is free; `None` when shorter than two resolution steps.
    fn free_prefix(&self, g: &Growth<'_, '_>, from: &[f64], to: &[f64]) -> Option<Vec<f64>> {
        let n = crate::collision::segment_count(from, to, g.edge_step);
        let point = |i: usize| -> Vec<f64> {
            let t = i as f64 / n as f64;
            from.iter().zip(to).map(|(a, b)| a + (b - a) * t).collect()
        };
        let mut last = 0;
        for i in 1..n {
            let q = point(i);
            if !g.world.chain.within_limits(&q) || g.world.collides_unchecked(&q) {
                break;
            }
            last = i;
        }
        (last >= 2).then(|| point(last))
    }

    pub fn extend(&mut self, g: &Growth<'_, '_>, target: &[f64]) -> Extend {
        match self.index.nearest(target) {
            Some(near) => self.step_from(g, near, target),
            None => Extend::Trapped,
        }
    }

    /// Greedy extension toward `target` until reached or blocked.
    pub fn connect(&mut self, g: &Growth<'_, '_>, target: &[f64]) -> Extend {
        let mut status = self.extend(g, target);
        loop {
            match status {
                Extend::Advanced(id) => status = self.step_from(g, id, target),
                other => return other,
            }
        }
    }
}
