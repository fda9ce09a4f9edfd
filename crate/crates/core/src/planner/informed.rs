//! Sampling from the union of prolate hyperspheroids
//! `{x : |x - start| + |x - g| ≤ c}` over every goal `g` that could still
//! improve a solution of cost `c`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::ik::GoalSet;
use crate::kinematics::{distance, Configuration, KinematicChain};

const MAX_REJECTIONS: usize = 1000;

struct Ellipsoid {
    goal: usize,
    center: Vec<f64>,
    /// Householder vector mapping e₁ onto the start→goal direction.
    reflect: Vec<f64>,
    major: f64,
    minor: f64,
}

/// Reusable sampler for a fixed start, goal list and cost bound.
pub struct InformedSampler<'a> {
    chain: &'a KinematicChain,
    start: &'a [f64],
    goals: Vec<&'a [f64]>,
    best_cost: f64,
    ellipsoids: Vec<Ellipsoid>,
    cumulative: Vec<f64>,
}

impl<'a> InformedSampler<'a> {
    pub fn new(chain: &'a KinematicChain, start: &'a [f64], goals: Vec<&'a [f64]>, best_cost: f64) -> Self {
        let mut sampler = InformedSampler {
            chain,
            start,
            goals,
            best_cost: f64::INFINITY,
            ellipsoids: Vec::new(),
            cumulative: Vec::new(),
        };
        sampler.set_cost(best_cost);
        sampler
    }

    pub fn best_cost(&self) -> f64 {
        self.best_cost
    }

    /// Rebuilds the admissible ellipsoids for a new cost bound.
    pub fn set_cost(&mut self, best_cost: f64) {
        self.best_cost = best_cost;
        self.ellipsoids.clear();
        self.cumulative.clear();
        if !best_cost.is_finite() {
            return;
        }
        let n = self.start.len();
        let mut log_volumes = Vec::new();
        for (gi, g) in self.goals.iter().enumerate() {
            let d = distance(self.start, g);
            if d > best_cost {
                continue;
            }
            let major = best_cost / 2.0;
            let minor = (best_cost * best_cost - d * d).max(0.0).sqrt() / 2.0;
            let center: Vec<f64> = self.start.iter().zip(g.iter()).map(|(s, g)| 0.5 * (s + g)).collect();
            let mut reflect = vec![0.0; n];
            if d > 0.0 {
                for (i, r) in reflect.iter_mut().enumerate() {
                    *r = (g[i] - self.start[i]) / d;
                }
            } else {
                reflect[0] = 1.0;
            }
            // v = e₁ - u; reflecting by v maps e₁ to u.
            reflect[0] -= 1.0;
            for r in reflect.iter_mut() {
                *r = -*r;
            }
            log_volumes.push(major.ln() + (n as f64 - 1.0) * minor.ln());
            self.ellipsoids.push(Ellipsoid {
                goal: gi,
                center,
                reflect,
                major,
                minor,
            });
        }
        let top = log_volumes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut acc = 0.0;
        for lv in log_volumes {
            acc += if top.is_finite() { (lv - top).exp() } else { 1.0 };
            self.cumulative.push(acc);
        }
    }

    /// Number of goals that can still improve the current bound.
    pub fn admissible(&self) -> usize {
        self.ellipsoids.len()
    }

    pub fn admissible_goals(&self) -> impl Iterator<Item = usize> + '_ {
        self.ellipsoids.iter().map(|e| e.goal)
    }

    fn inside(&self, x: &[f64], goal: &[f64]) -> bool {
        distance(x, self.start) + distance(x, goal) <= self.best_cost
    }

    fn covering(&self, x: &[f64]) -> usize {
        self.ellipsoids
            .iter()
            .filter(|e| self.inside(x, self.goals[e.goal]))
            .count()
    }

    fn sample_in<R: Rng + ?Sized>(&self, e: &Ellipsoid, rng: &mut R) -> Vec<f64> {
        let n = self.start.len();
        let mut z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let radius = rng.random::<f64>().powf(1.0 / n as f64);
        let scale = if norm > 0.0 { radius / norm } else { 0.0 };
        for (i, v) in z.iter_mut().enumerate() {
            *v *= scale * if i == 0 { e.major } else { e.minor };
        }
        let vv: f64 = e.reflect.iter().map(|v| v * v).sum();
        if vv > 0.0 {
            let dot: f64 = e.reflect.iter().zip(&z).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vv;
            for (v, r) in z.iter_mut().zip(&e.reflect) {
                *v -= f * r;
            }
        }
        z.iter().zip(&e.center).map(|(v, c)| v + c).collect()
    }

    fn on_segment<R: Rng + ?Sized>(&self, goal: &[f64], rng: &mut R) -> Vec<f64> {
        let t: f64 = rng.random();
        self.start.iter().zip(goal).map(|(s, g)| s + (g - s) * t).collect()
    }

    /// A configuration inside the admissible union and inside the joint
    /// limits, or a uniform in-limits sample when nothing is admissible.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        let Some(&total) = self.cumulative.last() else {
            return self.chain.sample_uniform(rng);
        };
        let mut last_goal = 0;
        for _ in 0..MAX_REJECTIONS {
            let pick = rng.random::<f64>() * total;
            let idx = self
                .cumulative
                .partition_point(|&c| c <= pick)
                .min(self.ellipsoids.len() - 1);
            let e = &self.ellipsoids[idx];
            last_goal = e.goal;
            let x = self.sample_in(e, rng);
            let cover = self.covering(&x);
            if cover == 0 {
                // rounding at the boundary
                continue;
            }
            if cover > 1 && rng.random::<f64>() * cover as f64 >= 1.0 {
                continue;
            }
            if self.chain.within_limits(&x) {
                return Configuration(x);
            }
        }
        // The admissible region barely overlaps the limits; the start→goal
        // segment is always inside both.
        Configuration(self.on_segment(self.goals[last_goal], rng))
    }
}

/// One informed sample for `goals` under cost bound `best_cost`.
pub fn informed_sample<R: Rng + ?Sized>(
    chain: &KinematicChain,
    start: &[f64],
    goals: &GoalSet,
    best_cost: f64,
    rng: &mut R,
) -> Configuration {
    let goal_refs = goals.configs.iter().map(|c| c.as_slice()).collect();
    InformedSampler::new(chain, start, goal_refs, best_cost).sample(rng)
}
