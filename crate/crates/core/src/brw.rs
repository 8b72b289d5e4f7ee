//! Branching random walks on the regular tree.
//!
//! The dominating walk spawns one offspring on a move toward the root and
//! two on a move away, so it stochastically covers the one-sleeper-per-site
//! frog model. Particles carry the weight `exp(-theta * distance)`, whose
//! population total is a supermartingale with one-step factor m(theta).

use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analytic::{brw_constants, Kahan};
use crate::streams::StreamKeys;
use crate::tree::{Step, TreeParams, Vertex};

#[derive(Debug, Error, PartialEq)]
pub enum BrwError {
    #[error("population cap {0} exceeded")]
    PopulationCap(usize),
    #[error("visited-count bound needs d >= 6 (subcritical weight), got {0}")]
    NeedsDSix(u32),
    #[error("offspring rule has displacement {0}, only nearest-neighbor rules project")]
    NotNearestNeighbor(i64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrwParticle {
    pub vertex: Vertex,
    /// exp(-theta * distance), recomputable from the position.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrwPopulation {
    pub particles: Vec<BrwParticle>,
    pub generation: u32,
    pub total_weight: f64,
}

pub fn particle_weight(theta: f64, distance: u64) -> f64 {
    (-theta * distance as f64).exp()
}

impl BrwPopulation {
    /// One particle at the root, weight 1.
    pub fn single_at_root() -> Self {
        BrwPopulation {
            particles: vec![BrwParticle { vertex: Vertex::root(), weight: 1.0 }],
            generation: 0,
            total_weight: 1.0,
        }
    }

    /// One particle at an arbitrary start, for off-root ratio experiments.
    pub fn single_at(vertex: Vertex, theta: f64) -> Self {
        let weight = particle_weight(theta, vertex.distance());
        BrwPopulation {
            particles: vec![BrwParticle { vertex, weight }],
            generation: 0,
            total_weight: weight,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Re-derives the weight total from positions, for invariant checks.
    pub fn recompute_weight(&self, theta: f64) -> f64 {
        let mut acc = Kahan::default();
        for p in &self.particles {
            acc.add(particle_weight(theta, p.vertex.distance()));
        }
        acc.value()
    }
}

/// One synchronous generation of the dominating walk: every particle picks
/// a uniform neighbor, spawns one offspring there if that neighbor is
/// closer to the root and two otherwise, and dies.
pub fn step_dominating_brw(
    pop: &BrwPopulation,
    params: &TreeParams,
    theta: f64,
    rng: &mut ChaCha8Rng,
    max_particles: usize,
) -> Result<BrwPopulation, BrwError> {
    let mut next = Vec::with_capacity(pop.particles.len() * 2);
    let mut weight = Kahan::default();
    for p in &pop.particles {
        let pick = rng.random_range(0..=params.d);
        let step = if pick == 0 { Step::Parent } else { Step::Child(pick as u8) };
        let from_dist = p.vertex.distance();
        let mut dest = p.vertex.clone();
        dest.apply_step(step, params);
        let toward_root = dest.distance() < from_dist;
        let w = particle_weight(theta, dest.distance());
        let copies = if toward_root { 1 } else { 2 };
        for _ in 0..copies {
            weight.add(w);
            next.push(BrwParticle { vertex: dest.clone(), weight: w });
        }
        if next.len() > max_particles {
            return Err(BrwError::PopulationCap(max_particles));
        }
    }
    Ok(BrwPopulation {
        particles: next,
        generation: pop.generation + 1,
        total_weight: weight.value(),
    })
}

/// Monte Carlo check of the visited-count bound: distinct distance-k
/// vertices ever visited within a horizon, against the closed-form bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisitedCountCheck {
    pub empirical_mean: f64,
    pub bound: f64,
    /// Replicas cut by the population cap before the horizon; their counts
    /// are censored (undercounting only).
    pub censored: u64,
}

pub fn visited_count_bound_check(
    d: u32,
    k: u64,
    n_replicas: u64,
    horizon: u32,
    max_particles: usize,
    seed: u64,
) -> Result<VisitedCountCheck, BrwError> {
    let consts = brw_constants(d, None);
    if !consts.subcritical {
        return Err(BrwError::NeedsDSix(d));
    }
    let params = TreeParams::regular(d).expect("d validated");
    let bound = (1.0 / (1.0 - consts.m_star))
        * (4.0 * d as f64 / (d as f64 + 1.0)).powi(k as i32);
    let mut total = 0.0;
    let mut censored = 0u64;
    for replica in 0..n_replicas {
        let keys = StreamKeys::new(seed, replica);
        let mut rng = keys.generic_rng(0);
        let mut pop = BrwPopulation::single_at_root();
        let mut seen: HashSet<Vertex> = HashSet::new();
        if k == 0 {
            seen.insert(Vertex::root());
        }
        for _ in 0..horizon {
            match step_dominating_brw(&pop, &params, consts.theta_star, &mut rng, max_particles) {
                Ok(next) => pop = next,
                Err(BrwError::PopulationCap(_)) => {
                    censored += 1;
                    break;
                }
                Err(e) => return Err(e),
            }
            for p in &pop.particles {
                if p.vertex.distance() == k {
                    seen.insert(p.vertex.clone());
                }
            }
        }
        total += seen.len() as f64;
    }
    Ok(VisitedCountCheck {
        empirical_mean: total / n_replicas as f64,
        bound,
        censored,
    })
}

/// The dominating walk's expected offspring count per neighbor class:
/// (-1, count on the one parent-ward neighbor), (+1, count on each of the
/// d away neighbors).
pub fn dominating_offspring_rule(d: u32) -> Vec<(i64, f64)> {
    let df = d as f64;
    vec![(-1, 1.0 / (df + 1.0)), (1, 2.0 / (df + 1.0))]
}

/// A plain walk as a trivial branching rule: one offspring on a uniform
/// neighbor.
pub fn plain_walk_rule(d: u32) -> Vec<(i64, f64)> {
    let df = d as f64;
    vec![(-1, 1.0 / (df + 1.0)), (1, 1.0 / (df + 1.0))]
}

/// Projects a root-invariant nearest-neighbor offspring rule to expected
/// displacement counts on the integers: the single parent-ward neighbor
/// keeps its count, the d away neighbors pool theirs.
pub fn project_to_z(rule: &[(i64, f64)], d: u32) -> Result<Vec<(i64, f64)>, BrwError> {
    let mut down = 0.0;
    let mut up = 0.0;
    for &(offset, count) in rule {
        match offset {
            -1 => down += count,
            1 => up += count * d as f64,
            other => return Err(BrwError::NotNearestNeighbor(other)),
        }
    }
    Ok(vec![(-1, down), (1, up)])
}
