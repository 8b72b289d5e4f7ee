//! Implicit addressing of the infinite (d+1)-regular tree and the rooted
//! d-ary tree.
//!
//! Vertices are never stored globally: an address is a pair (up-steps,
//! descent word) in a canonical form that makes the level and the distance
//! to the root O(1) reads, and that reproduces the per-(level, distance)
//! vertex counts of [`phi`] exactly.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest vertex count `enumerate_ball` will materialize.
pub const MAX_BALL_VERTICES: u64 = 10_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("branching parameter d must be in 2..=255, got {0}")]
    BadDegree(u32),
    #[error("vertex is not in canonical form for the given tree")]
    NotCanonical,
    #[error("ball of radius {radius} holds ~{estimate} vertices, above the cap {cap}")]
    BallTooLarge { radius: u32, estimate: u64, cap: u64 },
}

/// Which tree a walk lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeMode {
    /// The (d+1)-regular tree: one parent-direction neighbor and d children
    /// at every vertex, root included.
    Regular,
    /// The rooted d-ary tree: descendants of the root only, so the root has
    /// d neighbors and level coincides with distance.
    Dary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeParams {
    pub d: u32,
    pub mode: TreeMode,
}

impl TreeParams {
    pub fn new(d: u32, mode: TreeMode) -> Result<Self, TreeError> {
        if !(2..=255).contains(&d) {
            return Err(TreeError::BadDegree(d));
        }
        Ok(TreeParams { d, mode })
    }

    pub fn regular(d: u32) -> Result<Self, TreeError> {
        Self::new(d, TreeMode::Regular)
    }

    pub fn dary(d: u32) -> Result<Self, TreeError> {
        Self::new(d, TreeMode::Dary)
    }
}

/// One move along an edge, used by walkers that step addresses in place.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    /// Toward the level-decreasing neighbor (the parent direction).
    Parent,
    /// Toward child `1..=d`.
    Child(u8),
}

/// Canonical address of a vertex.
///
/// `up` counts steps from the root toward the distinguished end (the spine);
/// `word` is the descent from the spine vertex reached that way. Child 1 of
/// a spine vertex is the next spine vertex toward the root, so a canonical
/// word never starts with letter 1 while `up > 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex {
    up: u32,
    word: Vec<u8>,
}

impl Vertex {
    /// The designated root vertex.
    pub fn root() -> Self {
        Vertex { up: 0, word: Vec::new() }
    }

    /// Builds an address, rejecting non-canonical input.
    pub fn new(up: u32, word: Vec<u8>, params: &TreeParams) -> Result<Self, TreeError> {
        let v = Vertex { up, word };
        if v.is_canonical(params) {
            Ok(v)
        } else {
            Err(TreeError::NotCanonical)
        }
    }

    pub fn up(&self) -> u32 {
        self.up
    }

    pub fn word(&self) -> &[u8] {
        &self.word
    }

    /// Level: descent length minus up-steps. Decreases toward the spine.
    pub fn level(&self) -> i64 {
        self.word.len() as i64 - self.up as i64
    }

    /// Graph distance to the root.
    pub fn distance(&self) -> u64 {
        self.up as u64 + self.word.len() as u64
    }

    pub fn is_root(&self) -> bool {
        self.up == 0 && self.word.is_empty()
    }

    pub fn is_canonical(&self, params: &TreeParams) -> bool {
        if self.word.iter().any(|&c| c == 0 || c as u32 > params.d) {
            return false;
        }
        if self.up > 0 && self.word.first() == Some(&1) {
            return false;
        }
        // The d-ary tree is the root's descendant subtree.
        if params.mode == TreeMode::Dary && self.up > 0 {
            return false;
        }
        true
    }

    /// Number of neighbors under `params`.
    pub fn degree(&self, params: &TreeParams) -> u32 {
        if params.mode == TreeMode::Dary && self.is_root() {
            params.d
        } else {
            params.d + 1
        }
    }

    /// Applies one edge move in place. Returns false (and leaves the vertex
    /// unchanged) only for `Step::Parent` at the d-ary root, which has no
    /// parent.
    pub fn apply_step(&mut self, step: Step, params: &TreeParams) -> bool {
        match step {
            Step::Parent => {
                if self.word.pop().is_none() {
                    if params.mode == TreeMode::Dary {
                        return false;
                    }
                    self.up += 1;
                }
                true
            }
            Step::Child(c) => {
                debug_assert!(c >= 1 && c as u32 <= params.d);
                if self.word.is_empty() && self.up > 0 && c == 1 {
                    self.up -= 1;
                } else {
                    self.word.push(c);
                }
                true
            }
        }
    }

    /// All neighbors in a fixed order: the level-decreasing one first (absent
    /// at the d-ary root), then children 1..=d.
    pub fn neighbors(&self, params: &TreeParams) -> Result<Vec<Vertex>, TreeError> {
        if !self.is_canonical(params) {
            return Err(TreeError::NotCanonical);
        }
        let mut out = Vec::with_capacity(params.d as usize + 1);
        if !(params.mode == TreeMode::Dary && self.is_root()) {
            let mut p = self.clone();
            p.apply_step(Step::Parent, params);
            out.push(p);
        }
        for c in 1..=params.d as u8 {
            let mut ch = self.clone();
            ch.apply_step(Step::Child(c), params);
            out.push(ch);
        }
        Ok(out)
    }
}

/// Number of vertices of the (d+1)-regular tree at level `j` and distance
/// `k` from the root.
///
/// Zero when `k < |j|` or `k - |j|` is odd. Values are exact; panics if the
/// count overflows u64 (the enumeration oracle only probes small cells).
pub fn phi(j: i64, k: u64, d: u32) -> u64 {
    let abs_j = j.unsigned_abs();
    if k < abs_j || (k - abs_j) % 2 != 0 {
        return 0;
    }
    let i = (k - abs_j) / 2;
    let d = d as u64;
    let pow = |e: u64| -> u64 {
        d.checked_pow(u32::try_from(e).expect("phi exponent out of range"))
            .expect("phi count overflows u64")
    };
    if j >= 1 {
        if i == 0 {
            pow(abs_j)
        } else {
            (d - 1).checked_mul(pow(abs_j + i - 1)).expect("phi count overflows u64")
        }
    } else if i == 0 {
        1
    } else {
        (d - 1).checked_mul(pow(i - 1)).expect("phi count overflows u64")
    }
}

/// `phi` evaluated in floating point, for bound summation at exponents where
/// the exact count would overflow.
pub fn phi_f64(j: i64, k: u64, d: u32) -> f64 {
    let abs_j = j.unsigned_abs();
    if k < abs_j || (k - abs_j) % 2 != 0 {
        return 0.0;
    }
    let i = (k - abs_j) / 2;
    let d = d as f64;
    if j >= 1 {
        if i == 0 {
            d.powi(abs_j as i32)
        } else {
            (d - 1.0) * d.powi((abs_j + i - 1) as i32)
        }
    } else if i == 0 {
        1.0
    } else {
        (d - 1.0) * d.powi((i - 1) as i32)
    }
}

/// Closed-form vertex count of the radius-`radius` ball, saturating.
pub fn ball_size(radius: u32, params: &TreeParams) -> u64 {
    let d = params.d as u64;
    let mut total: u64 = 1;
    let mut shell: u64 = match params.mode {
        TreeMode::Regular => d + 1,
        TreeMode::Dary => d,
    };
    for _ in 0..radius {
        total = total.saturating_add(shell);
        shell = shell.saturating_mul(d);
    }
    total
}

/// Every canonical vertex within distance `radius` of the root, by
/// breadth-first expansion. The brute-force oracle behind `phi` and the
/// bound summations.
pub fn enumerate_ball(radius: u32, params: &TreeParams) -> Result<Vec<Vertex>, TreeError> {
    let estimate = ball_size(radius, params);
    if estimate > MAX_BALL_VERTICES {
        return Err(TreeError::BallTooLarge {
            radius,
            estimate,
            cap: MAX_BALL_VERTICES,
        });
    }
    let mut out = Vec::with_capacity(estimate as usize);
    let mut queue = VecDeque::new();
    queue.push_back(Vertex::root());
    out.push(Vertex::root());
    // Canonical addresses are unique, so "new vertex" is just "longer
    // distance than the dequeued one"; no visited set needed on a tree.
    while let Some(v) = queue.pop_front() {
        if v.distance() as u32 >= radius {
            continue;
        }
        for n in v.neighbors(params).expect("BFS vertices are canonical") {
            if n.distance() > v.distance() {
                out.push(n.clone());
                queue.push_back(n);
            }
        }
    }
    Ok(out)
}
