//! The block recursion: generation 0 is the origin, and generation n+1 is
//! the set of sites outside all earlier generations that the particles of
//! generation n ever visit.
//!
//! Per-site counts and per-particle walk streams are keyed by the site
//! address, so the recursion consumes the same randomness as the direct
//! activation run and their visited sets coincide exactly on matching
//! truncation — the coverage invariant the tests exercise.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::analytic::{
    brw_beta, brw_c_hit, build_infinite_mean_mixture, certify_two_point, certify_two_type,
    island_alpha, AnalyticError, Certificate,
};
use crate::laws::ParticleLaw;
use crate::sim::{plain_block_step, two_type_block_step, SimConfig, SimError, VisitSet};
use crate::tree::Vertex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockVariant {
    /// Every particle of a block site launches.
    Plain,
    /// Only the inner-law particles launch; the guaranteed particle walks
    /// during the step that discovers its site.
    TwoType,
}

/// The materialized recursion: `blocks[n]` is generation n, `weights[n]`
/// its lambda-weight.
#[derive(Debug, Clone)]
pub struct BlockSequence {
    pub blocks: Vec<VisitSet>,
    pub weights: Vec<f64>,
    /// Analytic expected-weight factor for the run's law, when one applies.
    pub alpha_ref: Option<f64>,
    pub truncated: bool,
}

impl BlockSequence {
    /// Union of all generations.
    pub fn union(&self) -> HashSet<Vertex> {
        let mut out = HashSet::new();
        for b in &self.blocks {
            out.extend(b.vertices.iter().cloned());
        }
        out
    }

    /// Total certified truncation bias across generations.
    pub fn bias_total(&self) -> f64 {
        self.blocks.iter().map(|b| b.bias_bound).sum()
    }
}

/// Analytic alpha matched to the configured law: the island bound for a
/// two-point law, its cascade-exponent variant for a plus-one two-point
/// law. None when no closed-form reference applies.
pub fn alpha_reference(cfg: &SimConfig, variant: BlockVariant) -> Option<f64> {
    match (variant, &cfg.law) {
        (BlockVariant::Plain, ParticleLaw::TwoPoint(tp)) => {
            island_alpha(cfg.tree.d, tp.mu, tp.n, cfg.lambda, 1.0, 1.0).ok()
        }
        (BlockVariant::TwoType, ParticleLaw::PlusOne { inner }) => {
            if let ParticleLaw::TwoPoint(tp) = inner.as_ref() {
                let beta = brw_beta(cfg.tree.d);
                let c_hit = brw_c_hit(cfg.tree.d).ok()?;
                island_alpha(cfg.tree.d, tp.mu, tp.n, cfg.lambda, beta, c_hit).ok()
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Runs the recursion for `n_max` generations (stopping early on an empty
/// one), with exclusion of all earlier generations enforced.
pub fn run_blocks(
    cfg: &SimConfig,
    n_max: u32,
    variant: BlockVariant,
    replica: u64,
) -> Result<BlockSequence, SimError> {
    cfg.validate()?;
    let root = Vertex::root();
    let mut blocks = vec![VisitSet {
        vertices: HashSet::from([root.clone()]),
        weight: 1.0,
        bias_bound: 0.0,
        truncated: false,
    }];
    let mut excluded: HashSet<Vertex> = HashSet::from([root]);
    let mut truncated = false;
    for n in 1..=n_max {
        let previous: Vec<Vertex> = blocks[n as usize - 1].vertices.iter().cloned().collect();
        let step = match variant {
            BlockVariant::Plain => plain_block_step(cfg, &previous, &excluded, replica)?,
            BlockVariant::TwoType => two_type_block_step(cfg, &previous, &excluded, replica)?,
        };
        truncated |= step.truncated;
        excluded.extend(step.vertices.iter().cloned());
        let empty = step.vertices.is_empty();
        blocks.push(step);
        if empty {
            break;
        }
    }
    let weights = blocks.iter().map(|b| b.weight).collect();
    Ok(BlockSequence {
        blocks,
        weights,
        alpha_ref: alpha_reference(cfg, variant),
        truncated,
    })
}

/// Inputs accepted by the certificate dispatcher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum CertifyRequest {
    TwoPoint { d: u32, mu: f64 },
    InfiniteMean { d: u32, mu_per_component: f64, n_max: u32 },
    TwoType { d: u32, mu: f64 },
}

/// Emits the certificate for a request; a negative verdict (no alpha < 1
/// attainable) is a successful result carrying a reason, not an error.
pub fn certify(request: &CertifyRequest) -> Result<Certificate, AnalyticError> {
    match *request {
        CertifyRequest::TwoPoint { d, mu } => certify_two_point(d, mu),
        CertifyRequest::InfiniteMean { d, mu_per_component, n_max } => {
            let (_, cert) = build_infinite_mean_mixture(
                d,
                1.0 / (d as f64).sqrt(),
                mu_per_component,
                n_max,
            )?;
            Ok(cert)
        }
        CertifyRequest::TwoType { d, mu } => certify_two_type(d, mu),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::Method;
    use crate::sim::{frog_model, RootConvention};
    use crate::tree::TreeParams;

    fn cfg_with(d: u32, law: ParticleLaw, root: RootConvention) -> SimConfig {
        SimConfig {
            tree: TreeParams::regular(d).unwrap(),
            law,
            lambda: 1.0 / (d as f64).sqrt(),
            r_record: 8,
            r_kill: 16,
            t_max: 200,
            seed: 0x0ddba11,
            replicas: 1,
            max_active: 200_000,
            root,
        }
    }

    #[test]
    fn zero_law_blocks_shape() {
        // With nothing to wake, generation 1 is the lone designated
        // walker's trace and generation 2 is empty.
        let cfg = cfg_with(2, ParticleLaw::deterministic(0), RootConvention::DesignatedActive);
        let seq = run_blocks(&cfg, 5, BlockVariant::Plain, 0).unwrap();
        assert_eq!(seq.weights[0], 1.0);
        assert!(!seq.blocks[1].vertices.is_empty());
        assert!(seq.blocks[2].vertices.is_empty());
        assert_eq!(seq.blocks.len(), 3);
    }

    #[test]
    fn blocks_are_pairwise_disjoint() {
        let law = ParticleLaw::two_point(4, 2.0).unwrap();
        for variant in [BlockVariant::Plain] {
            for replica in 0..15 {
                let cfg = cfg_with(2, law.clone(), RootConvention::DesignatedActive);
                let seq = run_blocks(&cfg, 6, variant, replica).unwrap();
                for i in 0..seq.blocks.len() {
                    for j in i + 1..seq.blocks.len() {
                        assert!(
                            seq.blocks[i].vertices.is_disjoint(&seq.blocks[j].vertices),
                            "replica {replica}: blocks {i} and {j} overlap"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn weights_match_block_sets() {
        let law = ParticleLaw::two_point(4, 2.0).unwrap();
        let cfg = cfg_with(2, law, RootConvention::LawOnly);
        let seq = run_blocks(&cfg, 5, BlockVariant::Plain, 3).unwrap();
        for (b, &w) in seq.blocks.iter().zip(&seq.weights) {
            assert!((b.recompute_weight(cfg.lambda) - w).abs() < 1e-9);
        }
    }

    /// The same-randomness coverage equivalence, plain variant: the union
    /// of all generations equals the direct activation run's visited set.
    #[test]
    fn coverage_matches_direct_frog_run_plain() {
        let law = ParticleLaw::two_point(4, 2.0).unwrap();
        for replica in 0..25 {
            let cfg = cfg_with(2, law.clone(), RootConvention::DesignatedActive);
            let seq = run_blocks(&cfg, 64, BlockVariant::Plain, replica).unwrap();
            assert!(
                seq.blocks.last().unwrap().vertices.is_empty(),
                "recursion did not terminate within the cap"
            );
            assert!(!seq.truncated);
            let (_, visits) = frog_model(&cfg, replica).unwrap();
            assert!(!visits.truncated);
            assert_eq!(seq.union(), visits.vertices, "replica {replica}");
        }
    }

    /// Coverage equivalence for the two-type bookkeeping against the direct
    /// plus-one-law run.
    #[test]
    fn coverage_matches_direct_frog_run_two_type() {
        let law = ParticleLaw::plus_one(ParticleLaw::two_point(2, 0.5).unwrap()).unwrap();
        for replica in 0..15 {
            let mut cfg = cfg_with(6, law.clone(), RootConvention::LawOnly);
            cfg.r_record = 5;
            cfg.r_kill = 10;
            cfg.t_max = 80;
            let seq = run_blocks(&cfg, 64, BlockVariant::TwoType, replica).unwrap();
            assert!(seq.blocks.last().unwrap().vertices.is_empty());
            assert!(!seq.truncated);
            let (_, visits) = frog_model(&cfg, replica).unwrap();
            assert!(!visits.truncated);
            assert_eq!(seq.union(), visits.vertices, "replica {replica}");
        }
    }

    #[test]
    fn alpha_reference_selection() {
        let tp = cfg_with(2, ParticleLaw::two_point(8, 1.0).unwrap(), RootConvention::LawOnly);
        assert!(alpha_reference(&tp, BlockVariant::Plain).is_some());
        assert!(alpha_reference(&tp, BlockVariant::TwoType).is_none());
        let p1 = cfg_with(
            50,
            ParticleLaw::plus_one(ParticleLaw::two_point(50, 1.0).unwrap()).unwrap(),
            RootConvention::LawOnly,
        );
        assert!(alpha_reference(&p1, BlockVariant::TwoType).is_some());
        // beta(6) < 1/2: the cascade-exponent series diverges, no reference.
        let p1_shallow = cfg_with(
            6,
            ParticleLaw::plus_one(ParticleLaw::two_point(6, 1.0).unwrap()).unwrap(),
            RootConvention::LawOnly,
        );
        assert!(alpha_reference(&p1_shallow, BlockVariant::TwoType).is_none());
    }

    #[test]
    fn certify_dispatch() {
        let cert = certify(&CertifyRequest::TwoPoint { d: 2, mu: 10.0 }).unwrap();
        assert_eq!(cert.method, Method::TwoPoint);
        assert!(cert.transient_certified);
        let cert = certify(&CertifyRequest::TwoType { d: 13, mu: 10.0 }).unwrap();
        assert!(!cert.transient_certified);
        assert!(cert.reason.is_some());
        let cert = certify(&CertifyRequest::InfiniteMean {
            d: 2,
            mu_per_component: 1.0,
            n_max: 6,
        })
        .unwrap();
        assert_eq!(cert.n_n.as_ref().unwrap().len(), 6);
        assert!(cert.transient_certified);
    }
}
