//! Per-site sleeping-particle count laws.
//!
//! The workhorse is the two-point law placing `n` particles with probability
//! `mu / n` (mean `mu`, increasingly clumped as `n` grows). The remaining
//! variants are the plus-one shift, arbitrary finite pmfs, and the truncated
//! sum of two-point laws whose untruncated version has infinite mean.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const PMF_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum LawError {
    #[error("two-point law needs 0 < mu <= n, got n={n} mu={mu}")]
    BadTwoPoint { n: u64, mu: f64 },
    #[error("finite pmf must be nonempty with distinct counts")]
    BadPmfSupport,
    #[error("finite pmf probabilities must be nonnegative and sum to 1 (sum {0})")]
    BadPmfMass(f64),
    #[error("mixture remainder bound must be finite and nonnegative")]
    BadRemainder,
    #[error("law draws could exceed the integer range")]
    DrawOverflow,
}

/// Parameters of one two-point component: `n` with probability `mu / n`,
/// zero otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoPointParams {
    pub n: u64,
    pub mu: f64,
}

/// A sleeping-particle count distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParticleLaw {
    TwoPoint(TwoPointParams),
    PlusOne { inner: Box<ParticleLaw> },
    FinitePmf { pmf: Vec<(u64, f64)> },
    Mixture {
        components: Vec<TwoPointParams>,
        /// Certified bound on the expected visited-set weight neglected by
        /// truncating the infinite component sum.
        remainder_bound: f64,
    },
}

impl ParticleLaw {
    pub fn two_point(n: u64, mu: f64) -> Result<Self, LawError> {
        let law = ParticleLaw::TwoPoint(TwoPointParams { n, mu });
        law.validate()?;
        Ok(law)
    }

    pub fn plus_one(inner: ParticleLaw) -> Result<Self, LawError> {
        let law = ParticleLaw::PlusOne { inner: Box::new(inner) };
        law.validate()?;
        Ok(law)
    }

    /// A deterministic count: the single-atom pmf.
    pub fn deterministic(count: u64) -> Self {
        ParticleLaw::FinitePmf { pmf: vec![(count, 1.0)] }
    }

    pub fn finite_pmf(pmf: Vec<(u64, f64)>) -> Result<Self, LawError> {
        let law = ParticleLaw::FinitePmf { pmf };
        law.validate()?;
        Ok(law)
    }

    /// Poisson(mean) conditioned on `0..=cutoff`, as a dense finite pmf.
    pub fn poisson_truncated(mean: f64, cutoff: u64) -> Result<Self, LawError> {
        assert!(mean > 0.0 && mean.is_finite());
        let mut pmf = Vec::with_capacity(cutoff as usize + 1);
        let mut p = (-mean).exp();
        let mut mass = 0.0;
        for k in 0..=cutoff {
            if k > 0 {
                p *= mean / k as f64;
            }
            pmf.push((k, p));
            mass += p;
        }
        for entry in &mut pmf {
            entry.1 /= mass;
        }
        Self::finite_pmf(pmf)
    }

    pub fn mixture(components: Vec<TwoPointParams>, remainder_bound: f64) -> Result<Self, LawError> {
        let law = ParticleLaw::Mixture { components, remainder_bound };
        law.validate()?;
        Ok(law)
    }

    /// Checks the construction invariants; deserialized laws must pass
    /// through here before use.
    pub fn validate(&self) -> Result<(), LawError> {
        match self {
            ParticleLaw::TwoPoint(tp) => {
                if !(tp.mu > 0.0 && tp.mu.is_finite() && tp.n >= 1 && tp.mu <= tp.n as f64) {
                    return Err(LawError::BadTwoPoint { n: tp.n, mu: tp.mu });
                }
            }
            ParticleLaw::PlusOne { inner } => {
                inner.validate()?;
                if inner.max_draw().checked_add(1).is_none() {
                    return Err(LawError::DrawOverflow);
                }
            }
            ParticleLaw::FinitePmf { pmf } => {
                if pmf.is_empty() {
                    return Err(LawError::BadPmfSupport);
                }
                let mut counts: Vec<u64> = pmf.iter().map(|&(c, _)| c).collect();
                counts.sort_unstable();
                counts.dedup();
                if counts.len() != pmf.len() {
                    return Err(LawError::BadPmfSupport);
                }
                if pmf.iter().any(|&(_, p)| !(p >= 0.0) || !p.is_finite()) {
                    return Err(LawError::BadPmfMass(f64::NAN));
                }
                let mass: f64 = pmf.iter().map(|&(_, p)| p).sum();
                if (mass - 1.0).abs() > PMF_SUM_TOL {
                    return Err(LawError::BadPmfMass(mass));
                }
            }
            ParticleLaw::Mixture { components, remainder_bound } => {
                if !(remainder_bound.is_finite() && *remainder_bound >= 0.0) {
                    return Err(LawError::BadRemainder);
                }
                let mut max: u64 = 0;
                for tp in components {
                    ParticleLaw::TwoPoint(*tp).validate()?;
                    max = max.checked_add(tp.n).ok_or(LawError::DrawOverflow)?;
                }
            }
        }
        Ok(())
    }

    /// Largest value a draw can take.
    pub fn max_draw(&self) -> u64 {
        match self {
            ParticleLaw::TwoPoint(tp) => tp.n,
            ParticleLaw::PlusOne { inner } => inner.max_draw().saturating_add(1),
            ParticleLaw::FinitePmf { pmf } => pmf.iter().map(|&(c, _)| c).max().unwrap_or(0),
            ParticleLaw::Mixture { components, .. } => {
                components.iter().fold(0u64, |acc, tp| acc.saturating_add(tp.n))
            }
        }
    }

    /// One draw. Mixtures draw every component independently and sum.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            ParticleLaw::TwoPoint(tp) => {
                if rng.random::<f64>() < tp.mu / tp.n as f64 {
                    tp.n
                } else {
                    0
                }
            }
            ParticleLaw::PlusOne { inner } => inner.sample(rng) + 1,
            ParticleLaw::FinitePmf { pmf } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(count, p) in pmf {
                    acc += p;
                    if u < acc {
                        return count;
                    }
                }
                pmf.last().expect("pmf validated nonempty").0
            }
            ParticleLaw::Mixture { components, .. } => components
                .iter()
                .map(|tp| {
                    if rng.random::<f64>() < tp.mu / tp.n as f64 {
                        tp.n
                    } else {
                        0
                    }
                })
                .sum(),
        }
    }

    /// Exact expectation of the law as constructed (a mixture reports its
    /// truncated mean; see [`ParticleLaw::untruncated_mean_infinite`]).
    pub fn mean(&self) -> f64 {
        match self {
            ParticleLaw::TwoPoint(tp) => tp.mu,
            ParticleLaw::PlusOne { inner } => inner.mean() + 1.0,
            ParticleLaw::FinitePmf { pmf } => {
                pmf.iter().map(|&(c, p)| c as f64 * p).sum()
            }
            ParticleLaw::Mixture { components, .. } => {
                components.iter().map(|tp| tp.mu).sum()
            }
        }
    }

    /// True when the law stands in for a construction whose untruncated
    /// mean is infinite.
    pub fn untruncated_mean_infinite(&self) -> bool {
        match self {
            ParticleLaw::Mixture { .. } => true,
            ParticleLaw::PlusOne { inner } => inner.untruncated_mean_infinite(),
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn two_point_frequency_within_three_sigma() {
        let law = ParticleLaw::two_point(4, 1.0).unwrap();
        let mut r = rng(7);
        let n = 100_000u64;
        let hits = (0..n).filter(|_| law.sample(&mut r) == 4).count() as f64;
        let p_hat = hits / n as f64;
        let sigma = (0.25 * 0.75 / n as f64).sqrt();
        assert!((p_hat - 0.25).abs() <= 3.0 * sigma, "p_hat={p_hat}");
    }

    #[test]
    fn plus_one_draws_are_positive() {
        let law = ParticleLaw::plus_one(ParticleLaw::two_point(8, 2.0).unwrap()).unwrap();
        let mut r = rng(1);
        assert!((0..1000).all(|_| law.sample(&mut r) >= 1));
    }

    #[test]
    fn mixture_support_is_component_sums() {
        let law = ParticleLaw::mixture(
            vec![TwoPointParams { n: 4, mu: 1.0 }, TwoPointParams { n: 16, mu: 1.0 }],
            0.0,
        )
        .unwrap();
        let expect: HashSet<u64> = [0, 4, 16, 20].into_iter().collect();
        let mut r = rng(3);
        for _ in 0..2000 {
            assert!(expect.contains(&law.sample(&mut r)));
        }
        assert_eq!(law.max_draw(), 20);
    }

    #[test]
    fn means_are_exact() {
        let tp = ParticleLaw::two_point(1024, 5.0).unwrap();
        assert_eq!(tp.mean(), 5.0);
        let shifted = ParticleLaw::plus_one(tp.clone()).unwrap();
        assert_eq!(shifted.mean(), 6.0);
        let mix = ParticleLaw::mixture(
            vec![TwoPointParams { n: 2, mu: 1.0 }; 3],
            0.25,
        )
        .unwrap();
        assert_eq!(mix.mean(), 3.0);
        assert!(mix.untruncated_mean_infinite());
        assert!(!tp.untruncated_mean_infinite());
    }

    #[test]
    fn empirical_mean_and_variance_of_two_point() {
        // Var = mu*n - mu^2 for the two-point law.
        let (n, mu) = (64u64, 3.0);
        let law = ParticleLaw::two_point(n, mu).unwrap();
        let reps = 1_000_000u64;
        let mut r = rng(11);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..reps {
            let x = law.sample(&mut r) as f64;
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / reps as f64;
        let var = sum_sq / reps as f64 - mean * mean;
        let true_var = mu * n as f64 - mu * mu;
        let se_mean = (true_var / reps as f64).sqrt();
        assert!((mean - mu).abs() <= 4.0 * se_mean, "mean={mean}");
        assert!((var - true_var).abs() / true_var < 0.05, "var={var}");
    }

    #[test]
    fn construction_guards() {
        assert!(ParticleLaw::two_point(4, 5.0).is_err());
        assert!(ParticleLaw::two_point(4, 0.0).is_err());
        assert!(ParticleLaw::finite_pmf(vec![]).is_err());
        assert!(ParticleLaw::finite_pmf(vec![(0, 0.5), (0, 0.5)]).is_err());
        assert!(ParticleLaw::finite_pmf(vec![(0, 0.4), (1, 0.55)]).is_err());
        assert!(ParticleLaw::mixture(
            vec![TwoPointParams { n: u64::MAX, mu: 1.0 }, TwoPointParams { n: 1, mu: 1.0 }],
            0.0
        )
        .is_err());
        let max_draw = ParticleLaw::deterministic(u64::MAX);
        assert!(ParticleLaw::plus_one(max_draw).is_err());
    }

    #[test]
    fn law_json_round_trip() {
        let law = ParticleLaw::plus_one(ParticleLaw::two_point(16, 2.0).unwrap()).unwrap();
        let json = serde_json::to_string(&law).unwrap();
        let back: ParticleLaw = serde_json::from_str(&json).unwrap();
        back.validate().unwrap();
        assert_eq!(back, law);
        // Unknown fields are rejected at the schema level.
        let bad = r#"{"type":"two_point","n":4,"mu":1.0,"extra":1}"#;
        assert!(serde_json::from_str::<ParticleLaw>(bad).is_err());
    }

    #[test]
    fn poisson_truncated_is_dense_with_requested_mean() {
        let law = ParticleLaw::poisson_truncated(5.0, 20).unwrap();
        law.validate().unwrap();
        assert!((law.mean() - 5.0).abs() < 0.05);
        if let ParticleLaw::FinitePmf { pmf } = &law {
            assert_eq!(pmf.len(), 21);
        } else {
            panic!("expected finite pmf");
        }
    }
}
