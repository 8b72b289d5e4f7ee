//! Exact evaluation of the visited-set weight bounds.
//!
//! Everything here is deterministic closed-form or exactly-summed series:
//! hitting probabilities, the six-region split of the expected visited-set
//! weight, the weight-growth constants of the dominating branching random
//! walk, the transience criterion for integer BRWs, and machine-readable
//! certificates. Infinite tails are always evaluated as geometric series,
//! never truncated, so region sums carry no truncation error.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::laws::{ParticleLaw, TwoPointParams};
use crate::tree::phi_f64;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticError {
    #[error("invalid bound parameters: {0}")]
    InvalidParams(String),
    #[error("tail series diverges for these parameters: {0}")]
    DivergentTail(String),
    #[error("closed-form mode needs lambda = 1/sqrt(d), beta = 1, c_hit = 1")]
    ClosedFormUnavailable,
    #[error("hit bound for the one-per-site model needs d >= 6, got {0}")]
    NeedsDSix(u32),
    #[error("offspring specification is empty")]
    EmptyOffspring,
    #[error("mixture component target 2^-{n} unreachable under the m <= {cap} cap")]
    MixtureTargetUnreachable { n: u32, cap: u32 },
}

/// Neumaier-compensated accumulator for long sums.
#[derive(Debug, Default, Clone, Copy)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Parameters of one bound evaluation. `n = d^m` is the island size; the
/// hitting exponent is `c_hit * d^(-beta k)` with `beta = 1, c_hit = 1`
/// recovering the plain single-walker law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub d: u32,
    pub mu: f64,
    pub m: u32,
    pub lambda: f64,
    pub beta: f64,
    pub c_hit: f64,
}

impl BoundParams {
    /// Plain parameters at the canonical weight base `lambda = 1/sqrt(d)`.
    pub fn plain(d: u32, mu: f64, m: u32) -> Result<Self, AnalyticError> {
        let p = BoundParams {
            d,
            mu,
            m,
            lambda: 1.0 / (d as f64).sqrt(),
            beta: 1.0,
            c_hit: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), AnalyticError> {
        let d = self.d as f64;
        if self.d < 2 {
            return Err(AnalyticError::InvalidParams(format!("d must be >= 2, got {}", self.d)));
        }
        if self.m < 1 {
            return Err(AnalyticError::InvalidParams("m must be >= 1".into()));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(AnalyticError::InvalidParams(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.lambda > 1.0 / d && self.lambda < 1.0) {
            return Err(AnalyticError::InvalidParams(format!(
                "lambda must lie in (1/d, 1), got {}",
                self.lambda
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(AnalyticError::InvalidParams(format!(
                "beta must lie in (0, 1], got {}",
                self.beta
            )));
        }
        if !(self.c_hit >= 1.0 && self.c_hit.is_finite()) {
            return Err(AnalyticError::InvalidParams(format!(
                "c_hit must be >= 1, got {}",
                self.c_hit
            )));
        }
        Ok(())
    }

    fn is_paper_specialization(&self) -> bool {
        let lam_star = 1.0 / (self.d as f64).sqrt();
        (self.lambda - lam_star).abs() <= 1e-12 * lam_star
            && self.beta == 1.0
            && self.c_hit == 1.0
    }
}

/// The six-way split of the cell lattice: level sign, then whether the
/// distance is at most `m` (1), beyond `m` at level at most `m` (2), or at
/// level beyond `m` (3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    S1Plus,
    S2Plus,
    S3Plus,
    S1Minus,
    S2Minus,
    S3Minus,
}

impl Region {
    pub const ALL: [Region; 6] = [
        Region::S1Plus,
        Region::S2Plus,
        Region::S3Plus,
        Region::S1Minus,
        Region::S2Minus,
        Region::S3Minus,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Region::S1Plus => "S1+",
            Region::S2Plus => "S2+",
            Region::S3Plus => "S3+",
            Region::S1Minus => "S1-",
            Region::S2Minus => "S2-",
            Region::S3Minus => "S3-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumMode {
    Numeric,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSums {
    #[serde(rename = "S1+")]
    pub s1_plus: f64,
    #[serde(rename = "S2+")]
    pub s2_plus: f64,
    #[serde(rename = "S3+")]
    pub s3_plus: f64,
    #[serde(rename = "S1-")]
    pub s1_minus: f64,
    #[serde(rename = "S2-")]
    pub s2_minus: f64,
    #[serde(rename = "S3-")]
    pub s3_minus: f64,
}

impl RegionSums {
    pub fn get(&self, region: Region) -> f64 {
        match region {
            Region::S1Plus => self.s1_plus,
            Region::S2Plus => self.s2_plus,
            Region::S3Plus => self.s3_plus,
            Region::S1Minus => self.s1_minus,
            Region::S2Minus => self.s2_minus,
            Region::S3Minus => self.s3_minus,
        }
    }

    pub fn total(&self) -> f64 {
        let mut acc = Kahan::default();
        for r in Region::ALL {
            acc.add(self.get(r));
        }
        acc.value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TwoPoint,
    InfiniteMean,
    TwoType,
}

/// Result of one full bound evaluation: the six region sums, their total,
/// and `alpha = mu * total`. Transience is certified when `alpha < 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub params: BoundParams,
    pub region_sums: RegionSums,
    pub total: f64,
    pub alpha: f64,
    pub method: Method,
    pub transient_certified: bool,
}

// ---------------------------------------------------------------------------
// Hitting probabilities
// ---------------------------------------------------------------------------

/// Probability that a single walk from the root ever visits a fixed vertex
/// at distance `k`.
pub fn hit_prob_single(d: u32, k: u64) -> f64 {
    (d as f64).powi(-(k as i32))
}

/// Union bound for `n` independent walks, capped at 1.
pub fn hit_prob_union(d: u32, k: u64, n: u64) -> f64 {
    (n as f64 * hit_prob_single(d, k)).min(1.0)
}

/// Union bound under the generalized per-walker law `c_hit * d^(-beta k)`.
pub fn hit_prob_union_general(d: u32, k: u64, n: u64, beta: f64, c_hit: f64) -> f64 {
    (n as f64 * c_hit * (d as f64).powf(-beta * k as f64)).min(1.0)
}

// ---------------------------------------------------------------------------
// Cell values and the series engine
// ---------------------------------------------------------------------------

/// One lattice cell of the bound sum: level `j`, distance `|j| + 2i`.
pub fn e_term(j: i64, i: u64, p: &BoundParams) -> f64 {
    let d = p.d as f64;
    let k = j.unsigned_abs() + 2 * i;
    let hit = (p.c_hit * d.powf(-p.beta * k as f64)).min(d.powi(-(p.m as i32)));
    p.lambda.powi(j as i32) * phi_f64(j, k, p.d) * hit
}

/// Exact summation over half-infinite rows and tails of the cell lattice.
///
/// Every cell has value `lambda^level * phi * min(a * d^(-beta k), b)`;
/// the engine walks the capped head of each row explicitly and closes the
/// geometric remainder in closed form.
struct SeriesEngine {
    d: f64,
    d_u32: u32,
    lambda: f64,
    beta: f64,
    /// Prefactor on the decaying branch (`c_hit`, possibly times a walker
    /// count).
    a: f64,
    /// Cap branch value (`d^-m` for bound sums, 1 for raw tail weights).
    b: f64,
    /// Per-unit-i ratio on the decaying branch.
    r: f64,
    /// Per-unit-j ratios of full decaying rows, positive/negative levels.
    q_plus: f64,
    q_minus: f64,
    /// Full-row constant: 1 + ((d-1)/d) r/(1-r).
    kappa: f64,
}

impl SeriesEngine {
    fn new(d: u32, lambda: f64, beta: f64, a: f64, b: f64) -> Result<Self, AnalyticError> {
        let df = d as f64;
        let r = df.powf(1.0 - 2.0 * beta);
        let q_plus = lambda * df.powf(1.0 - beta);
        let q_minus = 1.0 / (lambda * df.powf(beta));
        if r >= 1.0 {
            return Err(AnalyticError::DivergentTail(format!(
                "d^(1-2beta) = {r} >= 1 (needs beta > 1/2)"
            )));
        }
        if q_plus >= 1.0 {
            return Err(AnalyticError::DivergentTail(format!(
                "lambda d^(1-beta) = {q_plus} >= 1"
            )));
        }
        if q_minus >= 1.0 {
            return Err(AnalyticError::DivergentTail(format!(
                "1/(lambda d^beta) = {q_minus} >= 1"
            )));
        }
        let kappa = 1.0 + (df - 1.0) / df * r / (1.0 - r);
        Ok(SeriesEngine { d: df, d_u32: d, lambda, beta, a, b, r, q_plus, q_minus, kappa })
    }

    fn decay(&self, k: u64) -> f64 {
        self.a * self.d.powf(-self.beta * k as f64)
    }

    fn cell(&self, j: i64, i: u64) -> f64 {
        let k = j.unsigned_abs() + 2 * i;
        self.lambda.powi(j as i32) * phi_f64(j, k, self.d_u32) * self.decay(k).min(self.b)
    }

    /// Sum over `i >= i_from` of the row at positive level `j >= 1`.
    fn row_plus(&self, j: u64, i_from: u64) -> f64 {
        let mut acc = Kahan::default();
        let mut i = i_from;
        while self.decay(j + 2 * i) > self.b {
            acc.add(self.cell(j as i64, i));
            i += 1;
        }
        let lam_j = self.lambda.powi(j as i32);
        if i == 0 {
            // Leading cell phi(j, j) = d^j, then the geometric remainder.
            acc.add(self.a * self.q_plus.powi(j as i32));
            i = 1;
        }
        let head = lam_j * (self.d - 1.0) * self.d.powi(j as i32 - 1)
            * self.a
            * self.d.powf(-self.beta * j as f64);
        acc.add(head * self.r.powi(i as i32) / (1.0 - self.r));
        acc.value()
    }

    /// Sum over `i >= i_from` of the row at level `-j`, `j >= 0`.
    fn row_minus(&self, j: u64, i_from: u64) -> f64 {
        let mut acc = Kahan::default();
        let mut i = i_from;
        while self.decay(j + 2 * i) > self.b {
            acc.add(self.cell(-(j as i64), i));
            i += 1;
        }
        let lam_j = self.lambda.powi(-(j as i32));
        if i == 0 {
            // Leading cell phi(-j, j) = 1.
            acc.add(self.a * self.q_minus.powi(j as i32));
            i = 1;
        }
        let head = lam_j * (self.d - 1.0) / self.d * self.a * self.d.powf(-self.beta * j as f64);
        acc.add(head * self.r.powi(i as i32) / (1.0 - self.r));
        acc.value()
    }

    /// True when the whole row at `|level| = j` sits on the decaying branch.
    fn row_pure(&self, j: u64) -> bool {
        self.decay(j) <= self.b
    }

    /// Sum of all full rows `j >= j_from` on the positive side, assuming
    /// they are pure.
    fn j_tail_plus(&self, j_from: u64) -> f64 {
        self.a * self.kappa * self.q_plus.powi(j_from as i32) / (1.0 - self.q_plus)
    }

    fn j_tail_minus(&self, j_from: u64) -> f64 {
        self.a * self.kappa * self.q_minus.powi(j_from as i32) / (1.0 - self.q_minus)
    }

    /// All rows `j >= j_from` on one side: explicit rows until they turn
    /// pure, then the closed-form tail.
    fn side_tail(&self, j_from: u64, plus: bool) -> f64 {
        let mut acc = Kahan::default();
        let mut j = j_from;
        while !self.row_pure(j) {
            acc.add(if plus { self.row_plus(j, 0) } else { self.row_minus(j, 0) });
            j += 1;
        }
        acc.add(if plus { self.j_tail_plus(j) } else { self.j_tail_minus(j) });
        acc.value()
    }
}

fn engine_for(p: &BoundParams) -> Result<SeriesEngine, AnalyticError> {
    p.validate()?;
    SeriesEngine::new(p.d, p.lambda, p.beta, p.c_hit, (p.d as f64).powi(-(p.m as i32)))
}

// ---------------------------------------------------------------------------
// Region sums
// ---------------------------------------------------------------------------

fn region_sum_numeric(region: Region, p: &BoundParams) -> Result<f64, AnalyticError> {
    let eng = engine_for(p)?;
    let m = p.m as u64;
    let mut acc = Kahan::default();
    match region {
        Region::S1Plus => {
            for j in 1..=m {
                for i in 0..=(m - j) / 2 {
                    acc.add(eng.cell(j as i64, i));
                }
            }
        }
        Region::S1Minus => {
            for j in 0..=m {
                for i in 0..=(m - j) / 2 {
                    acc.add(eng.cell(-(j as i64), i));
                }
            }
        }
        Region::S2Plus => {
            for j in 1..=m {
                acc.add(eng.row_plus(j, (m - j) / 2 + 1));
            }
        }
        Region::S2Minus => {
            for j in 0..=m {
                acc.add(eng.row_minus(j, (m - j) / 2 + 1));
            }
        }
        Region::S3Plus => acc.add(eng.side_tail(m + 1, true)),
        Region::S3Minus => acc.add(eng.side_tail(m + 1, false)),
    }
    Ok(acc.value())
}

/// Closed forms of the six sums in the paper-specialization
/// `lambda = 1/sqrt(d)`, `beta = 1`, `c_hit = 1`, with every geometric
/// prefactor explicit. Exactly equal (in real arithmetic) to the numeric
/// sums; the pair is the dual-evaluation check.
fn region_sum_closed(region: Region, p: &BoundParams) -> Result<f64, AnalyticError> {
    p.validate()?;
    if !p.is_paper_specialization() {
        return Err(AnalyticError::ClosedFormUnavailable);
    }
    let d = p.d as f64;
    let s = d.sqrt();
    let m = p.m;
    let scale = s.powi(-(m as i32));
    // Counts of j with the parity of m in 1..=m and 0..=m.
    let n_even = (m as f64 + 1.0).div_euclid(2.0);
    let n_odd = (m / 2) as f64;
    let n_even_z = (m / 2) as f64 + 1.0;
    let n_odd_z = (m as f64 + 1.0).div_euclid(2.0);
    Ok(match region {
        Region::S1Plus => scale * (n_even + n_odd / s),
        Region::S1Minus => scale * (n_even_z + n_odd_z / s),
        Region::S2Plus => scale / d * (n_even + n_odd * s),
        Region::S2Minus => scale / d * (n_even_z + n_odd_z * s),
        Region::S3Plus | Region::S3Minus => (1.0 + 1.0 / d) * scale / (s - 1.0),
    })
}

/// One of the six partial sums, by exact series (`Numeric`) or by the
/// explicit-constant closed forms (`ClosedForm`, paper specialization only).
pub fn region_sum(region: Region, p: &BoundParams, mode: SumMode) -> Result<f64, AnalyticError> {
    match mode {
        SumMode::Numeric => region_sum_numeric(region, p),
        SumMode::ClosedForm => region_sum_closed(region, p),
    }
}

/// Full bound evaluation: six regions, total, `alpha = mu * total`.
pub fn total_bound(p: &BoundParams) -> Result<BoundReport, AnalyticError> {
    let sums = RegionSums {
        s1_plus: region_sum_numeric(Region::S1Plus, p)?,
        s2_plus: region_sum_numeric(Region::S2Plus, p)?,
        s3_plus: region_sum_numeric(Region::S3Plus, p)?,
        s1_minus: region_sum_numeric(Region::S1Minus, p)?,
        s2_minus: region_sum_numeric(Region::S2Minus, p)?,
        s3_minus: region_sum_numeric(Region::S3Minus, p)?,
    };
    let total = sums.total();
    let alpha = p.mu * total;
    let method = if p.beta == 1.0 && p.c_hit == 1.0 { Method::TwoPoint } else { Method::TwoType };
    Ok(BoundReport {
        params: *p,
        region_sums: sums,
        total,
        alpha,
        method,
        transient_certified: alpha < 1.0,
    })
}

// ---------------------------------------------------------------------------
// Scans and tail weights
// ---------------------------------------------------------------------------

pub const M_SCAN_CAP: u32 = 64;

/// Outcome of the increasing-m scan for `alpha < target`.
#[derive(Debug, Clone)]
pub struct MScan {
    pub target: f64,
    pub cap: u32,
    /// Smallest m with `alpha < target`, with its report, if any.
    pub found: Option<(u32, BoundReport)>,
}

/// Scans m = 1, 2, ... (no bisection: alpha is not proven monotone in m)
/// for the first `alpha < target`. A cap overrun is a negative result, not
/// an error.
pub fn find_min_m(
    d: u32,
    mu: f64,
    lambda: f64,
    beta: f64,
    c_hit: f64,
    target: f64,
    cap: u32,
) -> Result<MScan, AnalyticError> {
    for m in 1..=cap {
        let p = BoundParams { d, mu, m, lambda, beta, c_hit };
        let report = total_bound(&p)?;
        if report.alpha < target {
            return Ok(MScan { target, cap, found: Some((m, report)) });
        }
    }
    Ok(MScan { target, cap, found: None })
}

/// Upper bound on the expected weight of sites at distance `> radius`
/// visited by `n_walkers` walkers launched from the root, each hitting a
/// fixed distance-k vertex with probability at most `c_hit d^(-beta k)`.
pub fn tail_weight(
    radius: u32,
    d: u32,
    lambda: f64,
    beta: f64,
    c_hit: f64,
    n_walkers: u64,
) -> Result<f64, AnalyticError> {
    if n_walkers == 0 {
        // Still vet the parameters so divergent configurations are caught.
        SeriesEngine::new(d, lambda, beta, c_hit, 1.0)?;
        return Ok(0.0);
    }
    let eng = SeriesEngine::new(d, lambda, beta, n_walkers as f64 * c_hit, 1.0)?;
    let radius = radius as u64;
    let mut acc = Kahan::default();
    for j in 1..=radius {
        acc.add(eng.row_plus(j, (radius - j) / 2 + 1));
    }
    for j in 0..=radius {
        acc.add(eng.row_minus(j, (radius - j) / 2 + 1));
    }
    acc.add(eng.side_tail(radius + 1, true));
    acc.add(eng.side_tail(radius + 1, false));
    Ok(acc.value())
}

/// Expected visited-set weight bound for one island of `n` particles with
/// mean `mu`, for arbitrary `n` (not only powers of d): the same cell sum
/// with cap branch `1/n`. Coincides with `mu * total` of [`total_bound`]
/// when `n = d^m`.
pub fn island_alpha(
    d: u32,
    mu: f64,
    n: u64,
    lambda: f64,
    beta: f64,
    c_hit: f64,
) -> Result<f64, AnalyticError> {
    if n == 0 {
        return Err(AnalyticError::InvalidParams("island size must be >= 1".into()));
    }
    let eng = SeriesEngine::new(d, lambda, beta, c_hit, 1.0 / n as f64)?;
    let mut acc = Kahan::default();
    acc.add(eng.side_tail(1, true));
    acc.add(eng.side_tail(0, false));
    Ok(mu * acc.value())
}

/// Exact sum of all bound cells at distance greater than `radius`, used by
/// the ball-enumeration oracle to close the comparison without truncation
/// error.
pub fn bound_tail_beyond_radius(radius: u64, p: &BoundParams) -> Result<f64, AnalyticError> {
    let eng = engine_for(p)?;
    let mut acc = Kahan::default();
    for j in 1..=radius {
        acc.add(eng.row_plus(j, (radius - j) / 2 + 1));
    }
    for j in 0..=radius {
        acc.add(eng.row_minus(j, (radius - j) / 2 + 1));
    }
    acc.add(eng.side_tail(radius + 1, true));
    acc.add(eng.side_tail(radius + 1, false));
    Ok(acc.value())
}

/// Exact lambda-weight of the distance-`k` sphere.
pub fn sphere_weight(k: u64, d: u32, lambda: f64) -> f64 {
    let mut acc = Kahan::default();
    for j in -(k as i64)..=k as i64 {
        let phi = phi_f64(j, k, d);
        if phi > 0.0 {
            acc.add(lambda.powi(j as i32) * phi);
        }
    }
    acc.value()
}

/// Exact lambda-weight of the radius-`radius` ball.
pub fn ball_weight(radius: u64, d: u32, lambda: f64) -> f64 {
    let mut acc = Kahan::default();
    for k in 0..=radius {
        acc.add(sphere_weight(k, d, lambda));
    }
    acc.value()
}

/// Number of vertices on the distance-`k` sphere, in floating point.
pub fn sphere_size_f64(k: u64, d: u32) -> f64 {
    if k == 0 {
        1.0
    } else {
        (d as f64 + 1.0) * (d as f64).powi(k as i32 - 1)
    }
}

// ---------------------------------------------------------------------------
// Dominating-BRW constants
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrwConstants {
    /// Optimizing exponent ln(2d)/2.
    pub theta_star: f64,
    /// One-step weight growth at the evaluated theta.
    pub m_at_theta: f64,
    /// Optimal growth factor sqrt(8d)/(d+1).
    pub m_star: f64,
    /// True when `m_star < 1` (the weight argument applies).
    pub subcritical: bool,
}

/// One-step expected weight-growth factor of the dominating BRW at `theta`.
pub fn brw_weight_factor(d: u32, theta: f64) -> f64 {
    let df = d as f64;
    (theta.exp() + 2.0 * df * (-theta).exp()) / (df + 1.0)
}

/// The growth constants; `theta` defaults to the optimizer.
pub fn brw_constants(d: u32, theta: Option<f64>) -> BrwConstants {
    let df = d as f64;
    let theta_star = (2.0 * df).ln() / 2.0;
    let m_star = (8.0 * df).sqrt() / (df + 1.0);
    let m_at_theta = brw_weight_factor(d, theta.unwrap_or(theta_star));
    BrwConstants { theta_star, m_at_theta, m_star, subcritical: m_star < 1.0 }
}

/// Decay exponent of the one-per-site hitting bound, as a power of d:
/// `(4/(d+1))^k = d^(-beta k)`.
pub fn brw_beta(d: u32) -> f64 {
    ((d as f64 + 1.0) / 4.0).ln() / (d as f64).ln()
}

/// Prefactor of the one-per-site hitting bound.
pub fn brw_c_hit(d: u32) -> Result<f64, AnalyticError> {
    if !brw_constants(d, None).subcritical {
        return Err(AnalyticError::NeedsDSix(d));
    }
    let df = d as f64;
    Ok((df + 1.0) / (df + 1.0 - (8.0 * df).sqrt()))
}

/// Bound on the probability that the frog model with one sleeping particle
/// per site ever hits a fixed vertex at distance `k`.
pub fn brw_hit_bound(d: u32, k: u64) -> Result<f64, AnalyticError> {
    let c = brw_c_hit(d)?;
    Ok(c * (4.0 / (d as f64 + 1.0)).powi(k as i32))
}

// ---------------------------------------------------------------------------
// Transience criterion for BRWs on the integers
// ---------------------------------------------------------------------------

/// Laplace-style moment of the expected offspring displacement spec:
/// sum of `count * exp(-lambda * displacement)`.
pub fn biggins_m(offspring: &[(i64, f64)], lambda: f64) -> f64 {
    offspring
        .iter()
        .map(|&(x, c)| c * (-lambda * x as f64).exp())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BigginsVerdict {
    TransientPositive,
    TransientNegative,
    /// No lambda on the searched grid reaches `m <= 1` in either direction.
    RecurrentAtGrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BigginsReport {
    pub verdict: BigginsVerdict,
    pub min_m_positive: f64,
    pub argmin_positive: f64,
    pub min_m_negative: f64,
    pub argmin_negative: f64,
}

const BIGGINS_GRID_LO: f64 = 1e-4;
const BIGGINS_GRID_HI: f64 = 30.0;
const BIGGINS_GRID_POINTS: usize = 256;

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if hi - lo < 1e-12 {
            break;
        }
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_PHI * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_PHI * (hi - lo);
            fb = f(b);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

fn grid_min(f: impl Fn(f64) -> f64 + Copy) -> (f64, f64) {
    let lo_ln = BIGGINS_GRID_LO.ln();
    let hi_ln = BIGGINS_GRID_HI.ln();
    let mut best = (BIGGINS_GRID_LO, f(BIGGINS_GRID_LO));
    let mut best_idx = 0usize;
    for idx in 1..BIGGINS_GRID_POINTS {
        let x = (lo_ln + (hi_ln - lo_ln) * idx as f64 / (BIGGINS_GRID_POINTS - 1) as f64).exp();
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
            best_idx = idx;
        }
    }
    let at = |idx: isize| -> f64 {
        let idx = idx.clamp(0, BIGGINS_GRID_POINTS as isize - 1) as f64;
        (lo_ln + (hi_ln - lo_ln) * idx / (BIGGINS_GRID_POINTS - 1) as f64).exp()
    };
    let lo = at(best_idx as isize - 1);
    let hi = at(best_idx as isize + 1);
    let (x, fx) = golden_min(f, lo, hi);
    if fx < best.1 {
        (x, fx)
    } else {
        best
    }
}

/// Scans `lambda > 0` (and the mirrored spec) for `inf m <= 1`.
pub fn biggins_classify(offspring: &[(i64, f64)]) -> Result<BigginsReport, AnalyticError> {
    if offspring.is_empty() {
        return Err(AnalyticError::EmptyOffspring);
    }
    if offspring.iter().any(|&(_, c)| !(c >= 0.0) || !c.is_finite()) {
        return Err(AnalyticError::InvalidParams("offspring counts must be finite and >= 0".into()));
    }
    let mirrored: Vec<(i64, f64)> = offspring.iter().map(|&(x, c)| (-x, c)).collect();
    let (arg_pos, min_pos) = grid_min(|lam| biggins_m(offspring, lam));
    let (arg_neg, min_neg) = grid_min(|lam| biggins_m(&mirrored, lam));
    let verdict = if min_pos <= 1.0 {
        BigginsVerdict::TransientPositive
    } else if min_neg <= 1.0 {
        BigginsVerdict::TransientNegative
    } else {
        BigginsVerdict::RecurrentAtGrid
    };
    Ok(BigginsReport {
        verdict,
        min_m_positive: min_pos,
        argmin_positive: arg_pos,
        min_m_negative: min_neg,
        argmin_negative: arg_neg,
    })
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

/// Machine-readable verdict for a parameter tuple. `alpha < 1` certifies the
/// geometric block-weight decay, hence transience at formula level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub method: Method,
    pub d: u32,
    pub mu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_n: Option<Vec<u32>>,
    #[serde(rename = "N_n", skip_serializing_if = "Option::is_none")]
    pub n_n: Option<Vec<u64>>,
    pub lambda: f64,
    pub beta: f64,
    /// Absent when the hitting bound does not exist (d < 6 two-type).
    #[serde(rename = "C_hit", skip_serializing_if = "Option::is_none")]
    pub c_hit: Option<f64>,
    /// Absent on negative certificates, where no bound was attained.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_sums: Option<RegionSums>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub component_alphas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub remainder_bound: Option<f64>,
    pub transient_certified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub tool_version: String,
    pub timestamp: u64,
}

/// Seconds since the epoch, overridable through FROGCERT_TIMESTAMP for
/// byte-reproducible outputs.
pub fn default_timestamp() -> u64 {
    if let Ok(v) = std::env::var("FROGCERT_TIMESTAMP") {
        if let Ok(t) = v.parse() {
            return t;
        }
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn checked_power(d: u32, m: u32) -> Option<u64> {
    (d as u64).checked_pow(m)
}

impl Certificate {
    fn blank(method: Method, d: u32, mu: f64, lambda: f64, beta: f64, c_hit: Option<f64>) -> Self {
        Certificate {
            method,
            d,
            mu,
            m: None,
            n: None,
            m_n: None,
            n_n: None,
            lambda,
            beta,
            c_hit,
            alpha: None,
            region_sums: None,
            component_alphas: None,
            remainder_bound: None,
            transient_certified: false,
            reason: None,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: default_timestamp(),
        }
    }
}

/// Certificate for the clumped two-point construction: scan for the least
/// island exponent with `alpha < 1`.
pub fn certify_two_point(d: u32, mu: f64) -> Result<Certificate, AnalyticError> {
    let lambda = 1.0 / (d as f64).sqrt();
    let mut cert = Certificate::blank(Method::TwoPoint, d, mu, lambda, 1.0, Some(1.0));
    let scan = find_min_m(d, mu, lambda, 1.0, 1.0, 1.0, M_SCAN_CAP)?;
    match scan.found {
        Some((m, report)) => {
            cert.m = Some(m);
            cert.n = checked_power(d, m);
            cert.alpha = Some(report.alpha);
            cert.region_sums = Some(report.region_sums);
            cert.transient_certified = true;
        }
        None => {
            cert.reason = Some(format!("no m <= {} reaches alpha < 1", scan.cap));
        }
    }
    Ok(cert)
}

/// Certificate for the one-guaranteed-particle construction: the hitting
/// exponent comes from the dominating BRW, so it needs `beta(d) > 1/2`,
/// i.e. d >= 14.
pub fn certify_two_type(d: u32, mu: f64) -> Result<Certificate, AnalyticError> {
    let lambda = 1.0 / (d as f64).sqrt();
    let beta = brw_beta(d);
    let c_hit = brw_c_hit(d).ok();
    let mut cert = Certificate::blank(Method::TwoType, d, mu, lambda, beta, c_hit);
    let Some(c_hit) = c_hit else {
        cert.reason = Some(format!("dominating BRW not subcritical for d = {d} (needs d >= 6)"));
        return Ok(cert);
    };
    if beta <= 0.5 {
        cert.reason = Some(format!(
            "beta = {beta:.6} <= 1/2, tail sums diverge (needs d >= 14)"
        ));
        return Ok(cert);
    }
    let scan = find_min_m(d, mu, lambda, beta, c_hit, 1.0, M_SCAN_CAP)?;
    match scan.found {
        Some((m, report)) => {
            cert.m = Some(m);
            cert.n = checked_power(d, m);
            cert.alpha = Some(report.alpha);
            cert.region_sums = Some(report.region_sums);
            cert.transient_certified = true;
        }
        None => {
            cert.reason = Some(format!("no m <= {} reaches alpha < 1", scan.cap));
        }
    }
    Ok(cert)
}

/// Builds the truncated infinite-mean mixture: component n gets the least
/// island exponent with `alpha_n < 2^-n`, and the certificate totals the
/// component alphas plus the `2^-n_max` remainder of the dropped components.
pub fn build_infinite_mean_mixture(
    d: u32,
    lambda: f64,
    mu_per_component: f64,
    n_max: u32,
) -> Result<(ParticleLaw, Certificate), AnalyticError> {
    if n_max < 1 {
        return Err(AnalyticError::InvalidParams("n_max must be >= 1".into()));
    }
    let mut components = Vec::with_capacity(n_max as usize);
    let mut m_list = Vec::with_capacity(n_max as usize);
    let mut n_list = Vec::with_capacity(n_max as usize);
    let mut alphas = Vec::with_capacity(n_max as usize);
    let mut alpha_acc = Kahan::default();
    for n in 1..=n_max {
        let target = 2f64.powi(-(n as i32));
        let scan = find_min_m(d, mu_per_component, lambda, 1.0, 1.0, target, M_SCAN_CAP)?;
        let (m, report) = scan
            .found
            .ok_or(AnalyticError::MixtureTargetUnreachable { n, cap: M_SCAN_CAP })?;
        let island = checked_power(d, m).ok_or_else(|| {
            AnalyticError::InvalidParams(format!("island size d^{m} exceeds u64"))
        })?;
        components.push(TwoPointParams { n: island, mu: mu_per_component });
        m_list.push(m);
        n_list.push(island);
        alphas.push(report.alpha);
        alpha_acc.add(report.alpha);
    }
    let remainder = 2f64.powi(-(n_max as i32));
    alpha_acc.add(remainder);
    let alpha = alpha_acc.value();
    let law = ParticleLaw::mixture(components, remainder)
        .map_err(|e| AnalyticError::InvalidParams(e.to_string()))?;
    let mut cert =
        Certificate::blank(Method::InfiniteMean, d, mu_per_component, lambda, 1.0, Some(1.0));
    cert.m_n = Some(m_list);
    cert.n_n = Some(n_list);
    cert.alpha = Some(alpha);
    cert.component_alphas = Some(alphas);
    cert.remainder_bound = Some(remainder);
    cert.transient_certified = alpha < 1.0;
    if !cert.transient_certified {
        cert.reason = Some("component alphas plus remainder reach 1".into());
    }
    Ok((law, cert))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{enumerate_ball, TreeParams};
    use std::collections::HashMap;

    const SQRT2_INV: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn plain(d: u32, mu: f64, m: u32) -> BoundParams {
        BoundParams::plain(d, mu, m).unwrap()
    }

    #[test]
    fn hit_probabilities() {
        assert_eq!(hit_prob_single(2, 1), 0.5);
        assert_eq!(hit_prob_single(5, 0), 1.0);
        assert!((hit_prob_single(3, 4) - 1.0 / 81.0).abs() < 1e-15);
        assert_eq!(hit_prob_union(2, 3, 4), 0.5);
        assert_eq!(hit_prob_union(2, 1, 100), 1.0);
    }

    #[test]
    fn union_bound_dominates_exact_complement() {
        for d in [2u32, 3, 5] {
            for k in 0..=10u64 {
                for n in [1u64, 2, 10, 100, 10_000] {
                    let exact = 1.0 - (1.0 - hit_prob_single(d, k)).powi(n as i32);
                    let bound = hit_prob_union(d, k, n);
                    assert!(
                        exact <= bound + 1e-12,
                        "d={d} k={k} n={n}: exact {exact} > bound {bound}"
                    );
                }
            }
        }
    }

    #[test]
    fn e_term_values() {
        let p = plain(2, 1.0, 2);
        // Level 0 at the origin: phi = 1, weight 1, min(1, d^-m).
        assert!((e_term(0, 0, &p) - 0.25).abs() < 1e-15);
        let expect = SQRT2_INV * 2.0 * 0.25;
        assert!((e_term(1, 0, &p) - expect).abs() < 1e-15);
        for j in -6..=6 {
            for i in 0..6 {
                assert!(e_term(j, i, &p) >= 0.0);
            }
        }
    }

    /// Each cell value equals the brute-force sum of per-vertex bound terms
    /// over the enumerated ball.
    #[test]
    fn e_term_matches_ball_cells() {
        let p = plain(2, 1.0, 2);
        let params = TreeParams::regular(2).unwrap();
        let radius = 9u64;
        let mut cells: HashMap<(i64, u64), f64> = HashMap::new();
        for v in enumerate_ball(radius as u32, &params).unwrap() {
            let k = v.distance();
            let term = p.lambda.powi(v.level() as i32)
                * (p.c_hit * (p.d as f64).powf(-p.beta * k as f64))
                    .min((p.d as f64).powi(-(p.m as i32)));
            *cells.entry((v.level(), k)).or_insert(0.0) += term;
        }
        for (&(j, k), &sum) in &cells {
            let i = (k - j.unsigned_abs()) / 2;
            let expect = e_term(j, i, &p);
            assert!((sum - expect).abs() <= 1e-12 * expect.max(1.0), "cell ({j},{k})");
        }
    }

    #[test]
    fn s1_minus_hand_value() {
        let p = plain(2, 1.0, 1);
        let expect = 0.5 + SQRT2_INV; // e(0,0) + e(-1,0)
        let numeric = region_sum(Region::S1Minus, &p, SumMode::Numeric).unwrap();
        let closed = region_sum(Region::S1Minus, &p, SumMode::ClosedForm).unwrap();
        assert!((numeric - expect).abs() < 1e-12, "numeric={numeric}");
        assert!((closed - expect).abs() < 1e-12, "closed={closed}");
    }

    #[test]
    fn s2_minus_hand_value() {
        // d=2, m=1: row j=0 sums to 1/2, row j=1 to sqrt(2)/4.
        let p = plain(2, 1.0, 1);
        let expect = 0.5 + 2f64.sqrt() / 4.0;
        let numeric = region_sum(Region::S2Minus, &p, SumMode::Numeric).unwrap();
        assert!((numeric - expect).abs() < 1e-12, "numeric={numeric}");
    }

    #[test]
    fn numeric_and_closed_agree_on_grid() {
        for d in [2u32, 3, 5] {
            for m in 2..=12 {
                let p = plain(d, 1.0, m);
                for region in Region::ALL {
                    let a = region_sum(region, &p, SumMode::Numeric).unwrap();
                    let b = region_sum(region, &p, SumMode::ClosedForm).unwrap();
                    let rel = (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
                    assert!(rel < 1e-9, "d={d} m={m} {region:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn closed_form_guards_specialization() {
        let mut p = plain(2, 1.0, 3);
        p.lambda = 0.8;
        assert_eq!(
            region_sum(Region::S1Plus, &p, SumMode::ClosedForm),
            Err(AnalyticError::ClosedFormUnavailable)
        );
    }

    #[test]
    fn s3_vanishes_in_m() {
        let mut prev = f64::INFINITY;
        for m in 1..=40 {
            let p = plain(2, 1.0, m);
            let s3 = region_sum(Region::S3Plus, &p, SumMode::Numeric).unwrap();
            assert!(s3 < prev);
            prev = s3;
        }
        assert!(prev < 1e-5);
    }

    /// Brute-force oracle for the full bound: enumerate the ball, sum the
    /// per-vertex terms, add the exact analytic remainder beyond the ball.
    #[test]
    fn total_bound_matches_ball_oracle() {
        for (d, radius) in [(2u32, 12u32), (3, 8)] {
            for m in 1..=3 {
                let p = plain(d, 1.0, m);
                let report = total_bound(&p).unwrap();
                let params = TreeParams::regular(d).unwrap();
                let mut acc = Kahan::default();
                for v in enumerate_ball(radius, &params).unwrap() {
                    let k = v.distance();
                    let term = p.lambda.powi(v.level() as i32)
                        * (p.c_hit * (p.d as f64).powf(-(k as f64)))
                            .min((p.d as f64).powi(-(m as i32)));
                    acc.add(term);
                }
                // Cells beyond the ball, with the same min, summed exactly.
                let beyond = bound_tail_beyond_radius(radius as u64, &p).unwrap();
                let oracle = acc.value() + beyond;
                assert!(
                    (oracle - report.total).abs() < 1e-6,
                    "d={d} m={m}: oracle {oracle} vs total {}",
                    report.total
                );
            }
        }
    }

    #[test]
    fn alpha_reaches_below_one_for_d2_mu10() {
        let scan = find_min_m(2, 10.0, SQRT2_INV, 1.0, 1.0, 1.0, M_SCAN_CAP).unwrap();
        let (m_star, report) = scan.found.expect("certificate exists");
        assert_eq!(m_star, 19, "regression fixture");
        assert!(report.alpha < 1.0);
        let below = total_bound(&plain(2, 10.0, m_star - 1)).unwrap();
        assert!(below.alpha >= 1.0, "m* is minimal");
    }

    #[test]
    fn alpha_eventually_decreases() {
        for m in 1..=30 {
            let a = total_bound(&plain(2, 10.0, m)).unwrap().alpha;
            let b = total_bound(&plain(2, 10.0, m + 4)).unwrap().alpha;
            assert!(b < a, "alpha({}) = {b} not below alpha({m}) = {a}", m + 4);
        }
    }

    #[test]
    fn tail_weight_behavior() {
        assert_eq!(tail_weight(0, 2, SQRT2_INV, 1.0, 1.0, 0).unwrap(), 0.0);
        let mut prev = f64::INFINITY;
        for radius in [0u32, 2, 4, 8, 16, 24] {
            let t = tail_weight(radius, 2, SQRT2_INV, 1.0, 1.0, 1).unwrap();
            assert!(t <= prev);
            prev = t;
        }
        // Geometric decay in the radius, with a slowly varying polynomial
        // factor: consecutive two-step ratios exceed 1 and nearly agree.
        let r8 = tail_weight(8, 2, SQRT2_INV, 1.0, 1.0, 1).unwrap();
        let r10 = tail_weight(10, 2, SQRT2_INV, 1.0, 1.0, 1).unwrap();
        let r12 = tail_weight(12, 2, SQRT2_INV, 1.0, 1.0, 1).unwrap();
        let (q1, q2) = (r8 / r10, r10 / r12);
        assert!(q1 > 1.3 && q2 > 1.3, "ratios {q1:.4} {q2:.4}");
        assert!((q1 - q2).abs() < 0.15 * q1);
    }

    #[test]
    fn tail_weight_rejects_divergent_params() {
        // beta = 1/2 exactly: d^(1-2beta) = 1, the i-series diverges.
        assert!(matches!(
            tail_weight(4, 2, SQRT2_INV, 0.5, 1.0, 1),
            Err(AnalyticError::DivergentTail(_))
        ));
    }

    #[test]
    fn brw_constants_match_closed_forms() {
        let c6 = brw_constants(6, None);
        assert!((c6.m_star - 48f64.sqrt() / 7.0).abs() < 1e-15);
        assert!(c6.subcritical);
        let c5 = brw_constants(5, None);
        assert!((c5.m_star - 40f64.sqrt() / 6.0).abs() < 1e-15);
        assert!(!c5.subcritical);
        for d in 2..=50 {
            let c = brw_constants(d, None);
            assert!(
                (c.m_at_theta - c.m_star).abs() < 1e-12,
                "d={d}: m(theta*) = {} vs m* = {}",
                c.m_at_theta,
                c.m_star
            );
        }
    }

    #[test]
    fn brw_hit_bound_values() {
        let expect = (15.0 / (15.0 - 112f64.sqrt())) * (4.0 / 15.0);
        assert!((brw_hit_bound(14, 1).unwrap() - expect).abs() < 1e-12);
        assert!(brw_hit_bound(14, 0).unwrap() >= 1.0);
        assert!(brw_hit_bound(5, 1).is_err());
        assert!(brw_beta(14) > 0.5);
        assert!(brw_beta(13) < 0.5);
        assert!((brw_beta(13) - 0.4884).abs() < 1e-3);
    }

    #[test]
    fn biggins_dominating_projection() {
        let d = 6u32;
        let df = d as f64;
        let spec = [(-1i64, 1.0 / (df + 1.0)), (1, 2.0 * df / (df + 1.0))];
        let consts = brw_constants(d, None);
        let m = biggins_m(&spec, consts.theta_star);
        assert!((m - consts.m_star).abs() < 1e-12);
        let report = biggins_classify(&spec).unwrap();
        assert_eq!(report.verdict, BigginsVerdict::TransientPositive);
        assert!((report.min_m_positive - consts.m_star).abs() < 1e-9);
    }

    #[test]
    fn biggins_recurrent_cases() {
        // Single offspring +-1 with probability 1/2: m = cosh, > 1 off zero.
        let srw = [(-1i64, 0.5), (1, 0.5)];
        assert!((biggins_m(&srw, 1.0) - 1.0f64.cosh()).abs() < 1e-12);
        let report = biggins_classify(&srw).unwrap();
        assert_eq!(report.verdict, BigginsVerdict::RecurrentAtGrid);
        // Doubling walk: m = 2 cosh > 1 everywhere.
        let doubling = [(-1i64, 1.0), (1, 1.0)];
        let report = biggins_classify(&doubling).unwrap();
        assert_eq!(report.verdict, BigginsVerdict::RecurrentAtGrid);
        assert!(report.min_m_positive > 1.9);
        assert!(biggins_classify(&[]).is_err());
    }

    #[test]
    fn two_point_certificate_round_trip() {
        let cert = certify_two_point(2, 10.0).unwrap();
        assert!(cert.transient_certified);
        assert_eq!(cert.m, Some(19));
        assert_eq!(cert.n, Some(1 << 19));
        let json = serde_json::to_string_pretty(&cert).unwrap();
        let back: Certificate = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cert);
    }

    #[test]
    fn two_type_certificates() {
        let yes = certify_two_type(50, 10.0).unwrap();
        assert!(yes.transient_certified, "beta(50) = {}", brw_beta(50));
        assert!(yes.alpha.unwrap() < 1.0);
        let no = certify_two_type(13, 10.0).unwrap();
        assert!(!no.transient_certified);
        assert!(no.reason.as_deref().unwrap_or("").contains("1/2"));
        let shallow = certify_two_type(5, 10.0).unwrap();
        assert!(!shallow.transient_certified);
    }

    #[test]
    fn mixture_certificate_schedule() {
        let (law, cert) = build_infinite_mean_mixture(2, SQRT2_INV, 1.0, 8).unwrap();
        let alphas = cert.component_alphas.as_ref().unwrap();
        for (idx, &a) in alphas.iter().enumerate() {
            assert!(a < 2f64.powi(-(idx as i32 + 1)), "component {idx}: {a}");
        }
        assert!(cert.alpha.unwrap() < 1.0);
        assert!(cert.transient_certified);
        let ns = cert.n_n.as_ref().unwrap();
        assert!(ns.windows(2).all(|w| w[0] <= w[1]), "island sizes nondecreasing: {ns:?}");
        assert_eq!(law.mean(), 8.0);
        assert!(law.untruncated_mean_infinite());
    }

    #[test]
    fn island_alpha_matches_total_bound_at_powers() {
        for d in [2u32, 3] {
            for m in 1..=6 {
                let p = plain(d, 3.0, m);
                let report = total_bound(&p).unwrap();
                let n = (d as u64).pow(m);
                let alpha = island_alpha(d, 3.0, n, p.lambda, 1.0, 1.0).unwrap();
                let rel = (alpha - report.alpha).abs() / report.alpha;
                assert!(rel < 1e-11, "d={d} m={m}: {alpha} vs {}", report.alpha);
            }
        }
    }
}
