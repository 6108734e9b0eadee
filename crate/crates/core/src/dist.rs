//! Probability vectors over a finite observation alphabet, the divergences
//! between them, and the exp-concave losses used by the estimators.
//!
//! | Function | Value |
//! |----------|-------|
//! | [`l2_sq`] | `Σ (p[m] - q[m])²` |
//! | [`hellinger_sq`] | `Σ (√p[m] - √q[m])²`, in `[0, 2]` |
//! | [`kl`] | `Σ p[m] ln(p[m] / q[m])`, `+∞` on support violation |
//! | [`tv`] | `½ Σ |p[m] - q[m]|` |
//! | [`renyi`] | `ln(Σ p[m]^a q[m]^(1-a)) / (a - 1)` |
//!
//! Everything here is a pure function of immutable values.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries below this are treated as exact zeros.
pub const ZERO_CLAMP: f64 = 1e-15;
/// Largest deviation of the raw sum from one that is silently renormalized.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// A probability vector over `M >= 2` observation symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates and normalizes a probability vector.
    ///
    /// Entries with magnitude below [`ZERO_CLAMP`] become zero. A sum within
    /// [`RENORMALIZE_TOL`] of one is renormalized; anything further off is
    /// rejected.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "need at least 2 symbols, got {}",
                probs.len()
            )));
        }
        let mut probs = probs;
        for (m, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() {
                return Err(Error::InvalidDistribution(format!("entry {m} is {p}")));
            }
            if p.abs() < ZERO_CLAMP {
                *p = 0.0;
            } else if *p < 0.0 {
                return Err(Error::InvalidDistribution(format!("entry {m} is negative ({p})")));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        if sum != 1.0 {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        Ok(Self { probs })
    }

    /// Point mass `e_idx` over `m` symbols.
    pub fn point_mass(m: usize, idx: usize) -> Result<Self> {
        if idx >= m {
            return Err(Error::IndexOutOfRange {
                what: "symbol",
                index: idx,
                len: m,
            });
        }
        let mut probs = vec![0.0; m];
        probs[idx] = 1.0;
        Self::new(probs)
    }

    /// Uniform distribution over `m` symbols.
    pub fn uniform(m: usize) -> Result<Self> {
        Self::new(vec![1.0 / m as f64; m])
    }

    /// `Bern(t)`: mass `t` on symbol 1 and `1 - t` on symbol 0.
    pub fn bernoulli(t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!("Bernoulli parameter {t} not in [0,1]")));
        }
        Self::new(vec![1.0 - t, t])
    }

    /// Convex combination `Σ w_i d_i`. Weights must be nonnegative and sum to one.
    pub fn mixture(weights: &[f64], components: &[&Distribution]) -> Result<Self> {
        if weights.len() != components.len() || components.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        let m = components[0].len();
        let mut out = vec![0.0; m];
        for (w, d) in weights.iter().zip(components) {
            check_dims(components[0], d)?;
            if *w < 0.0 {
                return Err(Error::InvalidParameter(format!("negative mixture weight {w}")));
            }
            for (o, p) in out.iter_mut().zip(&d.probs) {
                *o += w * p;
            }
        }
        Self::new(out)
    }

    /// Product distribution over pairs, indexed `i * other.len() + j`.
    ///
    /// Tiny products are kept rather than clamped, since they can carry all of
    /// the overlap between two nearly disjoint product laws.
    pub fn product(&self, other: &Distribution) -> Distribution {
        let mut probs: Vec<f64> = self
            .probs
            .iter()
            .flat_map(|a| other.probs.iter().map(move |b| a * b))
            .collect();
        let sum: f64 = probs.iter().sum();
        if sum != 1.0 {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, m: usize) -> f64 {
        self.probs[m]
    }

    /// Draws one symbol by inverse-CDF from a uniform variate in `[0, 1)`.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last = 0;
        for (m, p) in self.probs.iter().enumerate() {
            if *p > 0.0 {
                last = m;
                acc += p;
                if u < acc {
                    return m;
                }
            }
        }
        last
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sample_with(rng.gen::<f64>())
    }
}

impl TryFrom<Vec<f64>> for Distribution {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Distribution> for Vec<f64> {
    fn from(d: Distribution) -> Self {
        d.probs
    }
}

fn check_dims(p: &Distribution, q: &Distribution) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(())
}

/// Which divergence to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DivergenceKind {
    L2Sq,
    Kl,
    HellingerSq,
    Tv,
    Renyi(f64),
}

impl DivergenceKind {
    pub fn name(&self) -> String {
        match self {
            DivergenceKind::L2Sq => "l2sq".into(),
            DivergenceKind::Kl => "kl".into(),
            DivergenceKind::HellingerSq => "hellinger".into(),
            DivergenceKind::Tv => "tv".into(),
            DivergenceKind::Renyi(a) => format!("renyi({a})"),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(
            self,
            DivergenceKind::L2Sq | DivergenceKind::HellingerSq | DivergenceKind::Tv
        )
    }
}

/// Evaluates `kind` on `(p, q)`.
pub fn divergence(kind: DivergenceKind, p: &Distribution, q: &Distribution) -> Result<f64> {
    match kind {
        DivergenceKind::L2Sq => l2_sq(p, q),
        DivergenceKind::Kl => kl(p, q),
        DivergenceKind::HellingerSq => hellinger_sq(p, q),
        DivergenceKind::Tv => tv(p, q),
        DivergenceKind::Renyi(order) => renyi(order, p, q),
    }
}

pub fn l2_sq(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_dims(p, q)?;
    Ok(raw_l2_sq(&p.probs, &q.probs))
}

pub fn hellinger_sq(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_dims(p, q)?;
    Ok(raw_hellinger_sq(&p.probs, &q.probs))
}

/// Kullback-Leibler divergence. Returns `f64::INFINITY` when `p` puts mass
/// outside the support of `q`.
pub fn kl(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_dims(p, q)?;
    let mut acc = 0.0;
    for (a, b) in p.probs.iter().zip(&q.probs) {
        if *a == 0.0 {
            continue;
        }
        if *b == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += a * (a / b).ln();
    }
    Ok(acc.max(0.0))
}

pub fn tv(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_dims(p, q)?;
    Ok(raw_tv(&p.probs, &q.probs))
}

/// Rényi divergence of the given order.
pub fn renyi(order: f64, p: &Distribution, q: &Distribution) -> Result<f64> {
    if !(order > 0.0 && order.is_finite() && order != 1.0) {
        return Err(Error::InvalidOrder(order));
    }
    check_dims(p, q)?;
    let mut s = 0.0;
    for (a, b) in p.probs.iter().zip(&q.probs) {
        if *a == 0.0 {
            continue;
        }
        if *b == 0.0 {
            if order > 1.0 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        s += (order * a.ln() + (1.0 - order) * b.ln()).exp();
    }
    if s <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((s.ln() / (order - 1.0)).max(0.0))
}

pub(crate) fn raw_l2_sq(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub(crate) fn raw_hellinger_sq(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| {
            let d = a.max(0.0).sqrt() - b.max(0.0).sqrt();
            d * d
        })
        .sum()
}

pub(crate) fn raw_tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Loss family used by the exponential-weights estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    /// `-ln p[obs]`
    Log,
    /// `||e_obs - p||²`
    Brier,
}

impl LossKind {
    /// Exp-concavity constant of the loss: 1 for log-loss, 1/4 for Brier.
    pub fn exp_concavity(self) -> f64 {
        match self {
            LossKind::Log => 1.0,
            LossKind::Brier => 0.25,
        }
    }
}

/// A loss together with the exp-concavity constant used as learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub exp_concavity_alpha: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        Self {
            kind,
            exp_concavity_alpha: kind.exp_concavity(),
        }
    }

    pub fn log() -> Self {
        Self::new(LossKind::Log)
    }

    pub fn brier() -> Self {
        Self::new(LossKind::Brier)
    }

    /// A spec with an arbitrary `alpha`, bypassing the kind/alpha invariant.
    /// Only useful for probing the exp-concavity checker.
    pub fn forced(kind: LossKind, alpha: f64) -> Self {
        Self {
            kind,
            exp_concavity_alpha: alpha,
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.exp_concavity_alpha == self.kind.exp_concavity()
    }
}

/// Loss of predicting `p` when `obs` is observed.
pub fn loss(spec: LossSpec, obs: usize, p: &Distribution) -> Result<f64> {
    if obs >= p.len() {
        return Err(Error::ObservationOutOfRange {
            obs,
            size: p.len(),
        });
    }
    Ok(raw_loss(spec.kind, obs, &p.probs))
}

pub(crate) fn raw_loss(kind: LossKind, obs: usize, p: &[f64]) -> f64 {
    match kind {
        LossKind::Log => {
            let m = p[obs];
            if m <= 0.0 {
                f64::INFINITY
            } else {
                -m.ln()
            }
        }
        LossKind::Brier => p
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let e = if k == obs { 1.0 } else { 0.0 };
                (e - v) * (e - v)
            })
            .sum(),
    }
}

/// Uniform draw from the probability simplex of dimension `m`.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..m).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Uniform draw from the simplex, returned as a [`Distribution`].
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Distribution {
    Distribution::new(random_simplex(rng, m)).expect("simplex draw is a distribution")
}

/// Result of a sampled property probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub passed: bool,
    pub trials: usize,
    /// Largest observed violation (positive means the property failed by that much).
    pub worst_violation: f64,
}

const EXP_CONCAVITY_SLACK: f64 = 1e-12;

/// Samples random `(obs, p, q, λ)` and checks Jensen's inequality for
/// `exp(-α ℓ(obs, ·))`. Passes when no violation exceeds `1e-12`.
pub fn check_exp_concavity(spec: LossSpec, trials: usize, rng_seed: u64) -> ProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let alpha = spec.exp_concavity_alpha;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials.max(1) {
        let m = rng.gen_range(2..=5);
        let obs = rng.gen_range(0..m);
        let p = random_simplex(&mut rng, m);
        let q = random_simplex(&mut rng, m);
        let lam: f64 = rng.gen();
        let mix: Vec<f64> = p.iter().zip(&q).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
        let f = |v: &[f64]| (-alpha * raw_loss(spec.kind, obs, v)).exp();
        let lhs = f(&mix);
        let rhs = lam * f(&p) + (1.0 - lam) * f(&q);
        worst = worst.max(rhs - lhs);
    }
    ProbeReport {
        passed: worst <= EXP_CONCAVITY_SLACK,
        trials: trials.max(1),
        worst_violation: worst,
    }
}

/// The two Bregman divergences on the simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BregmanKind {
    L2Sq,
    Kl,
}

const THREE_POINT_TOL: f64 = 1e-10;

/// Checks `E_P[L(p,q1) - L(p,q2)] = L(E p, q1) - L(E p, q2)` on random finite
/// mixtures `P`. KL draws are mixed with 10% uniform mass to keep supports
/// away from zero.
pub fn bregman_three_point_check(kind: BregmanKind, trials: usize, rng_seed: u64) -> ProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials.max(1) {
        let m = rng.gen_range(2..=5);
        let n = rng.gen_range(1..=5);
        let draw = |rng: &mut ChaCha8Rng| -> Distribution {
            let mut v = random_simplex(rng, m);
            if kind == BregmanKind::Kl {
                v.iter_mut().for_each(|x| *x = 0.9 * *x + 0.1 / m as f64);
            }
            Distribution::new(v).expect("valid draw")
        };
        let points: Vec<Distribution> = (0..n).map(|_| draw(&mut rng)).collect();
        let weights = if n == 1 { vec![1.0] } else { random_simplex(&mut rng, n) };
        let q1 = draw(&mut rng);
        let q2 = draw(&mut rng);
        let err = three_point_error(kind, &points, &weights, &q1, &q2);
        worst = worst.max(err);
    }
    ProbeReport {
        passed: worst <= THREE_POINT_TOL,
        trials: trials.max(1),
        worst_violation: worst,
    }
}

/// Absolute difference between the two sides of the three-point identity.
pub fn three_point_error(
    kind: BregmanKind,
    points: &[Distribution],
    weights: &[f64],
    q1: &Distribution,
    q2: &Distribution,
) -> f64 {
    let div = |p: &Distribution, q: &Distribution| match kind {
        BregmanKind::L2Sq => l2_sq(p, q).expect("same dims"),
        BregmanKind::Kl => kl(p, q).expect("same dims"),
    };
    let lhs: f64 = points
        .iter()
        .zip(weights)
        .map(|(p, w)| w * (div(p, q1) - div(p, q2)))
        .sum();
    let refs: Vec<&Distribution> = points.iter().collect();
    let mean = Distribution::mixture(weights, &refs).expect("valid mixture");
    let rhs = div(&mean, q1) - div(&mean, q2);
    (lhs - rhs).abs()
}
