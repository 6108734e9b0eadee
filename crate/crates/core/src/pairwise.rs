//! Two-hypothesis testers and the elimination meta-predictor that lifts them
//! to a finite class.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{DivergenceKind, Distribution};
use crate::error::{Error, Result};
use crate::hypothesis::HypothesisClass;
use crate::kernel::{gap, min_pairwise_gap, NoiseKernel};
use crate::predictors::check_compat;

/// Smallest `n` with `γ_1 + … + γ_n ≥ 2 ln(2/δ)`.
pub fn budget(gammas: &[f64], delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta {delta} not in (0, 1)")));
    }
    if let Some(g) = gammas.iter().find(|g| !(**g >= 0.0)) {
        return Err(Error::InvalidParameter(format!("negative or NaN gap {g}")));
    }
    let required = 2.0 * (2.0 / delta).ln();
    let mut total = 0.0;
    for (n, g) in gammas.iter().enumerate() {
        total += g;
        if total >= required {
            return Ok(n + 1);
        }
    }
    Err(Error::InsufficientGap { total, required })
}

/// `budget` for a constant gap `gamma` with no horizon limit.
pub fn constant_budget(gamma: f64, delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta {delta} not in (0, 1)")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InsufficientGap {
            total: 0.0,
            required: 2.0 * (2.0 / delta).ln(),
        });
    }
    let required = 2.0 * (2.0 / delta).ln();
    let mut n = (required / gamma).ceil().max(1.0) as usize;
    while (n as f64) * gamma < required {
        n += 1;
    }
    while n > 1 && ((n - 1) as f64) * gamma >= required {
        n -= 1;
    }
    Ok(n)
}

/// Elimination threshold `C = ⌈2 ln(4K/δ) / γ_H⌉`, the constant-gap budget
/// at confidence `δ / (2K)`.
pub fn meta_threshold(k: usize, delta: f64, gamma_h: f64) -> Result<usize> {
    constant_budget(gamma_h, delta / (2.0 * k as f64))
}

/// Which hypothesis of a pair a tester currently favours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TesterKind {
    /// Likelihood-ratio test between per-step least-favourable pairs,
    /// frozen after `budget` informative steps.
    LeCamBirge,
    /// Majority vote on the relabelled observations, never frozen.
    EmpiricalMean,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TesterState {
    LeCamBirge { budget: usize, steps: usize, lr_log: f64 },
    EmpiricalMean { count: usize, sum: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepOutcome {
    Updated,
    Decided(Side),
    /// The tester had already decided; the step changed nothing.
    Ignored,
}

/// A sequential test between two hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairTester {
    state: TesterState,
    decided: Option<Side>,
    ignored_steps: usize,
}

impl PairTester {
    pub fn lecam_birge(budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(Error::InvalidParameter("tester budget must be >= 1".into()));
        }
        Ok(Self {
            state: TesterState::LeCamBirge {
                budget,
                steps: 0,
                lr_log: 0.0,
            },
            decided: None,
            ignored_steps: 0,
        })
    }

    pub fn empirical_mean() -> Self {
        Self {
            state: TesterState::EmpiricalMean { count: 0, sum: 0 },
            decided: None,
            ignored_steps: 0,
        }
    }

    pub fn new(kind: TesterKind, budget: usize) -> Result<Self> {
        match kind {
            TesterKind::LeCamBirge => Self::lecam_birge(budget),
            TesterKind::EmpiricalMean => Ok(Self::empirical_mean()),
        }
    }

    pub fn state(&self) -> &TesterState {
        &self.state
    }

    pub fn decided(&self) -> Option<Side> {
        self.decided
    }

    /// Number of steps received after a frozen decision.
    pub fn ignored_steps(&self) -> usize {
        self.ignored_steps
    }

    /// The side currently favoured; the first hypothesis before any decision.
    pub fn current_side(&self) -> Side {
        self.decided.unwrap_or(Side::First)
    }

    /// Adds `ln p*[obs] - ln q*[obs]` to the log-likelihood ratio; after
    /// `budget` steps decides `First` iff the ratio is `>= 0`.
    pub fn lecam_birge_step(&mut self, p_star: &Distribution, q_star: &Distribution, obs: usize) -> Result<StepOutcome> {
        if p_star.len() != q_star.len() {
            return Err(Error::DimensionMismatch {
                left: p_star.len(),
                right: q_star.len(),
            });
        }
        if obs >= p_star.len() {
            return Err(Error::ObservationOutOfRange {
                obs,
                size: p_star.len(),
            });
        }
        let decided = self.decided;
        let TesterState::LeCamBirge { budget, steps, lr_log } = &mut self.state else {
            return Err(Error::Unsupported("likelihood-ratio step on an empirical-mean tester".into()));
        };
        if decided.is_some() {
            self.ignored_steps += 1;
            return Ok(StepOutcome::Ignored);
        }
        let (p, q) = (p_star.get(obs), q_star.get(obs));
        let inc = match (p > 0.0, q > 0.0) {
            (false, false) => 0.0,
            (true, false) => f64::INFINITY,
            (false, true) => f64::NEG_INFINITY,
            (true, true) => p.ln() - q.ln(),
        };
        if lr_log.is_finite() {
            *lr_log += inc;
        }
        *steps += 1;
        if *steps >= *budget {
            let side = if *lr_log >= 0.0 { Side::First } else { Side::Second };
            self.decided = Some(side);
            return Ok(StepOutcome::Decided(side));
        }
        Ok(StepOutcome::Updated)
    }

    /// Records one relabelled observation (`bit` is true when it matches the
    /// second hypothesis) and returns the re-evaluated decision.
    pub fn empirical_mean_step(&mut self, bit: bool) -> Result<Side> {
        let TesterState::EmpiricalMean { count, sum } = &mut self.state else {
            return Err(Error::Unsupported("empirical-mean step on a likelihood-ratio tester".into()));
        };
        *count += 1;
        *sum += usize::from(bit);
        let side = if 2 * *sum <= *count { Side::First } else { Side::Second };
        self.decided = Some(side);
        Ok(side)
    }
}

/// `v^i[j]`: 1 iff the two hypotheses disagree and the tester did not side
/// with `h_i`.
pub fn surrogate_loss(tester_prediction: usize, h_i_label: usize, h_j_label: usize) -> u8 {
    u8::from(h_i_label != h_j_label && tester_prediction != h_i_label)
}

/// `Bern(1/2 - ε)` and `Bern(1/2 + ε)` with squared Hellinger distance
/// exactly `gamma_h`.
pub fn hellinger_pair(gamma_h: f64) -> Result<(Distribution, Distribution)> {
    if !(gamma_h > 0.0 && gamma_h <= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "H² = {gamma_h} is not attainable by a binary pair; need (0, 2]"
        )));
    }
    let c = (2.0 - gamma_h) / 4.0;
    let eps = (0.25 - c * c).max(0.0).sqrt().min(0.5);
    Ok((Distribution::bernoulli(0.5 - eps)?, Distribution::bernoulli(0.5 + eps)?))
}

/// Least-favourable pairs `(p*, q*)` per feature and ordered label pair.
#[derive(Debug, Clone)]
struct PairCache {
    /// `[x][a][b]`, filled for `a < b`.
    table: Vec<Vec<Vec<Option<(Distribution, Distribution)>>>>,
    featureless: bool,
}

impl PairCache {
    fn build(hclass: &HypothesisClass, kernel: &NoiseKernel) -> Result<Self> {
        let n = kernel.num_labels();
        let featureless = kernel.num_features().is_none();
        let nf = if featureless { 1 } else { hclass.num_features() };
        let mut table = vec![vec![vec![None; n]; n]; nf];
        for (x, row) in table.iter_mut().enumerate() {
            let sets = (0..n).map(|y| kernel.kernel_set(x, y)).collect::<Result<Vec<_>>>()?;
            for a in 0..n {
                for b in (a + 1)..n {
                    let r = gap(&sets[a], &sets[b], DivergenceKind::HellingerSq)?;
                    row[a][b] = Some(r.argmin_pair);
                }
            }
        }
        Ok(Self { table, featureless })
    }

    fn pair(&self, x: usize, a: usize, b: usize) -> (&Distribution, &Distribution) {
        let x = if self.featureless { 0 } else { x };
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (p, q) = self.table[x][lo][hi].as_ref().expect("pair cached for a != b");
        if a < b {
            (p, q)
        } else {
            (q, p)
        }
    }
}

/// Least-favourable pair source: cached for static kernels, recomputed
/// per round for time-varying ones.
#[derive(Debug, Clone)]
enum PairSource {
    Cached(Arc<PairCache>),
    PerStep(Arc<NoiseKernel>),
}

impl PairSource {
    fn new(hclass: &HypothesisClass, kernel: &NoiseKernel, kind: TesterKind) -> Result<Self> {
        if kind == TesterKind::EmpiricalMean || kernel.is_time_varying() {
            return Ok(PairSource::PerStep(Arc::new(kernel.clone())));
        }
        Ok(PairSource::Cached(Arc::new(PairCache::build(hclass, kernel)?)))
    }

    fn with_pair<T>(
        &self,
        step: usize,
        x: usize,
        a: usize,
        b: usize,
        f: impl FnOnce(&Distribution, &Distribution) -> Result<T>,
    ) -> Result<T> {
        match self {
            PairSource::Cached(c) => {
                let (p, q) = c.pair(x, a, b);
                f(p, q)
            }
            PairSource::PerStep(k) => {
                let r = gap(&k.kernel_set_at(step, x, a)?, &k.kernel_set_at(step, x, b)?, DivergenceKind::HellingerSq)?;
                f(&r.argmin_pair.0, &r.argmin_pair.1)
            }
        }
    }
}

/// Feeds one disagreement-step observation to a tester for labels `(a, b)`.
fn feed(
    tester: &mut PairTester,
    kind: TesterKind,
    pairs: &PairSource,
    step: usize,
    x: usize,
    (a, b): (usize, usize),
    obs: usize,
) -> Result<()> {
    match kind {
        TesterKind::LeCamBirge => {
            pairs.with_pair(step, x, a, b, |p, q| tester.lecam_birge_step(p, q, obs))?;
        }
        TesterKind::EmpiricalMean => {
            tester.empirical_mean_step(obs == b)?;
        }
    }
    Ok(())
}

/// Smallest squared Hellinger gap over the class's features.
pub fn hellinger_gap(hclass: &HypothesisClass, kernel: &NoiseKernel) -> Result<f64> {
    let features: Vec<usize> = match kernel.num_features() {
        Some(_) => (0..hclass.num_features()).collect(),
        None => vec![0],
    };
    Ok(min_pairwise_gap(kernel, &features, DivergenceKind::HellingerSq)?.report.value)
}

/// Parameters of the elimination meta-predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetaConfig {
    pub tester: TesterKind,
    pub delta: f64,
    /// Overrides the threshold `C` derived from the Hellinger gap.
    pub threshold: Option<usize>,
}

impl MetaConfig {
    pub fn new(tester: TesterKind, delta: f64) -> Self {
        Self {
            tester,
            delta,
            threshold: None,
        }
    }
}

/// Elimination over a finite class driven by all pairwise testers.
///
/// Each round samples a survivor uniformly and predicts its label. After
/// the observation, every disagreeing pair charges a surrogate loss to the
/// side its tester did not favour before the tester itself is updated.
/// Hypotheses whose worst cumulative surrogate exceeds `C` are then dropped.
#[derive(Debug, Clone)]
pub struct MetaPredictor {
    hclass: Arc<HypothesisClass>,
    kind: TesterKind,
    pairs: PairSource,
    threshold: usize,
    survivors: Vec<usize>,
    testers: Vec<PairTester>,
    cum_surrogate: Vec<u32>,
    row_max: Vec<u32>,
    emptied_at: Option<usize>,
}

impl MetaPredictor {
    pub fn new(hclass: &HypothesisClass, kernel: &NoiseKernel, config: MetaConfig) -> Result<Self> {
        check_compat(hclass, kernel)?;
        let k = hclass.len();
        let threshold = match config.threshold {
            Some(c) => c,
            None => {
                let g = hellinger_gap(hclass, kernel)?;
                meta_threshold(k, config.delta, g)?
            }
        };
        let tester = PairTester::new(config.tester, threshold.max(1))?;
        Ok(Self {
            hclass: Arc::new(hclass.clone()),
            kind: config.tester,
            pairs: PairSource::new(hclass, kernel, config.tester)?,
            threshold,
            survivors: (0..k).collect(),
            testers: vec![tester; k * k],
            cum_surrogate: vec![0; k * k],
            row_max: vec![0; k],
            emptied_at: None,
        })
    }

    /// The elimination threshold `C`.
    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn survivors(&self) -> &[usize] {
        &self.survivors
    }

    /// `Σ_r v_r^i[j]`.
    pub fn cum_surrogate(&self, i: usize, j: usize) -> u32 {
        self.cum_surrogate[i * self.hclass.len() + j]
    }

    /// Tester for the pair `i < j`.
    pub fn tester(&self, i: usize, j: usize) -> &PairTester {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        &self.testers[lo * self.hclass.len() + hi]
    }

    /// Round at which elimination would have emptied the survivor set.
    pub fn emptied_at(&self) -> Option<usize> {
        self.emptied_at
    }

    /// Whether the truth's worst cumulative surrogate stayed within `C`,
    /// i.e. no tester involving it erred more than `C` times.
    pub fn guarantee_event(&self, truth: usize) -> bool {
        self.row_max[truth] as usize <= self.threshold
    }

    pub fn predict(&self, _step: usize, x: usize, draw: u64) -> Result<usize> {
        let n = self.survivors.len() as u128;
        let idx = ((draw as u128 * n) >> 64) as usize;
        Ok(self.hclass.label(self.survivors[idx], x))
    }

    pub fn observe(&mut self, step: usize, x: usize, obs: usize) -> Result<()> {
        let k = self.hclass.len();
        for i in 0..k {
            let a = self.hclass.label(i, x);
            for j in (i + 1)..k {
                let b = self.hclass.label(j, x);
                if a == b {
                    continue;
                }
                let t = &mut self.testers[i * k + j];
                let pred = match t.current_side() {
                    Side::First => a,
                    Side::Second => b,
                };
                for (row, col, own, other) in [(i, j, a, b), (j, i, b, a)] {
                    if surrogate_loss(pred, own, other) == 1 {
                        let c = &mut self.cum_surrogate[row * k + col];
                        *c += 1;
                        self.row_max[row] = self.row_max[row].max(*c);
                    }
                }
                feed(t, self.kind, &self.pairs, step, x, (a, b), obs)?;
            }
        }
        let c = self.threshold as u32;
        let next: Vec<usize> = self.survivors.iter().copied().filter(|&i| self.row_max[i] <= c).collect();
        if next.is_empty() {
            self.emptied_at.get_or_insert(step);
        } else {
            self.survivors = next;
        }
        Ok(())
    }
}

/// A single pairwise tester used directly as a predictor for a class of
/// exactly two hypotheses.
#[derive(Debug, Clone)]
pub struct PairTestPredictor {
    hclass: Arc<HypothesisClass>,
    kind: TesterKind,
    pairs: PairSource,
    tester: PairTester,
}

impl PairTestPredictor {
    /// The likelihood-ratio variant decides after the constant-gap budget at
    /// confidence `delta`; the empirical-mean variant ignores `delta`.
    pub fn new(hclass: &HypothesisClass, kernel: &NoiseKernel, kind: TesterKind, delta: f64) -> Result<Self> {
        check_compat(hclass, kernel)?;
        if hclass.len() != 2 {
            return Err(Error::InvalidParameter(format!(
                "pair-test needs exactly 2 hypotheses, got {}",
                hclass.len()
            )));
        }
        let tester = match kind {
            TesterKind::LeCamBirge => PairTester::lecam_birge(constant_budget(hellinger_gap(hclass, kernel)?, delta)?)?,
            TesterKind::EmpiricalMean => PairTester::empirical_mean(),
        };
        Ok(Self {
            hclass: Arc::new(hclass.clone()),
            kind,
            pairs: PairSource::new(hclass, kernel, kind)?,
            tester,
        })
    }

    pub fn tester(&self) -> &PairTester {
        &self.tester
    }

    pub fn predict(&self, x: usize) -> usize {
        match self.tester.current_side() {
            Side::First => self.hclass.label(0, x),
            Side::Second => self.hclass.label(1, x),
        }
    }

    pub fn observe(&mut self, step: usize, x: usize, obs: usize) -> Result<()> {
        let (a, b) = (self.hclass.label(0, x), self.hclass.label(1, x));
        if a != b {
            feed(&mut self.tester, self.kind, &self.pairs, step, x, (a, b), obs)?;
        }
        Ok(())
    }
}

/// Runs one likelihood-ratio tester to its decision between labels `a` and
/// `b` at feature `x`, with the adversary playing the truth's member of the
/// least-favourable pair. Returns the decision.
pub fn run_tester_trial<R: Rng + ?Sized>(
    kernel: &NoiseKernel,
    x: usize,
    (a, b): (usize, usize),
    truth: Side,
    budget: usize,
    rng: &mut R,
) -> Result<Side> {
    let r = gap(&kernel.kernel_set(x, a)?, &kernel.kernel_set(x, b)?, DivergenceKind::HellingerSq)?;
    let (p, q) = r.argmin_pair;
    let law = if truth == Side::First { &p } else { &q };
    let mut t = PairTester::lecam_birge(budget)?;
    loop {
        let obs = law.sample(rng);
        if let StepOutcome::Decided(side) = t.lecam_birge_step(&p, &q, obs)? {
            return Ok(side);
        }
    }
}

/// Monte Carlo decision-error rate of [`run_tester_trial`] with a uniformly
/// drawn truth. Run `i` uses seed `seed0 + i`.
pub fn tester_error_rate(
    kernel: &NoiseKernel,
    x: usize,
    labels: (usize, usize),
    budget: usize,
    runs: usize,
    seed0: u64,
) -> Result<f64> {
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be >= 1".into()));
    }
    let errors = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed0.wrapping_add(i as u64));
            let truth = if rng.gen::<bool>() { Side::First } else { Side::Second };
            run_tester_trial(kernel, x, labels, truth, budget, &mut rng).map(|d| usize::from(d != truth))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(errors.iter().sum::<usize>() as f64 / runs as f64)
}

/// Exact Bayes risk of predicting which of two constant hypotheses
/// (label 0 with law `q0`, label 1 with law `q1`) generated `horizon`
/// observations, under a uniform prior. Enumerates every history, so
/// `M^horizon` must not exceed 256.
pub fn bayes_oracle(q0: &Distribution, q1: &Distribution, horizon: usize) -> Result<f64> {
    if q0.len() != q1.len() {
        return Err(Error::DimensionMismatch {
            left: q0.len(),
            right: q1.len(),
        });
    }
    let m = q0.len();
    let histories = (m as f64).powi(horizon as i32);
    if horizon == 0 || histories > 256.0 {
        return Err(Error::InstanceTooLarge(format!(
            "{m}^{horizon} histories; the exhaustive oracle allows at most 256"
        )));
    }
    // Likelihoods of every history of the current length under each hypothesis.
    let mut l0 = vec![1.0f64];
    let mut l1 = vec![1.0f64];
    let mut risk = 0.0;
    for _ in 0..horizon {
        risk += l0.iter().zip(&l1).map(|(a, b)| 0.5 * a.min(*b)).sum::<f64>();
        let extend = |l: &[f64], q: &Distribution| -> Vec<f64> {
            l.iter().flat_map(|v| q.probs().iter().map(move |p| v * p)).collect()
        };
        l0 = extend(&l0, q0);
        l1 = extend(&l1, q1);
    }
    Ok(risk)
}
