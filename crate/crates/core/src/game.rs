//! The online game: nature fixes a hypothesis, the adversary reveals
//! features and noisy observations, the predictor guesses labels.
//!
//! Every run draws from one seeded ChaCha8 generator in a fixed order:
//!
//! 1. the ground-truth index, once, when the truth rule is `Uniform`;
//! 2. per round, the feature when the feature rule is `UniformRandom`;
//! 3. per round, the noise draws (mixture weights, if any, then the observation);
//! 4. per round, exactly one `u64` handed to the predictor.
//!
//! The fixed count of predictor draws keeps noise sequences aligned across
//! predictors and horizons for a given seed.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{DivergenceKind, Distribution};
use crate::error::{Error, Result};
pub use crate::hypothesis::HypothesisClass;
use crate::kernel::{gap, sample_from, KernelSet, NoiseKernel, SampleStrategy};
use crate::pairwise::{hellinger_pair, MetaConfig, MetaPredictor, PairTestPredictor, TesterKind};
use crate::predictors::{EwaPredictor, Predictor};

/// How the adversary picks the feature of each round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FeatureRule {
    /// Cycles through the list.
    FixedSequence(Vec<usize>),
    /// Plays each listed feature for `epoch_len` consecutive rounds, cycling.
    EpochConstant { features: Vec<usize>, epoch_len: usize },
    /// Plays the feature on which the hypotheses still consistent with the
    /// truth disagree most. A hypothesis stops counting as consistent once
    /// a feature where it differs from the truth has been shown `patience`
    /// times; when only the truth is left the pool resets.
    MaxDisagreement { patience: usize },
    /// Uniform over the class's features, one draw per round.
    UniformRandom,
}

/// How the adversary picks the observation law inside `Q_y^x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum NoiseRule {
    /// The generator of `Q_y^x` nearest to the closest point of the nearest
    /// other label's set.
    LeastFavorable,
    Vertex(usize),
    UniformMixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TruthRule {
    Fixed(usize),
    /// Drawn uniformly at the start of each run.
    Uniform,
}

/// An oblivious adversary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdversaryStrategy {
    pub feature_rule: FeatureRule,
    pub noise_rule: NoiseRule,
    pub ground_truth: TruthRule,
}

/// Predictor selection by name plus parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PredictorSpec {
    L2Reduction,
    LoglossRr,
    HellingerSingleton,
    PairwiseMeta(MetaConfig),
    PairTest { tester: TesterKind, delta: f64 },
}

impl PredictorSpec {
    pub const NAMES: [&'static str; 5] = [
        "l2-reduction",
        "logloss-rr",
        "hellinger-singleton",
        "pairwise-meta",
        "pair-test",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PredictorSpec::L2Reduction => "l2-reduction",
            PredictorSpec::LoglossRr => "logloss-rr",
            PredictorSpec::HellingerSingleton => "hellinger-singleton",
            PredictorSpec::PairwiseMeta(_) => "pairwise-meta",
            PredictorSpec::PairTest { .. } => "pair-test",
        }
    }

    /// Builds a fresh predictor, doing all per-class setup (gap pairs,
    /// thresholds) once.
    pub fn build(&self, hclass: &HypothesisClass, kernel: &NoiseKernel) -> Result<Predictor> {
        Ok(match self {
            PredictorSpec::L2Reduction => Predictor::L2Reduction(EwaPredictor::l2_reduction(hclass, kernel)?),
            PredictorSpec::LoglossRr => Predictor::LoglossArgmax(EwaPredictor::logloss_argmax(hclass, kernel)?),
            PredictorSpec::HellingerSingleton => {
                Predictor::HellingerSingleton(EwaPredictor::hellinger_singleton(hclass, kernel)?)
            }
            PredictorSpec::PairwiseMeta(cfg) => Predictor::PairwiseMeta(Box::new(MetaPredictor::new(hclass, kernel, *cfg)?)),
            PredictorSpec::PairTest { tester, delta } => {
                Predictor::PairTest(PairTestPredictor::new(hclass, kernel, *tester, *delta)?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub feature: usize,
    pub true_label: usize,
    pub obs: usize,
    pub predicted_label: usize,
    pub error: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameTranscript {
    pub steps: Vec<StepRecord>,
    pub cum_errors: usize,
    pub seed: u64,
    pub truth: usize,
    pub predictor: String,
    pub kernel: String,
    /// `None` for predictors without a high-probability event.
    pub guarantee_event_held: Option<bool>,
}

/// What an observer sees in each round, after the prediction and before the
/// predictor learns the observation.
pub struct RoundView<'a> {
    pub step: usize,
    pub feature: usize,
    pub true_label: usize,
    pub noise_law: &'a Distribution,
    pub obs: usize,
    pub predicted_label: usize,
    pub predictor: &'a Predictor,
}

/// Index of the feature with the most disagreeing pairs in `subset`, ties
/// to the lowest index.
pub fn max_disagreement_feature(hclass: &HypothesisClass, subset: &[usize]) -> usize {
    let mut best = (0, 0);
    for x in 0..hclass.num_features() {
        let c = hclass.disagreeing_pairs(subset, x);
        if c > best.1 {
            best = (x, c);
        }
    }
    best.0
}

struct FeaturePlayer<'a> {
    rule: &'a FeatureRule,
    hclass: &'a HypothesisClass,
    truth: usize,
    pool: Vec<usize>,
    shown: Vec<usize>,
}

impl<'a> FeaturePlayer<'a> {
    fn new(rule: &'a FeatureRule, hclass: &'a HypothesisClass, truth: usize) -> Self {
        Self {
            rule,
            hclass,
            truth,
            pool: (0..hclass.len()).collect(),
            shown: vec![0; hclass.num_features()],
        }
    }

    fn next<R: Rng>(&mut self, t: usize, rng: &mut R) -> usize {
        match self.rule {
            FeatureRule::FixedSequence(xs) => xs[t % xs.len()],
            FeatureRule::EpochConstant { features, epoch_len } => features[(t / epoch_len) % features.len()],
            FeatureRule::UniformRandom => rng.gen_range(0..self.hclass.num_features()),
            FeatureRule::MaxDisagreement { patience } => {
                if self.pool.len() <= 1 {
                    self.pool = (0..self.hclass.len()).collect();
                    self.shown.iter_mut().for_each(|c| *c = 0);
                }
                let x = max_disagreement_feature(self.hclass, &self.pool);
                self.shown[x] += 1;
                if self.shown[x] >= *patience {
                    let y = self.hclass.label(self.truth, x);
                    let h = self.hclass;
                    self.pool.retain(|&k| h.label(k, x) == y);
                }
                x
            }
        }
    }
}

fn validate_adversary(
    adv: &AdversaryStrategy,
    hclass: &HypothesisClass,
    kernel: &NoiseKernel,
    horizon: usize,
) -> Result<()> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon T must be >= 1".into()));
    }
    let f = hclass.num_features();
    let check_features = |xs: &[usize]| -> Result<()> {
        if xs.is_empty() {
            return Err(Error::InvalidParameter("feature list is empty".into()));
        }
        if let Some(&x) = xs.iter().find(|&&x| x >= f) {
            return Err(Error::IndexOutOfRange {
                what: "feature",
                index: x,
                len: f,
            });
        }
        Ok(())
    };
    match &adv.feature_rule {
        FeatureRule::FixedSequence(xs) => check_features(xs)?,
        FeatureRule::EpochConstant { features, epoch_len } => {
            check_features(features)?;
            if *epoch_len == 0 {
                return Err(Error::InvalidParameter("epoch length must be >= 1".into()));
            }
        }
        FeatureRule::MaxDisagreement { patience } => {
            if *patience == 0 {
                return Err(Error::InvalidParameter("patience must be >= 1".into()));
            }
        }
        FeatureRule::UniformRandom => {}
    }
    if let TruthRule::Fixed(k) = adv.ground_truth {
        if k >= hclass.len() {
            return Err(Error::IndexOutOfRange {
                what: "hypothesis",
                index: k,
                len: hclass.len(),
            });
        }
    }
    crate::predictors::check_compat(hclass, kernel)?;
    if let NoiseKernel::Tsybakov { lambdas, .. } = kernel {
        if lambdas.len() < horizon {
            return Err(Error::InvalidParameter(format!(
                "Tsybakov sequence has {} steps, horizon is {horizon}",
                lambdas.len()
            )));
        }
    }
    Ok(())
}

/// Picks the observation law for label `y` at `x` in round `step`.
struct NoisePlayer<'a> {
    kernel: &'a NoiseKernel,
    rule: &'a NoiseRule,
    /// Least-favourable laws per `(x, y)` for static kernels.
    cache: Vec<Option<Distribution>>,
}

impl<'a> NoisePlayer<'a> {
    fn new(kernel: &'a NoiseKernel, rule: &'a NoiseRule, features: usize) -> Self {
        let nf = kernel.num_features().map_or(1, |_| features);
        Self {
            kernel,
            rule,
            cache: vec![None; nf * kernel.num_labels()],
        }
    }

    fn least_favorable(&self, step: usize, x: usize, y: usize, set: &KernelSet) -> Result<Distribution> {
        let mut best: Option<(f64, Distribution)> = None;
        for y2 in (0..self.kernel.num_labels()).filter(|&v| v != y) {
            let other = self.kernel.kernel_set_at(step, x, y2)?;
            let r = gap(set, &other, DivergenceKind::L2Sq)?;
            if best.as_ref().is_none_or(|b| r.value < b.0) {
                best = Some((r.value, r.argmin_pair.1));
            }
        }
        let target = best.expect("kernels have at least two labels").1;
        sample_from(set, &SampleStrategy::Worst(target), &mut rand::rngs::mock::StepRng::new(0, 0))
    }

    fn law<R: Rng>(&mut self, step: usize, x: usize, y: usize, rng: &mut R) -> Result<Distribution> {
        let set = self.kernel.kernel_set_at(step, x, y)?;
        let law = match self.rule {
            NoiseRule::LeastFavorable if self.kernel.is_time_varying() => self.least_favorable(step, x, y, &set)?,
            NoiseRule::LeastFavorable => {
                let key = if self.kernel.num_features().is_some() { x } else { 0 } * self.kernel.num_labels() + y;
                match &self.cache[key] {
                    Some(d) => d.clone(),
                    None => {
                        let d = self.least_favorable(step, x, y, &set)?;
                        self.cache[key] = Some(d.clone());
                        d
                    }
                }
            }
            NoiseRule::Vertex(i) => sample_from(&set, &SampleStrategy::VertexIndex(*i), rng)?,
            NoiseRule::UniformMixture => sample_from(&set, &SampleStrategy::UniformMixture, rng)?,
        };
        if cfg!(debug_assertions) {
            debug_assert!(set.contains(&law, 1e-12)?, "adversary left Q_y^x at step {step}");
        }
        Ok(law)
    }
}

/// Plays one game of `horizon` rounds with a clone of `predictor`.
pub fn run_game(
    hclass: &HypothesisClass,
    kernel: &NoiseKernel,
    predictor: &Predictor,
    adversary: &AdversaryStrategy,
    horizon: usize,
    seed: u64,
) -> Result<GameTranscript> {
    run_game_observed(hclass, kernel, predictor, adversary, horizon, seed, |_| {})
}

/// [`run_game`] with a callback invoked once per round.
pub fn run_game_observed(
    hclass: &HypothesisClass,
    kernel: &NoiseKernel,
    predictor: &Predictor,
    adversary: &AdversaryStrategy,
    horizon: usize,
    seed: u64,
    mut observer: impl FnMut(&RoundView<'_>),
) -> Result<GameTranscript> {
    validate_adversary(adversary, hclass, kernel, horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut predictor = predictor.clone();
    let truth = match adversary.ground_truth {
        TruthRule::Fixed(k) => k,
        TruthRule::Uniform => rng.gen_range(0..hclass.len()),
    };
    let mut features = FeaturePlayer::new(&adversary.feature_rule, hclass, truth);
    let mut noise = NoisePlayer::new(kernel, &adversary.noise_rule, hclass.num_features());
    let mut steps = Vec::with_capacity(horizon);
    let mut cum_errors = 0;
    for t in 0..horizon {
        let x = features.next(t, &mut rng);
        let y = hclass.label(truth, x);
        let law = noise.law(t, x, y, &mut rng)?;
        let obs = law.sample(&mut rng);
        let draw = rng.next_u64();
        let predicted = predictor.predict(t, x, draw)?;
        observer(&RoundView {
            step: t,
            feature: x,
            true_label: y,
            noise_law: &law,
            obs,
            predicted_label: predicted,
            predictor: &predictor,
        });
        predictor.observe(t, x, obs)?;
        let error = predicted != y;
        cum_errors += usize::from(error);
        steps.push(StepRecord {
            t,
            feature: x,
            true_label: y,
            obs,
            predicted_label: predicted,
            error,
        });
    }
    Ok(GameTranscript {
        steps,
        cum_errors,
        seed,
        truth,
        predictor: predictor.name().to_string(),
        kernel: kernel.name(),
        guarantee_event_held: predictor.guarantee_event(truth),
    })
}

/// Everything needed to replay games.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub hclass: HypothesisClass,
    pub kernel: NoiseKernel,
    pub predictor: PredictorSpec,
    pub adversary: AdversaryStrategy,
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunResult {
    pub run_id: usize,
    pub seed: u64,
    pub cum_errors: usize,
    pub guarantee_event: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub horizon: usize,
    pub median: f64,
    pub q90: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskSummary {
    pub runs: usize,
    pub mean: f64,
    pub median: f64,
    /// `(δ, empirical (1-δ)-quantile)` pairs.
    pub quantiles: Vec<(f64, f64)>,
    pub per_t_curve: Option<Vec<CurvePoint>>,
    /// Fraction of runs whose guarantee event held, when defined.
    pub guarantee_rate: Option<f64>,
    pub results: Vec<RunResult>,
    pub predictor: String,
    pub kernel: String,
    pub horizon: usize,
}

impl RiskSummary {
    pub fn quantile(&self, delta: f64) -> Option<f64> {
        self.quantiles.iter().find(|(d, _)| *d == delta).map(|(_, v)| *v)
    }
}

/// The `⌈(1-δ) n⌉`-th smallest value.
pub fn empirical_quantile(values: &[usize], delta: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len();
    let rank = ((1.0 - delta) * n as f64).ceil().clamp(1.0, n as f64) as usize;
    v[rank - 1] as f64
}

/// Runs seeds `seed0 .. seed0 + runs` in parallel and aggregates the
/// cumulative errors. Quantiles are reported for each `δ` in `deltas`.
pub fn monte_carlo(exp: &Experiment, runs: usize, seed0: u64, deltas: &[f64]) -> Result<RiskSummary> {
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be >= 1".into()));
    }
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
        return Err(Error::InvalidParameter(format!("quantile level {d} not in (0, 1)")));
    }
    let proto = exp.predictor.build(&exp.hclass, &exp.kernel)?;
    validate_adversary(&exp.adversary, &exp.hclass, &exp.kernel, exp.horizon)?;
    let results = (0..runs)
        .into_par_iter()
        .map(|i| {
            let seed = seed0.wrapping_add(i as u64);
            run_game(&exp.hclass, &exp.kernel, &proto, &exp.adversary, exp.horizon, seed)
                .map(|tr| RunResult {
                    run_id: i,
                    seed,
                    cum_errors: tr.cum_errors,
                    guarantee_event: tr.guarantee_event_held,
                })
                .map_err(|e| Error::RunFailed {
                    run: i,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let errs: Vec<usize> = results.iter().map(|r| r.cum_errors).collect();
    let mean = errs.iter().sum::<usize>() as f64 / runs as f64;
    let flags: Vec<bool> = results.iter().filter_map(|r| r.guarantee_event).collect();
    Ok(RiskSummary {
        runs,
        mean,
        median: empirical_quantile(&errs, 0.5),
        quantiles: deltas.iter().map(|&d| (d, empirical_quantile(&errs, d))).collect(),
        per_t_curve: None,
        guarantee_rate: (!flags.is_empty())
            .then(|| flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64),
        results,
        predictor: exp.predictor.name().to_string(),
        kernel: exp.kernel.name(),
        horizon: exp.horizon,
    })
}

/// One [`monte_carlo`] per horizon, with the experiment rebuilt for each.
pub fn risk_curve(
    build: impl Fn(usize) -> Result<Experiment>,
    horizons: &[usize],
    runs: usize,
    seed0: u64,
) -> Result<Vec<CurvePoint>> {
    horizons
        .iter()
        .map(|&t| {
            let s = monte_carlo(&build(t)?, runs, seed0, &[0.1])?;
            Ok(CurvePoint {
                horizon: t,
                median: s.median,
                q90: s.quantile(0.1).unwrap_or(f64::NAN),
                mean: s.mean,
            })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`. `None` if fewer than two
/// points or any coordinate is not positive.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return None;
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// One experiment family, without the predictor and horizon.
#[derive(Debug, Clone)]
pub struct GameInstance {
    pub hclass: HypothesisClass,
    pub kernel: NoiseKernel,
    pub adversary: AdversaryStrategy,
}

impl GameInstance {
    pub fn experiment(&self, predictor: PredictorSpec, horizon: usize) -> Experiment {
        Experiment {
            hclass: self.hclass.clone(),
            kernel: self.kernel.clone(),
            predictor,
            adversary: self.adversary.clone(),
            horizon,
        }
    }
}

/// The cube class over `τ` features with a singleton kernel whose two laws
/// per feature sit at squared Hellinger distance `γ_H`, played in `τ`
/// epochs of `T/τ` rounds against a uniformly drawn truth.
pub fn build_lower_bound_instance(tau: usize, gamma_h: f64, horizon: usize) -> Result<GameInstance> {
    if tau == 0 || !horizon.is_multiple_of(tau) || horizon == 0 {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} must be a positive multiple of tau = {tau}"
        )));
    }
    let (q0, q1) = hellinger_pair(gamma_h)?;
    let kernel = NoiseKernel::singleton(vec![vec![q0, q1]; tau])?;
    Ok(GameInstance {
        hclass: HypothesisClass::cube(tau)?,
        kernel,
        adversary: AdversaryStrategy {
            feature_rule: FeatureRule::EpochConstant {
                features: (0..tau).collect(),
                epoch_len: horizon / tau,
            },
            noise_rule: NoiseRule::Vertex(0),
            ground_truth: TruthRule::Uniform,
        },
    })
}

/// Two constant hypotheses on a singleton kernel whose first
/// `⌈A γ^(α/(1-α)) T⌉` rounds use a feature with gap `γ = (ln 2 / T)^(1-α)`
/// and whose remaining rounds use a feature with gap 1.
pub fn build_soft_gap_instance(alpha: f64, a: f64, horizon: usize) -> Result<GameInstance> {
    if !(0.0..1.0).contains(&alpha) || !(a > 0.0) || horizon == 0 {
        return Err(Error::InvalidParameter(format!(
            "soft-gap instance needs alpha in [0,1), A > 0, T >= 1 (got {alpha}, {a}, {horizon})"
        )));
    }
    let gamma = (2f64.ln() / horizon as f64).powf(1.0 - alpha);
    let small = ((a * gamma.powf(alpha / (1.0 - alpha)) * horizon as f64).ceil() as usize).min(horizon);
    let (s0, s1) = hellinger_pair(gamma)?;
    let (b0, b1) = hellinger_pair(1.0)?;
    let mut seq = vec![0; small];
    seq.resize(horizon, 1);
    Ok(GameInstance {
        hclass: HypothesisClass::constants(2, 2)?,
        kernel: NoiseKernel::singleton(vec![vec![s0, s1], vec![b0, b1]])?,
        adversary: AdversaryStrategy {
            feature_rule: FeatureRule::FixedSequence(seq),
            noise_rule: NoiseRule::Vertex(0),
            ground_truth: TruthRule::Uniform,
        },
    })
}

/// Two constant hypotheses under the generated Tsybakov sequence, with the
/// adversary always playing the noisiest allowed law for truth `0`.
pub fn build_tsybakov_instance(alpha: f64, a: f64, horizon: usize) -> Result<GameInstance> {
    Ok(GameInstance {
        hclass: HypothesisClass::constants(2, 1)?,
        kernel: NoiseKernel::tsybakov_generated(a, alpha, horizon)?,
        adversary: AdversaryStrategy {
            feature_rule: FeatureRule::FixedSequence(vec![0]),
            noise_rule: NoiseRule::Vertex(1),
            ground_truth: TruthRule::Fixed(0),
        },
    })
}

/// High-probability error count of the empirical-mean tester:
/// `#{t : Σ_{j<t} λ_j ≤ √(2 t ln(T/δ))}`.
pub fn empirical_mean_error_bound(lambdas: &[f64], delta: f64) -> usize {
    let big_t = lambdas.len() as f64;
    let mut prefix = 0.0;
    let mut count = 0;
    for (i, l) in lambdas.iter().enumerate() {
        let t = (i + 1) as f64;
        if prefix <= (2.0 * t * (big_t / delta).ln()).sqrt() {
            count += 1;
        }
        prefix += l;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    fn massart_experiment(predictor: PredictorSpec, horizon: usize) -> Experiment {
        Experiment {
            hclass: HypothesisClass::random(16, 32, 2, 1).unwrap(),
            kernel: NoiseKernel::massart(0.25).unwrap(),
            predictor,
            adversary: AdversaryStrategy {
                feature_rule: FeatureRule::UniformRandom,
                noise_rule: NoiseRule::LeastFavorable,
                ground_truth: TruthRule::Uniform,
            },
            horizon,
        }
    }

    #[test]
    fn noiseless_single_hypothesis_never_errs() {
        let h = HypothesisClass::new(vec![vec![0, 1, 2]], 3).unwrap();
        let k = NoiseKernel::randomized_response(0.0, 3).unwrap();
        let p = PredictorSpec::LoglossRr.build(&h, &k).unwrap();
        let adv = AdversaryStrategy {
            feature_rule: FeatureRule::UniformRandom,
            noise_rule: NoiseRule::LeastFavorable,
            ground_truth: TruthRule::Fixed(0),
        };
        let tr = run_game(&h, &k, &p, &adv, 200, 3).unwrap();
        assert_eq!(tr.cum_errors, 0);
        assert_eq!(tr.steps.len(), 200);
    }

    #[test]
    fn transcripts_are_deterministic() {
        let e = massart_experiment(PredictorSpec::L2Reduction, 300);
        let p = e.predictor.build(&e.hclass, &e.kernel).unwrap();
        let a = run_game(&e.hclass, &e.kernel, &p, &e.adversary, e.horizon, 42).unwrap();
        let b = run_game(&e.hclass, &e.kernel, &p, &e.adversary, e.horizon, 42).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.cum_errors, a.steps.iter().filter(|s| s.error).count());
    }

    #[test]
    fn noise_prefix_is_shared_across_predictors() {
        let e = massart_experiment(PredictorSpec::L2Reduction, 100);
        let p1 = PredictorSpec::L2Reduction.build(&e.hclass, &e.kernel).unwrap();
        let p2 = PredictorSpec::PairwiseMeta(MetaConfig::new(TesterKind::LeCamBirge, 0.05))
            .build(&e.hclass, &e.kernel)
            .unwrap();
        let a = run_game(&e.hclass, &e.kernel, &p1, &e.adversary, 100, 9).unwrap();
        let b = run_game(&e.hclass, &e.kernel, &p2, &e.adversary, 50, 9).unwrap();
        for (s, r) in a.steps.iter().zip(&b.steps) {
            assert_eq!((s.feature, s.obs, s.true_label), (r.feature, r.obs, r.true_label));
        }
    }

    #[test]
    fn monte_carlo_single_run_and_repeatability() {
        let e = massart_experiment(PredictorSpec::L2Reduction, 200);
        let s = monte_carlo(&e, 1, 5, &[0.05]).unwrap();
        assert_eq!(s.mean, s.results[0].cum_errors as f64);
        let a = monte_carlo(&e, 8, 5, &[0.05]).unwrap();
        let b = monte_carlo(&e, 8, 5, &[0.05]).unwrap();
        assert_eq!(a, b);
        assert!(monte_carlo(&e, 0, 5, &[]).is_err());
    }

    #[test]
    fn run_failures_name_the_run() {
        let mut e = massart_experiment(PredictorSpec::L2Reduction, 10);
        e.adversary.noise_rule = NoiseRule::Vertex(5);
        match monte_carlo(&e, 3, 0, &[]) {
            Err(Error::RunFailed { run: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quantile_is_order_statistic() {
        let v: Vec<usize> = (1..=20).collect();
        assert_eq!(empirical_quantile(&v, 0.05), 19.0);
        assert_eq!(empirical_quantile(&v, 0.5), 10.0);
        assert_eq!(empirical_quantile(&[7], 0.05), 7.0);
    }

    #[test]
    fn max_disagreement_examples() {
        let one = HypothesisClass::new(vec![vec![0, 1, 1, 0]], 2).unwrap();
        assert_eq!(max_disagreement_feature(&one, &[0]), 0);
        let two = HypothesisClass::new(vec![vec![0, 1, 1, 0, 1], vec![0, 1, 1, 1, 1]], 2).unwrap();
        assert_eq!(max_disagreement_feature(&two, &[0, 1]), 3);
        let cube = HypothesisClass::cube(4).unwrap();
        let all: Vec<usize> = (0..16).collect();
        assert_eq!(max_disagreement_feature(&cube, &all), 0);
    }

    #[test]
    fn max_disagreement_rule_plays_valid_features() {
        let h = HypothesisClass::cube(3).unwrap();
        let rule = FeatureRule::MaxDisagreement { patience: 2 };
        let mut fp = FeaturePlayer::new(&rule, &h, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let xs: Vec<usize> = (0..12).map(|t| fp.next(t, &mut rng)).collect();
        assert_eq!(&xs[..6], &[0, 0, 1, 1, 2, 2]);
        assert_eq!(&xs[6..], &[0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn lower_bound_instance_shape() {
        let inst = build_lower_bound_instance(4, 0.02, 2000).unwrap();
        assert_eq!(inst.hclass.len(), 16);
        assert_eq!(inst.kernel.num_features(), Some(4));
        assert!(build_lower_bound_instance(4, 0.02, 2001).is_err());
        let lim = build_lower_bound_instance(1, 2.0, 4).unwrap();
        let s = lim.kernel.kernel_set(0, 1).unwrap();
        assert_eq!(s, KernelSet::Singleton(Distribution::point_mass(2, 1).unwrap()));
    }

    #[test]
    fn soft_gap_instance_counts() {
        let inst = build_soft_gap_instance(0.5, 1.0, 1024).unwrap();
        let FeatureRule::FixedSequence(seq) = &inst.adversary.feature_rule else { unreachable!() };
        let gamma = (2f64.ln() / 1024.0).sqrt();
        let small = seq.iter().filter(|&&x| x == 0).count();
        assert_eq!(small, (gamma * 1024.0).ceil() as usize);
        assert!(seq[..small].iter().all(|&x| x == 0));
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [256.0, 512.0, 1024.0].iter().map(|&t: &f64| (t, 3.0 * t.powf(0.6))).collect();
        assert!((loglog_slope(&pts).unwrap() - 0.6).abs() < 1e-12);
        assert!(loglog_slope(&[(1.0, 1.0)]).is_none());
        assert!(loglog_slope(&[(1.0, 0.0), (2.0, 1.0)]).is_none());
    }
}
