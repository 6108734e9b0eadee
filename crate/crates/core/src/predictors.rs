//! Exponentially weighted averaging over distribution-valued experts, and
//! the label predictors that decode its estimate.

use std::sync::Arc;

use serde::Serialize;

use crate::dist::{raw_hellinger_sq, raw_l2_sq, raw_loss, DivergenceKind, Distribution, LossSpec};
use crate::error::{Error, Result};
use crate::hypothesis::HypothesisClass;
use crate::kernel::{gap, KernelSet, NoiseKernel};
use crate::pairwise::{MetaPredictor, PairTestPredictor};

/// Expert `k`: one distribution per feature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpertFunction {
    pub id: usize,
    pub dist_for: Vec<Distribution>,
}

/// Log-domain weights of the exponentially weighted average.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EwaState {
    log_weights: Vec<f64>,
    loss_spec: LossSpec,
    round: usize,
}

impl EwaState {
    /// Uniform initial weights over `k` experts.
    pub fn new(k: usize, loss_spec: LossSpec) -> Self {
        Self {
            log_weights: vec![0.0; k],
            loss_spec,
            round: 0,
        }
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn loss_spec(&self) -> LossSpec {
        self.loss_spec
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Normalized weights. Eliminated experts get exactly zero; if every
    /// expert is eliminated the weights fall back to uniform.
    pub fn weights(&self) -> Vec<f64> {
        let max = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return vec![1.0 / self.log_weights.len() as f64; self.log_weights.len()];
        }
        let raw: Vec<f64> = self.log_weights.iter().map(|l| (l - max).exp()).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / s).collect()
    }
}

fn check_experts(state: &EwaState, experts: &[ExpertFunction], x: usize) -> Result<()> {
    if experts.is_empty() {
        return Err(Error::EmptyExperts);
    }
    if experts.len() != state.log_weights.len() {
        return Err(Error::DimensionMismatch {
            left: state.log_weights.len(),
            right: experts.len(),
        });
    }
    let f = experts[0].dist_for.len();
    if x >= f {
        return Err(Error::IndexOutOfRange {
            what: "feature",
            index: x,
            len: f,
        });
    }
    Ok(())
}

/// The weighted mixture `Σ w_k f_k(x) / Σ w_k`.
pub fn ewa_predict(state: &EwaState, experts: &[ExpertFunction], x: usize) -> Result<Distribution> {
    check_experts(state, experts, x)?;
    let w = state.weights();
    let m = experts[0].dist_for[x].len();
    let mut out = vec![0.0; m];
    for (wk, e) in w.iter().zip(experts) {
        if *wk == 0.0 {
            continue;
        }
        for (o, p) in out.iter_mut().zip(e.dist_for[x].probs()) {
            *o += wk * p;
        }
    }
    Distribution::new(out)
}

/// `log_w[k] -= α ℓ(obs, f_k(x))`, then shifts so the largest finite
/// log-weight is zero. Infinite losses eliminate the expert.
pub fn ewa_update(state: &mut EwaState, experts: &[ExpertFunction], x: usize, obs: usize) -> Result<()> {
    check_experts(state, experts, x)?;
    let m = experts[0].dist_for[x].len();
    if obs >= m {
        return Err(Error::ObservationOutOfRange { obs, size: m });
    }
    let alpha = state.loss_spec.exp_concavity_alpha;
    for (lw, e) in state.log_weights.iter_mut().zip(experts) {
        let l = raw_loss(state.loss_spec.kind, obs, e.dist_for[x].probs());
        *lw -= alpha * l;
    }
    let max = state.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max.is_finite() {
        state.log_weights.iter_mut().for_each(|l| *l -= max);
    }
    state.round += 1;
    Ok(())
}

/// Replays `stream` through a fresh estimator and returns
/// `Σ ℓ(ỹ_t, p̂_t) - min_k Σ ℓ(ỹ_t, f_k(x_t))`.
pub fn ewa_regret_audit(
    experts: &[ExpertFunction],
    loss_spec: LossSpec,
    stream: &[(usize, usize)],
) -> Result<f64> {
    let mut state = EwaState::new(experts.len(), loss_spec);
    let mut learner = 0.0;
    let mut per_expert = vec![0.0; experts.len()];
    for &(x, obs) in stream {
        let p = ewa_predict(&state, experts, x)?;
        learner += crate::dist::loss(loss_spec, obs, &p)?;
        for (acc, e) in per_expert.iter_mut().zip(experts) {
            *acc += raw_loss(loss_spec.kind, obs, e.dist_for[x].probs());
        }
        ewa_update(&mut state, experts, x, obs)?;
    }
    let best = per_expert.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(learner - best)
}

/// Label whose reference point is nearer to `p_hat` in L², ties to 0.
pub fn l2_decision(p_hat: &Distribution, q0: &Distribution, q1: &Distribution) -> usize {
    let d0 = raw_l2_sq(p_hat.probs(), q0.probs());
    let d1 = raw_l2_sq(p_hat.probs(), q1.probs());
    usize::from(d1 < d0)
}

/// Index of the largest mass, ties to the lowest index.
pub fn predict_argmax(p_hat: &Distribution) -> usize {
    let mut best = 0;
    for (m, p) in p_hat.probs().iter().enumerate() {
        if *p > p_hat.probs()[best] {
            best = m;
        }
    }
    best
}

/// Label whose singleton set is nearest to `p_hat` in H², ties to the
/// lowest label.
pub fn predict_hellinger_nearest(p_hat: &Distribution, kernel: &NoiseKernel, x: usize) -> Result<usize> {
    let mut best = (0, f64::INFINITY);
    for y in 0..kernel.num_labels() {
        let q = singleton_member(kernel, x, y)?;
        let d = raw_hellinger_sq(q.probs(), p_hat.probs());
        if d < best.1 {
            best = (y, d);
        }
    }
    Ok(best.0)
}

fn singleton_member(kernel: &NoiseKernel, x: usize, y: usize) -> Result<Distribution> {
    match kernel.kernel_set(x, y)? {
        KernelSet::Singleton(d) => Ok(d),
        _ => Err(Error::NonSingletonKernel { feature: x, label: y }),
    }
}

/// Checks that a table kernel covers every feature of the class and that
/// label sets agree.
pub(crate) fn check_compat(hclass: &HypothesisClass, kernel: &NoiseKernel) -> Result<()> {
    if hclass.num_labels() > kernel.num_labels() {
        return Err(Error::InvalidParameter(format!(
            "class uses {} labels but the kernel defines {}",
            hclass.num_labels(),
            kernel.num_labels()
        )));
    }
    if let Some(f) = kernel.num_features() {
        if f < hclass.num_features() {
            return Err(Error::InvalidParameter(format!(
                "class has {} features but the kernel table covers {f}",
                hclass.num_features()
            )));
        }
    }
    Ok(())
}

/// Builds one value per feature, computing it once when the kernel ignores
/// the feature.
fn per_feature<T: Clone>(
    hclass: &HypothesisClass,
    kernel: &NoiseKernel,
    mut f: impl FnMut(usize) -> Result<T>,
) -> Result<Vec<T>> {
    if kernel.num_features().is_some() {
        (0..hclass.num_features()).map(f).collect()
    } else {
        Ok(vec![f(0)?; hclass.num_features()])
    }
}

#[derive(Debug, Clone)]
enum Decoder {
    /// Closest of the two gap-minimizing reference points per feature.
    L2(Arc<Vec<(Distribution, Distribution)>>),
    Argmax,
    /// Nearest singleton member per feature and label.
    Hellinger(Arc<Vec<Vec<Distribution>>>),
}

/// EWA over the class's induced experts, decoded to a label.
#[derive(Debug, Clone)]
pub struct EwaPredictor {
    experts: Arc<Vec<ExpertFunction>>,
    state: EwaState,
    decoder: Decoder,
}

impl EwaPredictor {
    /// Binary L²-reduction: experts output the L²-gap-minimizing pair member
    /// of their label, estimated under Brier loss, decoded by nearest member.
    pub fn l2_reduction(hclass: &HypothesisClass, kernel: &NoiseKernel) -> Result<Self> {
        check_compat(hclass, kernel)?;
        if kernel.num_labels() != 2 {
            return Err(Error::Unsupported(format!(
                "l2-reduction is defined for binary labels only, kernel has {}",
                kernel.num_labels()
            )));
        }
        let pairs = per_feature(hclass, kernel, |x| {
            let r = gap(&kernel.kernel_set(x, 0)?, &kernel.kernel_set(x, 1)?, DivergenceKind::L2Sq)?;
            Ok(r.argmin_pair)
        })?;
        let experts = build_experts(hclass, |x, y| Ok(if y == 0 { pairs[x].0.clone() } else { pairs[x].1.clone() }))?;
        Ok(Self {
            state: EwaState::new(experts.len(), LossSpec::brier()),
            experts: Arc::new(experts),
            decoder: Decoder::L2(Arc::new(pairs)),
        })
    }

    /// Log-loss EWA over the kernel's representative points, decoded by
    /// argmax. Needs labels and observations to share one alphabet.
    pub fn logloss_argmax(hclass: &HypothesisClass, kernel: &NoiseKernel) -> Result<Self> {
        check_compat(hclass, kernel)?;
        if kernel.arity() != kernel.num_labels() {
            return Err(Error::Unsupported(format!(
                "argmax decoding needs M = N, kernel has M = {} and N = {}",
                kernel.arity(),
                kernel.num_labels()
            )));
        }
        let reps = per_feature(hclass, kernel, |x| {
            (0..kernel.num_labels()).map(|y| kernel.representative(x, y)).collect::<Result<Vec<_>>>()
        })?;
        let experts = build_experts(hclass, |x, y| Ok(reps[x][y].clone()))?;
        Ok(Self {
            state: EwaState::new(experts.len(), LossSpec::log()),
            experts: Arc::new(experts),
            decoder: Decoder::Argmax,
        })
    }

    /// Log-loss EWA on a singleton kernel, decoded by the nearest member in H².
    pub fn hellinger_singleton(hclass: &HypothesisClass, kernel: &NoiseKernel) -> Result<Self> {
        check_compat(hclass, kernel)?;
        let table = per_feature(hclass, kernel, |x| {
            (0..kernel.num_labels()).map(|y| singleton_member(kernel, x, y)).collect::<Result<Vec<_>>>()
        })?;
        let experts = build_experts(hclass, |x, y| Ok(table[x][y].clone()))?;
        Ok(Self {
            state: EwaState::new(experts.len(), LossSpec::log()),
            experts: Arc::new(experts),
            decoder: Decoder::Hellinger(Arc::new(table)),
        })
    }

    pub fn experts(&self) -> &[ExpertFunction] {
        &self.experts
    }

    pub fn state(&self) -> &EwaState {
        &self.state
    }

    /// Current estimate `p̂_t` at feature `x`.
    pub fn estimate(&self, x: usize) -> Result<Distribution> {
        ewa_predict(&self.state, &self.experts, x)
    }

    pub fn predict(&self, x: usize) -> Result<usize> {
        let p = self.estimate(x)?;
        Ok(match &self.decoder {
            Decoder::L2(pairs) => l2_decision(&p, &pairs[x].0, &pairs[x].1),
            Decoder::Argmax => predict_argmax(&p),
            Decoder::Hellinger(table) => {
                let mut best = (0, f64::INFINITY);
                for (y, q) in table[x].iter().enumerate() {
                    let d = raw_hellinger_sq(q.probs(), p.probs());
                    if d < best.1 {
                        best = (y, d);
                    }
                }
                best.0
            }
        })
    }

    pub fn observe(&mut self, x: usize, obs: usize) -> Result<()> {
        ewa_update(&mut self.state, &self.experts, x, obs)
    }
}

fn build_experts(
    hclass: &HypothesisClass,
    dist: impl Fn(usize, usize) -> Result<Distribution>,
) -> Result<Vec<ExpertFunction>> {
    (0..hclass.len())
        .map(|k| {
            let dist_for = (0..hclass.num_features())
                .map(|x| dist(x, hclass.label(k, x)))
                .collect::<Result<Vec<_>>>()?;
            Ok(ExpertFunction { id: k, dist_for })
        })
        .collect()
}

/// Any of the shipped predictors, ready to play one game.
#[derive(Debug, Clone)]
pub enum Predictor {
    L2Reduction(EwaPredictor),
    LoglossArgmax(EwaPredictor),
    HellingerSingleton(EwaPredictor),
    PairwiseMeta(Box<MetaPredictor>),
    PairTest(PairTestPredictor),
}

impl Predictor {
    /// Configuration name of the predictor.
    pub fn name(&self) -> &'static str {
        match self {
            Predictor::L2Reduction(_) => "l2-reduction",
            Predictor::LoglossArgmax(_) => "logloss-rr",
            Predictor::HellingerSingleton(_) => "hellinger-singleton",
            Predictor::PairwiseMeta(_) => "pairwise-meta",
            Predictor::PairTest(_) => "pair-test",
        }
    }

    /// Label for round `step` at feature `x`. `draw` is this round's random
    /// word; deterministic predictors ignore it.
    pub fn predict(&mut self, step: usize, x: usize, draw: u64) -> Result<usize> {
        match self {
            Predictor::L2Reduction(p) | Predictor::LoglossArgmax(p) | Predictor::HellingerSingleton(p) => {
                p.predict(x)
            }
            Predictor::PairwiseMeta(m) => m.predict(step, x, draw),
            Predictor::PairTest(t) => Ok(t.predict(x)),
        }
    }

    pub fn observe(&mut self, step: usize, x: usize, obs: usize) -> Result<()> {
        match self {
            Predictor::L2Reduction(p) | Predictor::LoglossArgmax(p) | Predictor::HellingerSingleton(p) => {
                p.observe(x, obs)
            }
            Predictor::PairwiseMeta(m) => m.observe(step, x, obs),
            Predictor::PairTest(t) => t.observe(step, x, obs),
        }
    }

    /// EWA estimate at `x` for the estimator-based predictors.
    pub fn estimate(&self, x: usize) -> Option<Result<Distribution>> {
        match self {
            Predictor::L2Reduction(p) | Predictor::LoglossArgmax(p) | Predictor::HellingerSingleton(p) => {
                Some(p.estimate(x))
            }
            _ => None,
        }
    }

    /// Whether the predictor's high-probability event held for this truth,
    /// for predictors that define one.
    pub fn guarantee_event(&self, truth: usize) -> Option<bool> {
        match self {
            Predictor::PairwiseMeta(m) => Some(m.guarantee_event(truth)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::LossKind;

    fn d(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    fn experts(dists: &[&[f64]]) -> Vec<ExpertFunction> {
        dists
            .iter()
            .enumerate()
            .map(|(id, v)| ExpertFunction {
                id,
                dist_for: vec![d(v)],
            })
            .collect()
    }

    #[test]
    fn initial_prediction_is_uniform_mixture() {
        let e = experts(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let s = EwaState::new(2, LossSpec::log());
        assert_eq!(ewa_predict(&s, &e, 0).unwrap(), d(&[0.5, 0.5]));
        let one = experts(&[&[0.3, 0.7]]);
        assert_eq!(ewa_predict(&EwaState::new(1, LossSpec::log()), &one, 0).unwrap(), d(&[0.3, 0.7]));
        assert!(matches!(
            ewa_predict(&EwaState::new(0, LossSpec::log()), &[], 0),
            Err(Error::EmptyExperts)
        ));
    }

    #[test]
    fn one_log_loss_update() {
        let e = experts(&[&[1.0, 0.0], &[0.5, 0.5]]);
        let mut s = EwaState::new(2, LossSpec::log());
        ewa_update(&mut s, &e, 0, 0).unwrap();
        let p = ewa_predict(&s, &e, 0).unwrap();
        assert!((p.get(0) - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(s.round(), 1);
    }

    #[test]
    fn brier_update_gap() {
        let e = experts(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let mut s = EwaState::new(2, LossSpec::brier());
        ewa_update(&mut s, &e, 0, 0).unwrap();
        assert_eq!(s.log_weights()[0], 0.0);
        assert!((s.log_weights()[0] - s.log_weights()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn log_loss_eliminates_on_zero_mass() {
        let e = experts(&[&[1.0, 0.0], &[0.5, 0.5]]);
        let mut s = EwaState::new(2, LossSpec::log());
        ewa_update(&mut s, &e, 0, 1).unwrap();
        assert_eq!(s.log_weights()[0], f64::NEG_INFINITY);
        assert_eq!(ewa_predict(&s, &e, 0).unwrap(), d(&[0.5, 0.5]));
        assert!(matches!(
            ewa_update(&mut s, &e, 0, 2),
            Err(Error::ObservationOutOfRange { obs: 2, size: 2 })
        ));
    }

    #[test]
    fn regret_examples() {
        let single = experts(&[&[0.3, 0.7]]);
        let stream: Vec<(usize, usize)> = (0..50).map(|t| (0, t % 2)).collect();
        assert!(ewa_regret_audit(&single, LossSpec::log(), &stream).unwrap() <= 1e-12);
        let two = experts(&[&[0.9, 0.1], &[0.2, 0.8]]);
        assert!(ewa_regret_audit(&two, LossSpec::log(), &stream).unwrap() <= 2f64.ln());
    }

    #[test]
    fn decision_rules() {
        assert_eq!(predict_argmax(&d(&[0.1, 0.9])), 1);
        assert_eq!(predict_argmax(&d(&[0.5, 0.5])), 0);
        assert_eq!(predict_argmax(&d(&[0.3, 0.3, 0.4])), 2);
        let q0 = Distribution::bernoulli(0.25).unwrap();
        let q1 = Distribution::bernoulli(0.75).unwrap();
        assert_eq!(l2_decision(&q0, &q0, &q1), 0);
        assert_eq!(l2_decision(&Distribution::bernoulli(0.5).unwrap(), &q0, &q1), 0);
        assert_eq!(l2_decision(&Distribution::bernoulli(0.3).unwrap(), &q0, &q1), 0);
        assert_eq!(l2_decision(&Distribution::bernoulli(0.7).unwrap(), &q0, &q1), 1);
    }

    #[test]
    fn hellinger_nearest() {
        let b = |t| Distribution::bernoulli(t).unwrap();
        let k = NoiseKernel::singleton(vec![vec![b(0.1), b(0.9)]]).unwrap();
        assert_eq!(predict_hellinger_nearest(&b(0.9), &k, 0).unwrap(), 1);
        assert_eq!(predict_hellinger_nearest(&b(0.2), &k, 0).unwrap(), 0);
        assert_eq!(predict_hellinger_nearest(&b(0.5), &k, 0).unwrap(), 0);
        let m = NoiseKernel::massart(0.1).unwrap();
        assert!(matches!(
            predict_hellinger_nearest(&b(0.5), &m, 0),
            Err(Error::NonSingletonKernel { .. })
        ));
    }

    #[test]
    fn l2_reduction_uses_gap_pair() {
        let h = HypothesisClass::new(vec![vec![0, 1], vec![1, 1]], 2).unwrap();
        let k = NoiseKernel::massart(0.25).unwrap();
        let p = EwaPredictor::l2_reduction(&h, &k).unwrap();
        assert_eq!(p.experts()[0].dist_for[0], Distribution::bernoulli(0.25).unwrap());
        assert_eq!(p.experts()[0].dist_for[1], Distribution::bernoulli(0.75).unwrap());
        assert_eq!(p.state().loss_spec().kind, LossKind::Brier);
        let rr3 = NoiseKernel::randomized_response(0.2, 3).unwrap();
        assert!(EwaPredictor::l2_reduction(&h, &rr3).is_err());
    }
}
