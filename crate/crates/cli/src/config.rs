//! JSON experiment configuration.

use robust_online::dist::Distribution;
use robust_online::game::{
    build_lower_bound_instance, build_soft_gap_instance, build_tsybakov_instance, AdversaryStrategy, Experiment,
    FeatureRule, GameInstance, HypothesisClass, NoiseRule, PredictorSpec, TruthRule,
};
use robust_online::kernel::{KernelSet, NoiseKernel};
use robust_online::pairwise::{hellinger_pair, MetaConfig, TesterKind};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Massart {
        eta: f64,
    },
    RandomizedResponse {
        eta: f64,
        #[serde(default = "two")]
        m: usize,
    },
    TvBall {
        canonical: Vec<Vec<f64>>,
        eps: f64,
    },
    /// Without `lambdas`, the sequence is generated for the horizon.
    Tsybakov {
        alpha: f64,
        #[serde(default = "one")]
        a: f64,
        #[serde(default)]
        lambdas: Option<Vec<f64>>,
    },
    Singleton {
        table: Vec<Vec<Vec<f64>>>,
    },
    /// Singleton kernel with the same binary pair at every feature.
    HellingerPair {
        gamma_h: f64,
        #[serde(default = "one_usize")]
        features: usize,
    },
    Custom {
        table: Vec<Vec<SetConfig>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SetConfig {
    Singleton(Vec<f64>),
    Segment(Vec<f64>, Vec<f64>),
    Polytope(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassConfig {
    Random {
        k: usize,
        f: usize,
        #[serde(default = "two")]
        n: usize,
        #[serde(default)]
        seed: u64,
    },
    Cube {
        tau: usize,
    },
    Constants {
        n: usize,
        #[serde(default = "one_usize")]
        f: usize,
    },
    Explicit {
        labels: Vec<Vec<usize>>,
        #[serde(default)]
        n: Option<usize>,
        #[serde(default)]
        names: Option<Vec<String>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TesterConfig {
    #[default]
    LecamBirge,
    EmpiricalMean,
}

impl From<TesterConfig> for TesterKind {
    fn from(t: TesterConfig) -> Self {
        match t {
            TesterConfig::LecamBirge => TesterKind::LeCamBirge,
            TesterConfig::EmpiricalMean => TesterKind::EmpiricalMean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", deny_unknown_fields)]
pub enum PredictorConfig {
    #[serde(rename = "l2-reduction")]
    L2Reduction,
    #[serde(rename = "logloss-rr")]
    LoglossRr,
    #[serde(rename = "hellinger-singleton")]
    HellingerSingleton,
    #[serde(rename = "pairwise-meta")]
    PairwiseMeta {
        #[serde(default)]
        tester: TesterConfig,
        /// Falls back to the experiment's `delta`.
        #[serde(default)]
        delta: Option<f64>,
        #[serde(default)]
        threshold: Option<usize>,
    },
    #[serde(rename = "pair-test")]
    PairTest {
        #[serde(default)]
        tester: TesterConfig,
        #[serde(default)]
        delta: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureConfig {
    #[default]
    UniformRandom,
    FixedSequence {
        features: Vec<usize>,
    },
    /// `epoch_len` defaults to `T / features.len()`.
    EpochConstant {
        features: Vec<usize>,
        #[serde(default)]
        epoch_len: Option<usize>,
    },
    MaxDisagreement {
        patience: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    #[default]
    LeastFavorable,
    UniformMixture,
    Vertex(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthConfig {
    #[default]
    Uniform,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryConfig {
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub truth: TruthConfig,
}

/// Prebuilt instance families. A config names either an instance or its
/// parts, never both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceConfig {
    LowerBound {
        tau: usize,
        gamma_h: f64,
    },
    SoftGap {
        alpha: f64,
        #[serde(default = "one")]
        a: f64,
    },
    Tsybakov {
        alpha: f64,
        #[serde(default = "one")]
        a: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub instance: Option<InstanceConfig>,
    #[serde(default)]
    pub kernel: Option<KernelConfig>,
    #[serde(default)]
    pub hypothesis_class: Option<ClassConfig>,
    pub predictor: PredictorConfig,
    #[serde(default)]
    pub adversary: Option<AdversaryConfig>,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub seed0: u64,
    #[serde(default)]
    pub output: Option<String>,
    /// Horizons for a risk curve written next to the summary.
    #[serde(default)]
    pub sweep_t: Option<Vec<usize>>,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn two() -> usize {
    2
}
fn default_runs() -> usize {
    100
}
fn default_delta() -> f64 {
    0.05
}

fn dist(v: &[f64]) -> Result<Distribution, CliError> {
    Ok(Distribution::new(v.to_vec())?)
}

fn set(s: &SetConfig) -> Result<KernelSet, CliError> {
    Ok(match s {
        SetConfig::Singleton(p) => KernelSet::Singleton(dist(p)?),
        SetConfig::Segment(a, b) => KernelSet::segment(dist(a)?, dist(b)?)?,
        SetConfig::Polytope(vs) => KernelSet::polytope(vs.iter().map(|v| dist(v)).collect::<Result<_, _>>()?)?,
    })
}

impl KernelConfig {
    pub fn build(&self, horizon: usize) -> Result<NoiseKernel, CliError> {
        Ok(match self {
            KernelConfig::Massart { eta } => NoiseKernel::massart(*eta)?,
            KernelConfig::RandomizedResponse { eta, m } => NoiseKernel::randomized_response(*eta, *m)?,
            KernelConfig::TvBall { canonical, eps } => {
                NoiseKernel::tv_ball(canonical.iter().map(|c| dist(c)).collect::<Result<_, _>>()?, *eps)?
            }
            KernelConfig::Tsybakov { alpha, a, lambdas: None } => NoiseKernel::tsybakov_generated(*a, *alpha, horizon)?,
            KernelConfig::Tsybakov { alpha, a, lambdas: Some(l) } => NoiseKernel::tsybakov(l.clone(), *a, *alpha)?,
            KernelConfig::Singleton { table } => NoiseKernel::singleton(
                table
                    .iter()
                    .map(|row| row.iter().map(|p| dist(p)).collect::<Result<Vec<_>, _>>())
                    .collect::<Result<_, _>>()?,
            )?,
            KernelConfig::HellingerPair { gamma_h, features } => {
                let (q0, q1) = hellinger_pair(*gamma_h)?;
                NoiseKernel::singleton(vec![vec![q0, q1]; *features])?
            }
            KernelConfig::Custom { table } => NoiseKernel::custom(
                table
                    .iter()
                    .map(|row| row.iter().map(set).collect::<Result<Vec<_>, _>>())
                    .collect::<Result<_, _>>()?,
            )?,
        })
    }
}

impl ClassConfig {
    pub fn build(&self) -> Result<HypothesisClass, CliError> {
        Ok(match self {
            ClassConfig::Random { k, f, n, seed } => HypothesisClass::random(*k, *f, *n, *seed)?,
            ClassConfig::Cube { tau } => HypothesisClass::cube(*tau)?,
            ClassConfig::Constants { n, f } => HypothesisClass::constants(*n, *f)?,
            ClassConfig::Explicit { labels, n, names } => {
                let n = n.unwrap_or_else(|| labels.iter().flatten().max().map_or(2, |m| (m + 1).max(2)));
                let h = HypothesisClass::new(labels.clone(), n)?;
                match names {
                    Some(names) => h.with_names(names.clone())?,
                    None => h,
                }
            }
        })
    }
}

impl AdversaryConfig {
    pub fn build(&self, horizon: usize) -> AdversaryStrategy {
        AdversaryStrategy {
            feature_rule: match &self.features {
                FeatureConfig::UniformRandom => FeatureRule::UniformRandom,
                FeatureConfig::FixedSequence { features } => FeatureRule::FixedSequence(features.clone()),
                FeatureConfig::EpochConstant { features, epoch_len } => FeatureRule::EpochConstant {
                    features: features.clone(),
                    epoch_len: epoch_len.unwrap_or_else(|| (horizon / features.len().max(1)).max(1)),
                },
                FeatureConfig::MaxDisagreement { patience } => FeatureRule::MaxDisagreement { patience: *patience },
            },
            noise_rule: match self.noise {
                NoiseConfig::LeastFavorable => NoiseRule::LeastFavorable,
                NoiseConfig::UniformMixture => NoiseRule::UniformMixture,
                NoiseConfig::Vertex(i) => NoiseRule::Vertex(i),
            },
            ground_truth: match self.truth {
                TruthConfig::Uniform => TruthRule::Uniform,
                TruthConfig::Fixed(k) => TruthRule::Fixed(k),
            },
        }
    }
}

impl PredictorConfig {
    pub fn spec(&self, default_delta: f64) -> PredictorSpec {
        match self {
            PredictorConfig::L2Reduction => PredictorSpec::L2Reduction,
            PredictorConfig::LoglossRr => PredictorSpec::LoglossRr,
            PredictorConfig::HellingerSingleton => PredictorSpec::HellingerSingleton,
            PredictorConfig::PairwiseMeta { tester, delta, threshold } => PredictorSpec::PairwiseMeta(MetaConfig {
                tester: (*tester).into(),
                delta: delta.unwrap_or(default_delta),
                threshold: *threshold,
            }),
            PredictorConfig::PairTest { tester, delta } => PredictorSpec::PairTest {
                tester: (*tester).into(),
                delta: delta.unwrap_or(default_delta),
            },
        }
    }
}

impl ExperimentConfig {
    /// Resolves the game instance for horizon `horizon`.
    pub fn instance(&self, horizon: usize) -> Result<GameInstance, CliError> {
        match (&self.instance, &self.kernel, &self.hypothesis_class) {
            (Some(inst), None, None) if self.adversary.is_none() => Ok(match inst {
                InstanceConfig::LowerBound { tau, gamma_h } => build_lower_bound_instance(*tau, *gamma_h, horizon)?,
                InstanceConfig::SoftGap { alpha, a } => build_soft_gap_instance(*alpha, *a, horizon)?,
                InstanceConfig::Tsybakov { alpha, a } => build_tsybakov_instance(*alpha, *a, horizon)?,
            }),
            (Some(_), _, _) => Err(CliError::Validation(
                "`instance` replaces `kernel`, `hypothesis_class` and `adversary`; drop those keys".into(),
            )),
            (None, Some(k), Some(h)) => Ok(GameInstance {
                hclass: h.build()?,
                kernel: k.build(horizon)?,
                adversary: self.adversary.clone().unwrap_or_default().build(horizon),
            }),
            (None, None, _) => Err(CliError::Validation("missing field `kernel`".into())),
            (None, _, None) => Err(CliError::Validation("missing field `hypothesis_class`".into())),
        }
    }

    pub fn experiment(&self, horizon: usize) -> Result<Experiment, CliError> {
        Ok(self.instance(horizon)?.experiment(self.predictor.spec(self.delta), horizon))
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.horizon == 0 {
            return Err(CliError::Validation("`T` must be >= 1".into()));
        }
        if self.runs == 0 {
            return Err(CliError::Validation("`runs` must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(CliError::Validation(format!("`delta` = {} not in (0, 1)", self.delta)));
        }
        if let Some(ts) = &self.sweep_t {
            if ts.is_empty() || ts.contains(&0) {
                return Err(CliError::Validation("`sweep_t` must list horizons >= 1".into()));
            }
        }
        let exp = self.experiment(self.horizon)?;
        let predictor = exp.predictor.build(&exp.hclass, &exp.kernel)?;
        // One round is enough to check the adversary against the class.
        robust_online::game::run_game(&exp.hclass, &exp.kernel, &predictor, &exp.adversary, 1, 0)?;
        Ok(())
    }
}

/// Parses and fully validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Validation(format!("config: {inner}"))
        } else {
            CliError::Validation(format!("config field `{path}`: {inner}"))
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}
