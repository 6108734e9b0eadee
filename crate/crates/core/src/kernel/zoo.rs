use serde::Serialize;

use super::set::KernelSet;
use crate::dist::Distribution;
use crate::error::{Error, Result};

/// Map from `(feature, true label)` to the convex set the adversary may
/// draw the observation law from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum NoiseKernel {
    /// Binary labels flipped with probability at most `eta < 1/2`.
    MassartBernoulli { eta: f64 },
    /// TV ball of radius `eps` around a canonical law per label.
    TvBall { canonical: Vec<Distribution>, eps: f64 },
    /// `(1 - η') e_y + η' u` for `η' ∈ [0, eta]`, over `m` symbols.
    RandomizedResponse { eta: f64, m: usize },
    /// Binary randomized response whose clean weight at step `t` is at least
    /// `lambdas[t]`.
    Tsybakov { lambdas: Vec<f64>, a: f64, alpha: f64 },
    /// One distribution per `[feature][label]`.
    Singleton { table: Vec<Vec<Distribution>> },
    /// Arbitrary sets per `[feature][label]`.
    Custom { table: Vec<Vec<KernelSet>> },
}

impl NoiseKernel {
    pub fn massart(eta: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&eta) {
            return Err(Error::InvalidParameter(format!("Massart eta {eta} not in [0, 1/2)")));
        }
        Ok(NoiseKernel::MassartBernoulli { eta })
    }

    /// TV ball kernel. For `M > 2` the ball must fit inside the simplex,
    /// i.e. every canonical entry is at least `eps`. For `M = 2` the ball is
    /// truncated to `[0, 1]`.
    pub fn tv_ball(canonical: Vec<Distribution>, eps: f64) -> Result<Self> {
        if canonical.len() < 2 {
            return Err(Error::InvalidParameter("TV ball kernel needs at least 2 labels".into()));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("TV radius {eps} must be >= 0")));
        }
        let m = canonical[0].len();
        for c in &canonical {
            if c.len() != m {
                return Err(Error::DimensionMismatch {
                    left: m,
                    right: c.len(),
                });
            }
            if m > 2 && c.probs().iter().any(|&v| v < eps) {
                return Err(Error::Unsupported(format!(
                    "TV ball of radius {eps} leaves the simplex; need every canonical entry >= eps when M > 2"
                )));
            }
        }
        Ok(NoiseKernel::TvBall { canonical, eps })
    }

    pub fn randomized_response(eta: f64, m: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!("randomized-response eta {eta} not in [0, 1)")));
        }
        if m < 2 {
            return Err(Error::InvalidParameter(format!("need M >= 2 symbols, got {m}")));
        }
        Ok(NoiseKernel::RandomizedResponse { eta, m })
    }

    /// Tsybakov kernel from an explicit per-step sequence.
    pub fn tsybakov(lambdas: Vec<f64>, a: f64, alpha: f64) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidParameter("empty lambda sequence".into()));
        }
        if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && **l <= 1.0)) {
            return Err(Error::InvalidParameter(format!("lambda {l} not in (0, 1]")));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("A = {a} must be positive")));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("alpha {alpha} not in [0, 1)")));
        }
        Ok(NoiseKernel::Tsybakov { lambdas, a, alpha })
    }

    /// Tsybakov kernel with the ascending sequence
    /// `λ_j = (j / (A T))^((1-α)/α)`, clamped to at most 1.
    pub fn tsybakov_generated(a: f64, alpha: f64, horizon: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "generated lambda sequence needs alpha in (0, 1), got {alpha}"
            )));
        }
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        let beta = (1.0 - alpha) / alpha;
        let lambdas = (1..=horizon)
            .map(|j| (j as f64 / (a * horizon as f64)).powf(beta).min(1.0))
            .collect();
        Self::tsybakov(lambdas, a, alpha)
    }

    pub fn singleton(table: Vec<Vec<Distribution>>) -> Result<Self> {
        let (_, m) = check_table(&table, |d| d.len())?;
        if m < 2 {
            return Err(Error::InvalidParameter("singleton table has arity < 2".into()));
        }
        Ok(NoiseKernel::Singleton { table })
    }

    pub fn custom(table: Vec<Vec<KernelSet>>) -> Result<Self> {
        check_table(&table, |s| s.dim())?;
        Ok(NoiseKernel::Custom { table })
    }

    /// Short identifier used in transcripts and CSV output.
    pub fn name(&self) -> String {
        match self {
            NoiseKernel::MassartBernoulli { eta } => format!("massart(eta={eta})"),
            NoiseKernel::TvBall { eps, .. } => format!("tv-ball(eps={eps})"),
            NoiseKernel::RandomizedResponse { eta, m } => format!("randomized-response(eta={eta},M={m})"),
            NoiseKernel::Tsybakov { a, alpha, .. } => format!("tsybakov(A={a},alpha={alpha})"),
            NoiseKernel::Singleton { .. } => "singleton".into(),
            NoiseKernel::Custom { .. } => "custom".into(),
        }
    }

    /// Number of true labels `N`.
    pub fn num_labels(&self) -> usize {
        match self {
            NoiseKernel::MassartBernoulli { .. } | NoiseKernel::Tsybakov { .. } => 2,
            NoiseKernel::TvBall { canonical, .. } => canonical.len(),
            NoiseKernel::RandomizedResponse { m, .. } => *m,
            NoiseKernel::Singleton { table } => table[0].len(),
            NoiseKernel::Custom { table } => table[0].len(),
        }
    }

    /// Observation arity `M`.
    pub fn arity(&self) -> usize {
        match self {
            NoiseKernel::MassartBernoulli { .. } | NoiseKernel::Tsybakov { .. } => 2,
            NoiseKernel::TvBall { canonical, .. } => canonical[0].len(),
            NoiseKernel::RandomizedResponse { m, .. } => *m,
            NoiseKernel::Singleton { table } => table[0][0].len(),
            NoiseKernel::Custom { table } => table[0][0].dim(),
        }
    }

    /// Size of the feature universe for table kernels; `None` when every
    /// feature maps to the same sets.
    pub fn num_features(&self) -> Option<usize> {
        match self {
            NoiseKernel::Singleton { table } => Some(table.len()),
            NoiseKernel::Custom { table } => Some(table.len()),
            _ => None,
        }
    }

    pub fn is_time_varying(&self) -> bool {
        matches!(self, NoiseKernel::Tsybakov { .. })
    }

    /// Whether every set is a single distribution.
    pub fn is_singleton(&self) -> bool {
        match self {
            NoiseKernel::Singleton { .. } => true,
            NoiseKernel::Custom { table } => table
                .iter()
                .flatten()
                .all(|s| matches!(s, KernelSet::Singleton(_))),
            NoiseKernel::MassartBernoulli { eta } => *eta == 0.0,
            NoiseKernel::RandomizedResponse { eta, .. } => *eta == 0.0,
            NoiseKernel::TvBall { eps, .. } => *eps == 0.0,
            NoiseKernel::Tsybakov { lambdas, .. } => lambdas.iter().all(|l| *l == 1.0),
        }
    }

    fn check_indices(&self, x: usize, y: usize) -> Result<()> {
        let n = self.num_labels();
        if y >= n {
            return Err(Error::IndexOutOfRange {
                what: "label",
                index: y,
                len: n,
            });
        }
        if let Some(f) = self.num_features() {
            if x >= f {
                return Err(Error::IndexOutOfRange {
                    what: "feature",
                    index: x,
                    len: f,
                });
            }
        }
        Ok(())
    }

    /// The set `Q_y^x`. Time-varying kernels return the union over all
    /// steps, which is the set at the smallest separation parameter.
    pub fn kernel_set(&self, x: usize, y: usize) -> Result<KernelSet> {
        self.check_indices(x, y)?;
        match self {
            NoiseKernel::Tsybakov { lambdas, .. } => {
                let lam = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
                clean_segment(2, y, 1.0 - lam)
            }
            _ => self.static_set(x, y),
        }
    }

    /// The set `Q_y^x` in force at round `step` (0-based).
    pub fn kernel_set_at(&self, step: usize, x: usize, y: usize) -> Result<KernelSet> {
        self.check_indices(x, y)?;
        match self {
            NoiseKernel::Tsybakov { lambdas, .. } => {
                let lam = *lambdas.get(step).ok_or(Error::IndexOutOfRange {
                    what: "step",
                    index: step,
                    len: lambdas.len(),
                })?;
                clean_segment(2, y, 1.0 - lam)
            }
            _ => self.static_set(x, y),
        }
    }

    fn static_set(&self, x: usize, y: usize) -> Result<KernelSet> {
        match self {
            NoiseKernel::MassartBernoulli { eta } => {
                let (clean, noisy) = if y == 0 { (0.0, *eta) } else { (1.0, 1.0 - eta) };
                KernelSet::segment(Distribution::bernoulli(clean)?, Distribution::bernoulli(noisy)?)
            }
            NoiseKernel::TvBall { canonical, eps } => tv_ball_set(&canonical[y], *eps),
            NoiseKernel::RandomizedResponse { eta, m } => clean_segment(*m, y, *eta),
            NoiseKernel::Singleton { table } => Ok(KernelSet::Singleton(table[x][y].clone())),
            NoiseKernel::Custom { table } => Ok(table[x][y].clone()),
            NoiseKernel::Tsybakov { .. } => unreachable!("handled by callers"),
        }
    }

    /// A fixed member of `Q_y^x` used as the expert output by the
    /// log-loss predictor: the noisiest randomized-response point, the
    /// noisiest Massart point, or the unique member of a singleton set.
    pub fn representative(&self, x: usize, y: usize) -> Result<Distribution> {
        self.check_indices(x, y)?;
        match self {
            NoiseKernel::RandomizedResponse { eta, m } => rr_point(*m, y, *eta),
            NoiseKernel::MassartBernoulli { eta } => {
                Distribution::bernoulli(if y == 0 { *eta } else { 1.0 - eta })
            }
            NoiseKernel::TvBall { canonical, .. } => Ok(canonical[y].clone()),
            NoiseKernel::Singleton { table } => Ok(table[x][y].clone()),
            NoiseKernel::Custom { table } => match &table[x][y] {
                KernelSet::Singleton(d) => Ok(d.clone()),
                _ => Err(Error::Unsupported(
                    "custom kernel sets have no canonical representative".into(),
                )),
            },
            NoiseKernel::Tsybakov { .. } => Err(Error::Unsupported(
                "Tsybakov kernel has no fixed representative".into(),
            )),
        }
    }

    /// Features to scan when reporting gaps: every table row, or the single
    /// feature 0 when all features share the same sets.
    pub fn gap_features(&self) -> Vec<usize> {
        match self.num_features() {
            Some(f) => (0..f).collect(),
            None => vec![0],
        }
    }
}

fn check_table<T>(table: &[Vec<T>], dim: impl Fn(&T) -> usize) -> Result<(usize, usize)> {
    let n = table
        .first()
        .map(|r| r.len())
        .ok_or_else(|| Error::InvalidParameter("kernel table has no features".into()))?;
    if n < 2 {
        return Err(Error::InvalidParameter("kernel table needs at least 2 labels".into()));
    }
    let m = dim(&table[0][0]);
    for row in table {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                left: n,
                right: row.len(),
            });
        }
        for cell in row {
            if dim(cell) != m {
                return Err(Error::DimensionMismatch {
                    left: m,
                    right: dim(cell),
                });
            }
        }
    }
    Ok((n, m))
}

/// `(1 - η) e_y + η u` over `m` symbols.
pub fn rr_point(m: usize, y: usize, eta: f64) -> Result<Distribution> {
    let mut v = vec![eta / m as f64; m];
    v[y] += 1.0 - eta;
    Distribution::new(v)
}

/// `Segment(e_y, (1 - η) e_y + η u)`, or `Singleton(e_y)` when `η = 0`.
fn clean_segment(m: usize, y: usize, eta: f64) -> Result<KernelSet> {
    let e = Distribution::point_mass(m, y)?;
    if eta == 0.0 {
        return Ok(KernelSet::Singleton(e));
    }
    KernelSet::segment(e, rr_point(m, y, eta)?)
}

fn tv_ball_set(c: &Distribution, eps: f64) -> Result<KernelSet> {
    if eps == 0.0 {
        return Ok(KernelSet::Singleton(c.clone()));
    }
    let m = c.len();
    if m == 2 {
        let t = c.get(1);
        return KernelSet::segment(
            Distribution::bernoulli((t - eps).max(0.0))?,
            Distribution::bernoulli((t + eps).min(1.0))?,
        );
    }
    let mut vertices = Vec::with_capacity(m * (m - 1));
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let mut v = c.probs().to_vec();
                v[i] += eps;
                v[j] -= eps;
                vertices.push(Distribution::new(v)?);
            }
        }
    }
    KernelSet::polytope(vertices)
}

/// Smallest `A'` for which the sequence satisfies
/// `#{t : λ_t / 2 ≤ r} / T ≤ A' r^(α/(1-α))` for every `r ∈ (0, 1/2]`.
pub fn tsybakov_constant(lambdas: &[f64], alpha: f64) -> f64 {
    let t = lambdas.len() as f64;
    let e = alpha / (1.0 - alpha);
    let mut sorted: Vec<f64> = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut worst: f64 = 0.0;
    // The count jumps at each r = λ_j / 2; the ratio peaks right there.
    for (idx, l) in sorted.iter().enumerate() {
        let r = l / 2.0;
        if r > 0.5 || r <= 0.0 {
            continue;
        }
        let count = sorted.partition_point(|v| *v <= *l).max(idx + 1) as f64;
        worst = worst.max(count / t / r.powf(e));
    }
    worst
}
