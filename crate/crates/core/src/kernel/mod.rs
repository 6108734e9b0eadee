//! Convex kernel sets and the separation gaps between them.

mod set;
pub mod solver;
mod zoo;

use serde::Serialize;

pub use set::{sample_from, KernelSet, SampleStrategy};
pub use zoo::{rr_point, tsybakov_constant, NoiseKernel};

use crate::dist::{divergence, DivergenceKind, Distribution};
use crate::error::{Error, Result};
use solver::{Rows, MAX_ITERATIONS};

/// Infimum of a divergence between two kernel sets, with the pair attaining it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub divergence: DivergenceKind,
    pub value: f64,
    pub argmin_pair: (Distribution, Distribution),
    pub iterations: usize,
    pub converged: bool,
}

fn rows(s: &KernelSet) -> Rows {
    s.generators().iter().map(|d| d.probs().to_vec()).collect()
}

/// `inf { d(p, q) : p ∈ s1, q ∈ s2 }` for `d` in {L², H², TV}.
///
/// L² is solved exactly: a closed-form box quadratic when both sets have at
/// most two generators, Wolfe's minimum-norm-point algorithm on the
/// difference hull otherwise. TV is a linear program. H² uses nested
/// golden-section search on segments and pairwise Frank-Wolfe on larger
/// hulls; `converged` is false if the iteration cap is hit.
pub fn gap(s1: &KernelSet, s2: &KernelSet, d: DivergenceKind) -> Result<GapReport> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch {
            left: s1.dim(),
            right: s2.dim(),
        });
    }
    let (g1, g2) = (rows(s1), rows(s2));
    let small = g1.len() <= 2 && g2.len() <= 2;
    let sol = match d {
        DivergenceKind::L2Sq if small => solver::l2_box_qp(&g1, &g2),
        DivergenceKind::L2Sq => solver::l2_wolfe(&g1, &g2),
        DivergenceKind::Tv => solver::tv_lp(&g1, &g2)?,
        DivergenceKind::HellingerSq if small => {
            solver::nested_golden(&g1, &g2, crate::dist::raw_hellinger_sq)
        }
        DivergenceKind::HellingerSq => solver::hellinger_frank_wolfe(&g1, &g2),
        other => {
            return Err(Error::Unsupported(format!(
                "gap under {} is not supported; use l2sq, hellinger or tv",
                other.name()
            )))
        }
    };
    let p = s1.point(&sol.w1)?;
    let q = s2.point(&sol.w2)?;
    let value = divergence(d, &p, &q)?;
    Ok(GapReport {
        divergence: d,
        value,
        argmin_pair: (p, q),
        iterations: sol.iterations,
        converged: sol.converged && sol.iterations <= MAX_ITERATIONS * 4,
    })
}

/// The smallest gap over features and unordered label pairs, with its witness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseGap {
    pub report: GapReport,
    pub feature: usize,
    pub labels: (usize, usize),
}

/// Minimum of [`gap`] over `features` and all label pairs `y < y'`. Ties keep
/// the first witness in (feature, y, y') order.
pub fn min_pairwise_gap(k: &NoiseKernel, features: &[usize], d: DivergenceKind) -> Result<PairwiseGap> {
    min_pairwise_gap_with(k, features, d, |x, y| k.kernel_set(x, y))
}

/// [`min_pairwise_gap`] for the sets in force at round `step`.
pub fn min_pairwise_gap_at(
    k: &NoiseKernel,
    step: usize,
    features: &[usize],
    d: DivergenceKind,
) -> Result<PairwiseGap> {
    min_pairwise_gap_with(k, features, d, |x, y| k.kernel_set_at(step, x, y))
}

fn min_pairwise_gap_with(
    k: &NoiseKernel,
    features: &[usize],
    d: DivergenceKind,
    set: impl Fn(usize, usize) -> Result<KernelSet>,
) -> Result<PairwiseGap> {
    if features.is_empty() {
        return Err(Error::InvalidParameter("feature list is empty".into()));
    }
    let n = k.num_labels();
    let mut best: Option<PairwiseGap> = None;
    let mut all_converged = true;
    for &x in features {
        let sets: Vec<KernelSet> = (0..n).map(|y| set(x, y)).collect::<Result<_>>()?;
        for y in 0..n {
            for y2 in (y + 1)..n {
                let report = gap(&sets[y], &sets[y2], d)?;
                all_converged &= report.converged;
                if best.as_ref().is_none_or(|b| report.value < b.report.value) {
                    best = Some(PairwiseGap {
                        report,
                        feature: x,
                        labels: (y, y2),
                    });
                }
            }
        }
    }
    let mut best = best.expect("at least one feature and two labels");
    best.report.converged = all_converged;
    Ok(best)
}

/// Euclidean projection of a distribution onto a kernel set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection {
    pub point: Distribution,
    pub dist_sq: f64,
    pub converged: bool,
}

/// `argmin_{q ∈ s} ||p - q||²`. Exact on segments; Wolfe's algorithm on
/// polytopes.
pub fn project_l2(p: &Distribution, s: &KernelSet) -> Result<Projection> {
    if p.len() != s.dim() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: s.dim(),
        });
    }
    let (point, converged) = match s {
        KernelSet::Singleton(d) => (d.clone(), true),
        KernelSet::Segment(a, b) => {
            let t = solver::project_segment(p.probs(), a.probs(), b.probs());
            (s.point(&[1.0 - t, t])?, true)
        }
        KernelSet::Polytope(_) => {
            let shifted: Rows = rows(s)
                .into_iter()
                .map(|v| v.iter().zip(p.probs()).map(|(a, b)| a - b).collect())
                .collect();
            let mn = solver::min_norm_point(&shifted);
            (s.point(&mn.weights)?, mn.converged)
        }
    };
    let dist_sq = solver::l2(p.probs(), point.probs());
    Ok(Projection {
        point,
        dist_sq,
        converged,
    })
}
