use rand::Rng;
use serde::Serialize;

use crate::dist::{raw_l2_sq, random_simplex, Distribution};
use crate::error::{Error, Result};

/// A closed convex set of distributions, given by its generators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum KernelSet {
    Singleton(Distribution),
    /// The closed segment `[a, b]`.
    Segment(Distribution, Distribution),
    /// Convex hull of the vertices.
    Polytope(Vec<Distribution>),
}

impl KernelSet {
    pub fn singleton(d: Distribution) -> Self {
        KernelSet::Singleton(d)
    }

    /// Segment between two endpoints. Coincident endpoints collapse to a
    /// singleton so the segment invariant (distinct endpoints) always holds.
    pub fn segment(a: Distribution, b: Distribution) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        if a == b {
            return Ok(KernelSet::Singleton(a));
        }
        Ok(KernelSet::Segment(a, b))
    }

    pub fn polytope(vertices: Vec<Distribution>) -> Result<Self> {
        let first = vertices
            .first()
            .ok_or_else(|| Error::InvalidParameter("polytope needs at least one vertex".into()))?;
        for v in &vertices {
            if v.len() != first.len() {
                return Err(Error::DimensionMismatch {
                    left: first.len(),
                    right: v.len(),
                });
            }
        }
        Ok(KernelSet::Polytope(vertices))
    }

    /// Observation arity `M` of every member.
    pub fn dim(&self) -> usize {
        self.generators()[0].len()
    }

    /// Generators in a fixed order. A segment lists both endpoints.
    pub fn generators(&self) -> Vec<&Distribution> {
        match self {
            KernelSet::Singleton(d) => vec![d],
            KernelSet::Segment(a, b) => vec![a, b],
            KernelSet::Polytope(vs) => vs.iter().collect(),
        }
    }

    pub fn num_generators(&self) -> usize {
        match self {
            KernelSet::Singleton(_) => 1,
            KernelSet::Segment(..) => 2,
            KernelSet::Polytope(vs) => vs.len(),
        }
    }

    /// The member `Σ w_i g_i` for mixture weights over the generators.
    pub fn point(&self, weights: &[f64]) -> Result<Distribution> {
        if weights.len() != self.num_generators() {
            return Err(Error::DimensionMismatch {
                left: weights.len(),
                right: self.num_generators(),
            });
        }
        Distribution::mixture(weights, &self.generators())
    }

    /// Whether `p` lies in the set, up to squared L² distance `tol`.
    pub fn contains(&self, p: &Distribution, tol: f64) -> Result<bool> {
        let proj = super::project_l2(p, self)?;
        Ok(proj.dist_sq <= tol)
    }
}

/// How the adversary picks a member of a kernel set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SampleStrategy {
    /// The generator nearest to `target` in L², ties to the lowest index.
    /// With `target` set to the other label's distribution this is the
    /// member that is hardest to tell apart from it.
    Worst(Distribution),
    VertexIndex(usize),
    /// Mixture weights drawn uniformly from the simplex.
    UniformMixture,
}

/// Picks a member of `s` according to `strategy`.
pub fn sample_from<R: Rng + ?Sized>(
    s: &KernelSet,
    strategy: &SampleStrategy,
    rng: &mut R,
) -> Result<Distribution> {
    let gens = s.generators();
    match strategy {
        SampleStrategy::Worst(target) => {
            if target.len() != s.dim() {
                return Err(Error::DimensionMismatch {
                    left: s.dim(),
                    right: target.len(),
                });
            }
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (i, g) in gens.iter().enumerate() {
                let d = raw_l2_sq(g.probs(), target.probs());
                if d < best_d {
                    best = i;
                    best_d = d;
                }
            }
            Ok(gens[best].clone())
        }
        SampleStrategy::VertexIndex(i) => {
            if let KernelSet::Singleton(d) = s {
                return Ok(d.clone());
            }
            gens.get(*i).map(|d| (*d).clone()).ok_or(Error::IndexOutOfRange {
                what: "vertex",
                index: *i,
                len: gens.len(),
            })
        }
        SampleStrategy::UniformMixture => match s {
            KernelSet::Singleton(d) => Ok(d.clone()),
            _ => {
                let w = random_simplex(rng, gens.len());
                Distribution::mixture(&w, &gens)
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bern(t: f64) -> Distribution {
        Distribution::bernoulli(t).unwrap()
    }

    #[test]
    fn segment_collapses_equal_endpoints() {
        let s = KernelSet::segment(bern(0.2), bern(0.2)).unwrap();
        assert!(matches!(s, KernelSet::Singleton(_)));
        assert!(KernelSet::segment(bern(0.2), Distribution::uniform(3).unwrap()).is_err());
        assert!(KernelSet::polytope(vec![]).is_err());
    }

    #[test]
    fn singleton_ignores_strategy() {
        let s = KernelSet::Singleton(bern(0.3));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for st in [
            SampleStrategy::Worst(bern(1.0)),
            SampleStrategy::VertexIndex(0),
            SampleStrategy::UniformMixture,
        ] {
            assert_eq!(sample_from(&s, &st, &mut rng).unwrap(), bern(0.3));
        }
    }

    #[test]
    fn worst_picks_endpoint_nearest_target() {
        let s = KernelSet::segment(bern(0.0), bern(0.25)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let q = sample_from(&s, &SampleStrategy::Worst(bern(1.0)), &mut rng).unwrap();
        assert_eq!(q, bern(0.25));
    }

    #[test]
    fn vertex_index_out_of_range() {
        let s = KernelSet::segment(bern(0.0), bern(0.25)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_from(&s, &SampleStrategy::VertexIndex(2), &mut rng),
            Err(Error::IndexOutOfRange { index: 2, len: 2, .. })
        ));
    }

    #[test]
    fn uniform_mixture_is_reproducible_and_inside() {
        let s = KernelSet::segment(bern(0.0), bern(0.25)).unwrap();
        let a = sample_from(&s, &SampleStrategy::UniformMixture, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_from(&s, &SampleStrategy::UniformMixture, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.get(1) >= 0.0 && a.get(1) <= 0.25);
        assert!(s.contains(&a, 1e-14).unwrap());
    }
}
