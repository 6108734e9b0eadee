use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// A finite table of `K` hypotheses over features `0..F`, with labels in `0..N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisClass {
    labels: Vec<Vec<usize>>,
    num_labels: usize,
    names: Option<Vec<String>>,
}

impl HypothesisClass {
    /// Builds a class from rows `labels[k][x]`.
    pub fn new(labels: Vec<Vec<usize>>, num_labels: usize) -> Result<Self> {
        let f = labels
            .first()
            .map(|r| r.len())
            .ok_or_else(|| Error::InvalidParameter("hypothesis class needs K >= 1".into()))?;
        if f == 0 {
            return Err(Error::InvalidParameter("hypothesis class needs F >= 1".into()));
        }
        if num_labels < 2 {
            return Err(Error::InvalidParameter(format!("need N >= 2 labels, got {num_labels}")));
        }
        for (k, row) in labels.iter().enumerate() {
            if row.len() != f {
                return Err(Error::DimensionMismatch {
                    left: f,
                    right: row.len(),
                });
            }
            if let Some(&y) = row.iter().find(|&&y| y >= num_labels) {
                return Err(Error::InvalidParameter(format!(
                    "hypothesis {k} has label {y} >= N = {num_labels}"
                )));
            }
        }
        Ok(Self {
            labels,
            num_labels,
            names: None,
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.len() {
            return Err(Error::DimensionMismatch {
                left: self.len(),
                right: names.len(),
            });
        }
        self.names = Some(names);
        Ok(self)
    }

    /// `K` hypotheses with i.i.d. uniform labels, reproducible from `seed`.
    pub fn random(k: usize, f: usize, n: usize, seed: u64) -> Result<Self> {
        if k == 0 || n == 0 {
            return Err(Error::InvalidParameter("K and N must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels = (0..k)
            .map(|_| (0..f).map(|_| rng.gen_range(0..n)).collect())
            .collect();
        Self::new(labels, n)
    }

    /// The `2^τ` hypotheses `h_b(i) = b_i` over `τ` features.
    pub fn cube(tau: usize) -> Result<Self> {
        if tau == 0 || tau > 20 {
            return Err(Error::InvalidParameter(format!("cube dimension {tau} not in 1..=20")));
        }
        let labels = (0..1usize << tau)
            .map(|b| (0..tau).map(|i| (b >> i) & 1).collect())
            .collect();
        Self::new(labels, 2)
    }

    /// Constant hypotheses, one per label, over `f` features.
    pub fn constants(n: usize, f: usize) -> Result<Self> {
        Self::new((0..n).map(|y| vec![y; f]).collect(), n)
    }

    /// Number of hypotheses `K`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of features `F`.
    pub fn num_features(&self) -> usize {
        self.labels[0].len()
    }

    /// Number of labels `N`.
    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn label(&self, k: usize, x: usize) -> usize {
        self.labels[k][x]
    }

    pub fn row(&self, k: usize) -> &[usize] {
        &self.labels[k]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.labels
    }

    pub fn name(&self, k: usize) -> String {
        match &self.names {
            Some(n) => n[k].clone(),
            None => format!("h{k}"),
        }
    }

    /// Number of unordered pairs in `subset` that disagree at `x`.
    pub fn disagreeing_pairs(&self, subset: &[usize], x: usize) -> usize {
        let mut counts = vec![0usize; self.num_labels];
        for &k in subset {
            counts[self.labels[k][x]] += 1;
        }
        let n = subset.len();
        (n * n - counts.iter().map(|c| c * c).sum::<usize>()) / 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_shatters() {
        let c = HypothesisClass::cube(3).unwrap();
        assert_eq!(c.len(), 8);
        assert_eq!(c.num_features(), 3);
        assert_eq!(c.row(5), &[1, 0, 1]);
        let all: Vec<usize> = (0..8).collect();
        for x in 0..3 {
            assert_eq!(c.disagreeing_pairs(&all, x), 16);
        }
    }

    #[test]
    fn random_is_reproducible() {
        let a = HypothesisClass::random(4, 5, 3, 7).unwrap();
        let b = HypothesisClass::random(4, 5, 3, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.rows().iter().flatten().all(|&y| y < 3));
    }

    #[test]
    fn validation() {
        assert!(HypothesisClass::new(vec![], 2).is_err());
        assert!(HypothesisClass::new(vec![vec![]], 2).is_err());
        assert!(HypothesisClass::new(vec![vec![0, 2]], 2).is_err());
        assert!(HypothesisClass::new(vec![vec![0, 1], vec![0]], 2).is_err());
    }
}
