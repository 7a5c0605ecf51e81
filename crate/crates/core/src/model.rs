use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::data::ScalingRecord;
use crate::ecf::TripleCf;
use crate::error::{Error, Result};
use crate::tensor::{self, ComplexMatrix, FrequencyGrid, Tensor3};

/// Tolerance on `Σλ = 1` when validating a model.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Rank-`F` factorization of the characteristic tensor of `N` variables.
///
/// `lambda[h]` is the probability of latent component `h`, and column `h` of
/// `factors[n]` holds the characteristic function of variable `n` given that
/// component, sampled at `k = -K..=K`. The zero-frequency row is all ones.
#[derive(Debug, Clone, PartialEq)]
pub struct CpdModel {
    k_max: usize,
    lambda: Vec<f64>,
    factors: Vec<ComplexMatrix>,
    scaling: ScalingRecord,
}

impl CpdModel {
    pub fn new(
        k_max: usize,
        lambda: Vec<f64>,
        factors: Vec<ComplexMatrix>,
        scaling: ScalingRecord,
    ) -> Result<Self> {
        let model = Self {
            k_max,
            lambda,
            factors,
            scaling,
        };
        model.validate()?;
        Ok(model)
    }

    /// Product of uniform densities on the unit cube.
    pub fn uniform(n_vars: usize, k_max: usize, scaling: ScalingRecord) -> Result<Self> {
        let grid = FrequencyGrid::new(k_max);
        let delta = DMatrix::from_fn(grid.len(), 1, |r, _| {
            Complex64::new(if r == grid.zero() { 1.0 } else { 0.0 }, 0.0)
        });
        Self::new(k_max, vec![1.0], vec![delta; n_vars], scaling)
    }

    /// Checks shapes, the simplex constraint on `lambda`, and the zero-frequency rows.
    pub fn validate(&self) -> Result<()> {
        let f = self.lambda.len();
        let grid = self.grid();
        if f == 0 || self.factors.is_empty() {
            return Err(Error::Argument("model needs at least one component and variable".into()));
        }
        if self.scaling.len() != self.factors.len() {
            return Err(Error::Dimension {
                context: "model scaling",
                expected: self.factors.len(),
                found: self.scaling.len(),
            });
        }
        for a in &self.factors {
            if a.shape() != (grid.len(), f) {
                return Err(Error::Dimension {
                    context: "factor shape",
                    expected: grid.len() * f,
                    found: a.len(),
                });
            }
            if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Argument("non-finite factor entry".into()));
            }
            if a.row(grid.zero()).iter().any(|&z| z != Complex64::new(1.0, 0.0)) {
                return Err(Error::Argument("zero-frequency factor row must be all ones".into()));
            }
        }
        let sum: f64 = self.lambda.iter().sum();
        if self.lambda.iter().any(|&w| !(w >= 0.0)) || (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Argument(format!(
                "component weights must lie on the probability simplex (sum {sum})"
            )));
        }
        Ok(())
    }

    pub fn n_vars(&self) -> usize {
        self.factors.len()
    }

    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn grid(&self) -> FrequencyGrid {
        FrequencyGrid::new(self.k_max)
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn factors(&self) -> &[ComplexMatrix] {
        &self.factors
    }

    pub fn factor(&self, n: usize) -> &ComplexMatrix {
        &self.factors[n]
    }

    pub fn scaling(&self) -> &ScalingRecord {
        &self.scaling
    }

    pub(crate) fn set_lambda(&mut self, lambda: Vec<f64>) {
        debug_assert_eq!(lambda.len(), self.lambda.len());
        self.lambda = lambda;
    }

    pub(crate) fn set_factor(&mut self, n: usize, a: ComplexMatrix) {
        debug_assert_eq!(a.shape(), self.factors[n].shape());
        self.factors[n] = a;
    }

    pub fn entry(&self, k: &[i64]) -> Result<Complex64> {
        let refs: Vec<&ComplexMatrix> = self.factors.iter().collect();
        tensor::cpd_entry(&self.lambda, &refs, self.grid(), k)
    }

    /// The `(2K+1)³` characteristic tensor of the triple `(i, j, l)`.
    pub fn synthesize_triple(&self, i: usize, j: usize, l: usize) -> Result<Tensor3> {
        if !(i < j && j < l && l < self.n_vars()) {
            return Err(Error::Argument(format!(
                "triple ({i}, {j}, {l}) must be strictly increasing and below {}",
                self.n_vars()
            )));
        }
        self.synthesize_group(&[i, j, l])
    }

    /// Model counterpart of a [`TripleCf`] over the same variables.
    pub fn synthesize_group(&self, vars: &[usize]) -> Result<Tensor3> {
        let ones = DMatrix::from_element(1, self.rank(), Complex64::new(1.0, 0.0));
        let pick = |p: usize| vars.get(p).map_or(&ones, |&v| &self.factors[v]);
        tensor::synthesize3(&self.lambda, pick(0), pick(1), pick(2))
    }

    /// Synthesizes the model at the triples' variable groups (useful for tests and planting).
    pub fn synthesize_like(&self, cfs: &[TripleCf]) -> Result<Vec<TripleCf>> {
        cfs.iter()
            .map(|t| TripleCf::new(t.vars().to_vec(), self.synthesize_group(t.vars())?, t.count()))
            .collect()
    }

    /// Model over the variables in `keep` (in that order); dropped variables are
    /// marginalized out, which leaves `lambda` untouched because each
    /// conditional characteristic function equals one at the origin.
    pub fn marginal(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::Argument("marginal needs at least one variable".into()));
        }
        if let Some(&bad) = keep.iter().find(|&&v| v >= self.n_vars()) {
            return Err(Error::Argument(format!("variable {bad} out of range")));
        }
        Ok(Self {
            k_max: self.k_max,
            lambda: self.lambda.clone(),
            factors: keep.iter().map(|&v| self.factors[v].clone()).collect(),
            scaling: self.scaling.select(keep),
        })
    }

    /// Consistently relabels the latent components: new component `h` is old `perm[h]`.
    pub fn permute_components(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.rank()];
        if perm.len() != self.rank() || perm.iter().any(|&p| p >= seen.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Argument("not a permutation of the components".into()));
        }
        Ok(Self {
            k_max: self.k_max,
            lambda: perm.iter().map(|&p| self.lambda[p]).collect(),
            factors: self
                .factors
                .iter()
                .map(|a| DMatrix::from_fn(a.nrows(), a.ncols(), |r, h| a[(r, perm[h])]))
                .collect(),
            scaling: self.scaling.clone(),
        })
    }
}
