//! The coupled least-squares objective over a set of characteristic tensors
//! and its exact block updates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::simplex::project_simplex;
use crate::ecf::TripleCf;
use crate::error::{Error, Result};
use crate::model::CpdModel;
use crate::tensor::{khatri_rao, ComplexMatrix};

/// Relative ridge added to every normal-equation solve: `ε = ridge · tr(G) / F`.
pub const DEFAULT_RIDGE: f64 = 1e-10;

/// Characteristic tensors with per-tensor weights, sharing one frequency grid.
#[derive(Debug, Clone)]
pub struct CoupledProblem {
    triples: Vec<TripleCf>,
    weights: Vec<f64>,
    k_max: usize,
}

impl CoupledProblem {
    /// Equal weights.
    pub fn new(triples: Vec<TripleCf>) -> Result<Self> {
        let weights = vec![1.0; triples.len()];
        Self::with_weights(triples, weights)
    }

    /// Weights proportional to the joint observation counts, normalized to mean one.
    pub fn weighted_by_count(triples: Vec<TripleCf>) -> Result<Self> {
        let mean = triples.iter().map(|t| t.count() as f64).sum::<f64>() / triples.len().max(1) as f64;
        let weights = triples.iter().map(|t| t.count() as f64 / mean).collect();
        Self::with_weights(triples, weights)
    }

    pub fn with_weights(triples: Vec<TripleCf>, weights: Vec<f64>) -> Result<Self> {
        let first = triples
            .first()
            .ok_or_else(|| Error::InsufficientData("no characteristic tensors to fit".into()))?;
        let k_max = first.k_max();
        if let Some(t) = triples.iter().find(|t| t.k_max() != k_max) {
            return Err(Error::Dimension {
                context: "harmonic cutoff across tensors",
                expected: k_max,
                found: t.k_max(),
            });
        }
        if weights.len() != triples.len() || weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Argument("one positive weight per tensor required".into()));
        }
        Ok(Self {
            triples,
            weights,
            k_max,
        })
    }

    pub fn triples(&self) -> &[TripleCf] {
        &self.triples
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    fn check_model(&self, model: &CpdModel) -> Result<()> {
        if model.k_max() != self.k_max {
            return Err(Error::Dimension {
                context: "harmonic cutoff of model vs tensors",
                expected: self.k_max,
                found: model.k_max(),
            });
        }
        if let Some(&v) = self.triples.iter().flat_map(|t| t.vars()).find(|&&v| v >= model.n_vars()) {
            return Err(Error::Argument(format!("tensor refers to variable {v} outside the model")));
        }
        Ok(())
    }

    /// Weighted squared residual of each tensor.
    pub fn residuals(&self, model: &CpdModel) -> Result<Vec<f64>> {
        self.check_model(model)?;
        self.triples
            .par_iter()
            .zip(&self.weights)
            .map(|(t, &w)| Ok(w * t.tensor().distance_sq(&model.synthesize_group(t.vars())?)?))
            .collect()
    }

    /// `Σ_t w_t ‖Φ_t − [[λ; A_i, A_j, A_l]]‖²_F`.
    pub fn objective(&self, model: &CpdModel) -> Result<f64> {
        Ok(self.residuals(model)?.into_iter().sum())
    }

    /// Exact minimizer of the objective over factor `n` with its zero-frequency
    /// row pinned to ones.
    ///
    /// Accumulates `G = (λλᵀ) ⊛ Σ QᴴQ` and `V = diag(λ) Σ Qᴴ Φ₍ₚ₎` over the
    /// tensors containing `n`, where `Φ₍ₚ₎` unfolds along the mode of `n` and `Q`
    /// is the Khatri-Rao product of the other two factors. The least-squares
    /// problem decouples across the frequency rows of `A_n`, so solving all rows
    /// and then overwriting the zero-frequency row is the constrained optimum.
    pub fn factor_update(&self, n: usize, model: &CpdModel, ridge: f64) -> Result<ComplexMatrix> {
        self.check_model(model)?;
        let f = model.rank();
        let ones = DMatrix::from_element(1, f, Complex64::new(1.0, 0.0));
        let involved: Vec<(usize, usize)> = self
            .triples
            .iter()
            .enumerate()
            .filter_map(|(idx, t)| t.mode_of(n).map(|p| (idx, p)))
            .collect();
        if involved.is_empty() {
            return Err(Error::InsufficientData(format!(
                "variable {n} appears in no retained characteristic tensor"
            )));
        }
        let parts: Vec<(ComplexMatrix, ComplexMatrix)> = involved
            .par_iter()
            .map(|&(idx, mode)| {
                let t = &self.triples[idx];
                let factor = |pos: usize| t.vars().get(pos).map_or(&ones, |&v| model.factor(v));
                let (q, r) = match mode {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                let (bq, br) = (factor(q), factor(r));
                let gram = (br.adjoint() * br).component_mul(&(bq.adjoint() * bq));
                let kr = khatri_rao(br, bq)?;
                let rhs = kr.adjoint() * t.tensor().unfold(mode);
                let w = self.weights[idx];
                Ok((gram * Complex64::new(w, 0.0), rhs * Complex64::new(w, 0.0)))
            })
            .collect::<Result<_>>()?;
        let grid_len = model.grid().len();
        let mut gram = DMatrix::<Complex64>::zeros(f, f);
        let mut rhs = DMatrix::<Complex64>::zeros(f, grid_len);
        for (g, v) in parts {
            gram += g;
            rhs += v;
        }
        let lambda = model.lambda();
        for a in 0..f {
            for b in 0..f {
                gram[(a, b)] *= lambda[a] * lambda[b];
            }
            for c in 0..grid_len {
                rhs[(a, c)] *= lambda[a];
            }
        }
        let x = solve_hermitian(gram, rhs, ridge).ok_or(Error::IllConditioned { variable: n })?;
        let mut a = x.transpose();
        let zero = model.grid().zero();
        a.row_mut(zero).fill(Complex64::new(1.0, 0.0));
        Ok(a)
    }

    /// Real normal equations for `λ`: `G = Re Σ QᴴQ` via the Hadamard identity
    /// and `V = Re Σ Qᴴ vec(Φ)`, with `Q = A_l ⊙ A_j ⊙ A_i` never materialized.
    pub fn lambda_normal_equations(&self, model: &CpdModel) -> Result<(DMatrix<f64>, DVector<f64>)> {
        self.check_model(model)?;
        let f = model.rank();
        let ones = DMatrix::from_element(1, f, Complex64::new(1.0, 0.0));
        let parts: Vec<(ComplexMatrix, Vec<Complex64>)> = self
            .triples
            .par_iter()
            .zip(&self.weights)
            .map(|(t, &w)| {
                let factor = |pos: usize| t.vars().get(pos).map_or(&ones, |&v| model.factor(v));
                let (a, b, c) = (factor(0), factor(1), factor(2));
                let gram = (a.adjoint() * a)
                    .component_mul(&(b.adjoint() * b))
                    .component_mul(&(c.adjoint() * c));
                let [di, dj, dl] = t.tensor().dims();
                let data = t.tensor().as_slice();
                let mut v = vec![Complex64::default(); f];
                let mut ab = vec![Complex64::default(); f];
                let mut pos = 0;
                for i in 0..di {
                    for j in 0..dj {
                        for h in 0..f {
                            ab[h] = (a[(i, h)] * b[(j, h)]).conj();
                        }
                        for l in 0..dl {
                            let phi = data[pos];
                            pos += 1;
                            for h in 0..f {
                                v[h] += ab[h] * c[(l, h)].conj() * phi;
                            }
                        }
                    }
                }
                (gram * Complex64::new(w, 0.0), v.into_iter().map(|z| z * w).collect())
            })
            .collect();
        let mut gram = DMatrix::<f64>::zeros(f, f);
        let mut rhs = DVector::<f64>::zeros(f);
        for (g, v) in parts {
            gram += g.map(|z| z.re);
            rhs += DVector::from_iterator(f, v.into_iter().map(|z| z.re));
        }
        Ok((gram, rhs))
    }

    /// Simplex-constrained least-squares update of `λ` by ADMM, warm-started at
    /// the current weights with a zero dual. Returns the projected iterate.
    pub fn lambda_update(&self, model: &CpdModel, admm: &AdmmOptions) -> Result<Vec<f64>> {
        let (gram, rhs) = self.lambda_normal_equations(model)?;
        admm_simplex_least_squares(&gram, &rhs, model.lambda(), admm)
    }
}

/// Penalty and iteration budget of the `λ` update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmOptions {
    pub iterations: usize,
    /// Fixed penalty; `None` uses `tr(G)/F`.
    pub rho: Option<f64>,
    pub ridge: f64,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self {
            iterations: 50,
            rho: None,
            ridge: DEFAULT_RIDGE,
        }
    }
}

/// ADMM for `min_λ λᵀGλ − 2Vᵀλ` over the probability simplex:
///
/// ```text
/// λ̂ ← (G + ρI)⁻¹ (V + ρ(λ + u))
/// λ ← P(λ̂ − u)
/// u ← u + λ − λ̂
/// ```
pub fn admm_simplex_least_squares(
    gram: &DMatrix<f64>,
    rhs: &DVector<f64>,
    start: &[f64],
    opts: &AdmmOptions,
) -> Result<Vec<f64>> {
    let f = start.len();
    if gram.shape() != (f, f) || rhs.len() != f {
        return Err(Error::Dimension {
            context: "admm normal equations",
            expected: f,
            found: rhs.len(),
        });
    }
    if f == 1 {
        return Ok(vec![1.0]);
    }
    let trace = gram.trace();
    let rho = opts
        .rho
        .unwrap_or(trace / f as f64)
        .max(f64::MIN_POSITIVE.sqrt());
    let eps = opts.ridge * trace.max(0.0) / f as f64;
    let system = gram + DMatrix::identity(f, f) * (rho + eps);
    let chol = system.cholesky().ok_or(Error::Divergence)?;
    let mut lambda = DVector::from_column_slice(start);
    let mut dual = DVector::<f64>::zeros(f);
    for _ in 0..opts.iterations {
        let hat = chol.solve(&(rhs + (&lambda + &dual) * rho));
        let proj = project_simplex((&hat - &dual).as_slice());
        lambda = DVector::from_vec(proj);
        dual += &lambda - &hat;
        if dual.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence);
        }
    }
    Ok(lambda.as_slice().to_vec())
}

/// Solves `(G + εI) X = V` for Hermitian positive semidefinite `G`, falling
/// back to LU when Cholesky breaks down.
fn solve_hermitian(gram: ComplexMatrix, rhs: ComplexMatrix, ridge: f64) -> Option<ComplexMatrix> {
    let f = gram.nrows();
    let trace: f64 = (0..f).map(|i| gram[(i, i)].re).sum();
    let eps = ridge * trace.max(f64::MIN_POSITIVE) / f as f64;
    let mut system = gram;
    for i in 0..f {
        system[(i, i)] += eps;
    }
    let x = match system.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => system.lu().solve(&rhs)?,
    };
    x.iter()
        .all(|z| z.re.is_finite() && z.im.is_finite())
        .then_some(x)
}
