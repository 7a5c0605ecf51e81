//! Dense complex multilinear algebra for third-order characteristic tensors.
//!
//! Conventions used throughout the crate:
//!
//! * Frequencies `k ∈ [-K, K]` are stored at zero-based offset `k + K`, so the
//!   zero frequency lives at offset `K`.
//! * In a Khatri-Rao product `A ⊙ B` the row index of `B` varies fastest:
//!   row `i·J + j` holds `A(i,:) ∘ B(j,:)`.
//! * Unfolding a tensor along mode `p` produces rows indexed by the two
//!   remaining modes `q < r` as `idx_r · dim_q + idx_q`, which is the row order
//!   of `khatri_rao(A_r, A_q)`. Hence
//!   `unfold(T, p) == khatri_rao(A_r, A_q) · diag(λ) · A_pᵀ` for a CPD tensor.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The symmetric integer frequency grid `[-K, K]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrequencyGrid {
    k_max: usize,
}

impl FrequencyGrid {
    pub fn new(k_max: usize) -> Self {
        Self { k_max }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Number of frequencies, `2K + 1`.
    pub fn len(&self) -> usize {
        2 * self.k_max + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Storage offset of the zero frequency.
    pub fn zero(&self) -> usize {
        self.k_max
    }

    pub fn offset(&self, k: i64) -> Result<usize> {
        if k.unsigned_abs() as usize > self.k_max {
            return Err(Error::FrequencyOutOfRange { k, max: self.k_max });
        }
        Ok((k + self.k_max as i64) as usize)
    }

    pub fn frequency(&self, offset: usize) -> i64 {
        debug_assert!(offset < self.len());
        offset as i64 - self.k_max as i64
    }

    /// Frequencies in storage order, `-K..=K`.
    pub fn frequencies(&self) -> impl Iterator<Item = i64> {
        let k = self.k_max as i64;
        -k..=k
    }
}

/// Dense third-order complex tensor, row-major over `(i, j, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<Complex64>,
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: vec![ZERO; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for l in 0..dims[2] {
                    data.push(f(i, j, l));
                }
            }
        }
        Self { dims, data }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<Complex64>) -> Result<Self> {
        let expected = dims[0] * dims[1] * dims[2];
        if data.len() != expected {
            return Err(Error::Dimension {
                context: "tensor data",
                expected,
                found: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    fn index(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, l: usize) -> Complex64 {
        self.data[self.index(i, j, l)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, l: usize, v: Complex64) {
        let idx = self.index(i, j, l);
        self.data[idx] = v;
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Squared Frobenius distance to a tensor of identical shape.
    pub fn distance_sq(&self, other: &Tensor3) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::Dimension {
                context: "tensor distance",
                expected: self.data.len(),
                found: other.data.len(),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum())
    }

    /// Unfolding along `mode` (0, 1 or 2). See the module docs for row order.
    pub fn unfold(&self, mode: usize) -> ComplexMatrix {
        let [di, dj, dl] = self.dims;
        match mode {
            0 => DMatrix::from_fn(dj * dl, di, |r, i| self.get(i, r % dj, r / dj)),
            1 => DMatrix::from_fn(di * dl, dj, |r, j| self.get(r % di, j, r / di)),
            2 => DMatrix::from_fn(di * dj, dl, |r, l| self.get(r % di, r / di, l)),
            _ => panic!("third-order tensor has no mode {mode}"),
        }
    }

    /// Inverse of [`mode1_unfold`].
    pub fn fold_mode1(unfolded: &ComplexMatrix, dims: [usize; 3]) -> Result<Self> {
        let [di, dj, dl] = dims;
        if unfolded.nrows() != dj * dl || unfolded.ncols() != di {
            return Err(Error::Dimension {
                context: "mode-1 fold",
                expected: di * dj * dl,
                found: unfolded.len(),
            });
        }
        Ok(Self::from_fn(dims, |i, j, l| unfolded[(l * dj + j, i)]))
    }
}

/// Column-wise Kronecker product; the second operand's row index varies fastest.
pub fn khatri_rao(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension {
            context: "khatri-rao columns",
            expected: a.ncols(),
            found: b.ncols(),
        });
    }
    let rows_b = b.nrows();
    Ok(DMatrix::from_fn(a.nrows() * rows_b, a.ncols(), |r, h| {
        a[(r / rows_b, h)] * b[(r % rows_b, h)]
    }))
}

/// Mode-1 unfolding: `(J·L) × I` with row `l·J + j`.
pub fn mode1_unfold(t: &Tensor3) -> ComplexMatrix {
    t.unfold(0)
}

/// A single CPD entry `Σ_h λ(h) Π_n A_n(k_n + K, h)` without materializing the tensor.
///
/// `factors` all share the frequency grid `grid`.
pub fn cpd_entry(
    lambda: &[f64],
    factors: &[&ComplexMatrix],
    grid: FrequencyGrid,
    k: &[i64],
) -> Result<Complex64> {
    if factors.len() != k.len() {
        return Err(Error::Dimension {
            context: "frequency vector",
            expected: factors.len(),
            found: k.len(),
        });
    }
    let offsets = k
        .iter()
        .map(|&kn| grid.offset(kn))
        .collect::<Result<Vec<_>>>()?;
    for a in factors {
        if a.ncols() != lambda.len() || a.nrows() != grid.len() {
            return Err(Error::Dimension {
                context: "factor shape",
                expected: grid.len() * lambda.len(),
                found: a.len(),
            });
        }
    }
    Ok(lambda
        .iter()
        .enumerate()
        .map(|(h, &w)| {
            factors
                .iter()
                .zip(&offsets)
                .fold(Complex64::new(w, 0.0), |acc, (a, &o)| acc * a[(o, h)])
        })
        .sum())
}

/// Full third-order synthesis `[[λ; A, B, C]]`. Factors may have different row counts.
pub fn synthesize3(
    lambda: &[f64],
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    c: &ComplexMatrix,
) -> Result<Tensor3> {
    let f = lambda.len();
    for m in [a, b, c] {
        if m.ncols() != f {
            return Err(Error::Dimension {
                context: "synthesis rank",
                expected: f,
                found: m.ncols(),
            });
        }
    }
    let dims = [a.nrows(), b.nrows(), c.nrows()];
    let mut out = Tensor3::zeros(dims);
    let mut w = vec![ZERO; f];
    let data = out.as_mut_slice();
    let mut pos = 0;
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for h in 0..f {
                w[h] = a[(i, h)] * b[(j, h)] * lambda[h];
            }
            for l in 0..dims[2] {
                data[pos] = (0..f).map(|h| w[h] * c[(l, h)]).sum();
                pos += 1;
            }
        }
    }
    Ok(out)
}
