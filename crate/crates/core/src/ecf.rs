//! Empirical characteristic functions and characteristic tensors of variable
//! triples, estimated from normalized data in `[0, 1]`.
//!
//! The coefficient at integer frequency `k` is `Φ[k] = E[exp(j·2π·k·X)]`,
//! estimated by the sample mean over the rows in which the variables are
//! jointly observed.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::tensor::{FrequencyGrid, Tensor3};

/// Joint observations a triple needs before it enters the objective.
pub const DEFAULT_MIN_COUNT: usize = 30;
/// Minimum number of selected triples each variable must appear in.
pub const DEFAULT_MIN_COVER: usize = 3;
/// Cap on suggested harmonic cutoffs.
pub const K_MAX: usize = 30;

/// Empirical characteristic tensor of a group of at most three variables.
///
/// Triples are the normal case. Datasets with fewer than three variables use
/// a single pair or singleton, stored with trailing modes of length one (the
/// zero frequency of a variable that is not there).
#[derive(Debug, Clone, PartialEq)]
pub struct TripleCf {
    vars: Vec<usize>,
    tensor: Tensor3,
    count: usize,
}

impl TripleCf {
    pub fn new(vars: Vec<usize>, tensor: Tensor3, count: usize) -> Result<Self> {
        if vars.is_empty() || vars.len() > 3 || vars.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument(format!(
                "variable group {vars:?} must hold 1 to 3 strictly increasing indices"
            )));
        }
        let dims = tensor.dims();
        if dims.iter().skip(vars.len()).any(|&d| d != 1) {
            return Err(Error::Argument("unused tensor modes must have length one".into()));
        }
        Ok(Self { vars, tensor, count })
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn tensor(&self) -> &Tensor3 {
        &self.tensor
    }

    /// Rows in which all variables of the group were observed.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Harmonic cutoff `K` implied by the tensor shape.
    pub fn k_max(&self) -> usize {
        (self.tensor.dims()[0] - 1) / 2
    }

    /// Mode holding variable `var`, if the group contains it.
    pub fn mode_of(&self, var: usize) -> Option<usize> {
        self.vars.iter().position(|&v| v == var)
    }
}

/// `exp(j·2π·k·x)` for `k = -K..=K` in storage order.
pub(crate) fn phase_vector(x: f64, grid: FrequencyGrid, out: &mut [Complex64]) {
    let z = grid.zero();
    out[z] = Complex64::new(1.0, 0.0);
    for k in 1..=grid.k_max() {
        let p = Complex64::cis(TAU * k as f64 * x);
        out[z + k] = p;
        out[z - k] = p.conj();
    }
}

/// Sample-mean characteristic function of a univariate sample at frequency `k`.
pub fn ecf_point(samples: &[f64], k: i64) -> Result<Complex64> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples for characteristic function".into()));
    }
    if k == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let sum: Complex64 = samples.iter().map(|&x| Complex64::cis(TAU * k as f64 * x)).sum();
    Ok(sum / samples.len() as f64)
}

/// Characteristic tensor of the triple `(i, j, l)`; see [`estimate_group`].
pub fn estimate_triple(
    data: &Dataset,
    i: usize,
    j: usize,
    l: usize,
    k_max: usize,
    min_count: usize,
) -> Result<TripleCf> {
    if !(i < j && j < l) {
        return Err(Error::Argument(format!(
            "triple ({i}, {j}, {l}) must be strictly increasing"
        )));
    }
    estimate_group(data, &[i, j, l], k_max, min_count)
}

/// Characteristic tensor of up to three variables from the rows where all of
/// them are observed. Each row contributes the outer product of its per-variable
/// phase vectors.
pub fn estimate_group(
    data: &Dataset,
    vars: &[usize],
    k_max: usize,
    min_count: usize,
) -> Result<TripleCf> {
    if let Some(&bad) = vars.iter().find(|&&v| v >= data.n_vars()) {
        return Err(Error::Argument(format!(
            "variable {bad} out of range for {} columns",
            data.n_vars()
        )));
    }
    let grid = FrequencyGrid::new(k_max);
    let len = grid.len();
    let mut dims = [1usize; 3];
    dims[..vars.len()].iter_mut().for_each(|d| *d = len);
    let mut acc = Tensor3::zeros(dims);
    let mut phases = [
        vec![Complex64::new(1.0, 0.0); len],
        vec![Complex64::new(1.0, 0.0); len],
        vec![Complex64::new(1.0, 0.0); len],
    ];
    let mut scratch = vec![Complex64::default(); dims[1] * dims[2]];
    let mut count = 0usize;
    for row in 0..data.n_rows() {
        if !vars.iter().all(|&v| data.is_observed(row, v)) {
            continue;
        }
        count += 1;
        for (p, &v) in phases.iter_mut().zip(vars) {
            let x = data.get(row, v).unwrap_or_default();
            phase_vector(x, grid, p);
        }
        // Outer product of the trailing two modes once, then scale per leading index.
        for b in 0..dims[1] {
            for c in 0..dims[2] {
                scratch[b * dims[2] + c] = phases[1][b] * phases[2][c];
            }
        }
        let slab = dims[1] * dims[2];
        let out = acc.as_mut_slice();
        for a in 0..dims[0] {
            let pa = phases[0][a];
            for (o, s) in out[a * slab..(a + 1) * slab].iter_mut().zip(&scratch) {
                *o += pa * s;
            }
        }
    }
    if count < min_count.max(1) {
        return Err(Error::InsufficientOverlap {
            vars: vars.to_vec(),
            count,
            required: min_count.max(1),
        });
    }
    let inv = 1.0 / count as f64;
    acc.as_mut_slice().iter_mut().for_each(|z| *z *= inv);
    // The zero-frequency entry is an average of exact ones.
    let z = [grid.zero(), grid.zero(), grid.zero()];
    acc.set(
        z[0].min(dims[0] - 1),
        z[1].min(dims[1] - 1),
        z[2].min(dims[2] - 1),
        Complex64::new(1.0, 0.0),
    );
    TripleCf::new(vars.to_vec(), acc, count)
}

/// Number of triples over `n` variables.
pub fn triple_count(n: usize) -> usize {
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 6
    }
}

fn all_triples(n: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(triple_count(n));
    for i in 0..n {
        for j in i + 1..n {
            for l in j + 1..n {
                out.push([i, j, l]);
            }
        }
    }
    out
}

/// Chooses which variable triples enter the coupled objective.
///
/// With a budget of at least `C(n, 3)` every triple is returned in
/// lexicographic order. Otherwise a seeded subset is built greedily around the
/// least-covered variables so that each variable lands in at least `min_cover`
/// triples, and any remaining budget is filled at random.
pub fn select_triples(n: usize, budget: usize, seed: u64, min_cover: usize) -> Result<Vec<[usize; 3]>> {
    if n < 3 {
        return Err(Error::UnsupportedDimension(n));
    }
    if budget >= triple_count(n) {
        return Ok(all_triples(n));
    }
    let coverage_err = Error::Coverage {
        budget,
        n,
        min_cover,
    };
    if 3 * budget < n * min_cover || budget * 3 < n {
        return Err(coverage_err);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cover = vec![0usize; n];
    let mut chosen: Vec<[usize; 3]> = Vec::with_capacity(budget);
    let mut taken = std::collections::HashSet::new();

    while chosen.len() < budget {
        let Some(v) = argmin_cover(&cover, min_cover, &mut rng) else {
            break;
        };
        let mut others: Vec<(usize, u64, usize)> = (0..n)
            .filter(|&u| u != v)
            .map(|u| (cover[u], rng.random::<u64>(), u))
            .collect();
        others.sort_unstable();
        let mut picked = None;
        'search: for a in 0..others.len() {
            for b in a + 1..others.len() {
                let mut t = [v, others[a].2, others[b].2];
                t.sort_unstable();
                if !taken.contains(&t) {
                    picked = Some(t);
                    break 'search;
                }
            }
        }
        let Some(t) = picked else { break };
        taken.insert(t);
        t.iter().for_each(|&u| cover[u] += 1);
        chosen.push(t);
    }
    if cover.iter().any(|&c| c < min_cover) {
        return Err(coverage_err);
    }
    if chosen.len() < budget {
        let mut rest: Vec<[usize; 3]> = all_triples(n)
            .into_iter()
            .filter(|t| !taken.contains(t))
            .collect();
        rest.shuffle(&mut rng);
        chosen.extend(rest.into_iter().take(budget - chosen.len()));
    }
    chosen.sort_unstable();
    Ok(chosen)
}

fn argmin_cover(cover: &[usize], min_cover: usize, rng: &mut impl Rng) -> Option<usize> {
    let low = *cover.iter().min()?;
    if low >= min_cover {
        return None;
    }
    let ties: Vec<usize> = (0..cover.len()).filter(|&u| cover[u] == low).collect();
    Some(ties[rng.random_range(0..ties.len())])
}

/// Per-dimension harmonic cutoff suggestion.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSuggestion {
    pub per_dim: Vec<usize>,
    /// Shared cutoff: the maximum over dimensions.
    pub recommended: usize,
    /// Dimensions whose coefficients never fell below the threshold up to [`K_MAX`].
    pub capped: Vec<usize>,
}

/// For each dimension, the smallest `K` such that `|Φ̂[k]| < threshold` for
/// every `k` in `K+1..=K+3`. Relies on the decay of Fourier coefficients of
/// smooth densities.
pub fn suggest_harmonics(data: &Dataset, threshold: f64) -> Result<HarmonicSuggestion> {
    let mut per_dim = Vec::with_capacity(data.n_vars());
    let mut capped = Vec::new();
    for col in 0..data.n_vars() {
        let xs = data.column(col);
        let mags = (1..=(K_MAX + 3) as i64)
            .map(|k| ecf_point(&xs, k).map(|z| z.norm()))
            .collect::<Result<Vec<_>>>()?;
        let found = (0..=K_MAX).find(|&kk| mags[kk..kk + 3].iter().all(|&m| m < threshold));
        per_dim.push(found.unwrap_or_else(|| {
            capped.push(col);
            K_MAX
        }));
    }
    let recommended = per_dim.iter().copied().max().unwrap_or(0);
    Ok(HarmonicSuggestion {
        per_dim,
        recommended,
        capped,
    })
}
