//! Ancestral sampling: draw the latent component from `λ`, then every variable
//! independently from its conditional density by grid inverse-CDF.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::density::inner_sums;
use crate::error::{Error, Result};
use crate::model::CpdModel;

pub const DEFAULT_GRID_SIZE: usize = 1024;

/// Draws per parallel work unit; each unit gets its own sub-stream of the seed.
const CHUNK: usize = 4096;

/// Tabulated CDF of a clamped, renormalized density on an even grid over `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCdf {
    density: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridCdf {
    /// Tabulates `f` at `size` evenly spaced nodes including both endpoints.
    /// Negative values are clamped to zero; returns `None` if nothing is left.
    pub fn from_fn(size: usize, f: impl Fn(f64) -> f64) -> Option<Self> {
        let size = size.max(2);
        let step = 1.0 / (size - 1) as f64;
        let mut density: Vec<f64> = (0..size).map(|i| f(i as f64 * step).max(0.0)).collect();
        let mut cdf = Vec::with_capacity(size);
        cdf.push(0.0);
        for w in density.windows(2) {
            cdf.push(cdf.last().unwrap() + 0.5 * (w[0] + w[1]) * step);
        }
        let total = *cdf.last().unwrap();
        if !(total > 0.0 && total.is_finite()) {
            return None;
        }
        cdf.iter_mut().for_each(|c| *c /= total);
        *cdf.last_mut().unwrap() = 1.0;
        density.iter_mut().for_each(|d| *d /= total);
        Some(Self { density, cdf })
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    /// Renormalized density at the grid nodes.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// Inverse CDF with linear interpolation between nodes.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let step = 1.0 / (self.cdf.len() - 1) as f64;
        // First node with cdf >= u, skipping a leading zero-mass run.
        let first = self.cdf.partition_point(|&c| c <= 0.0);
        let hi = self.cdf.partition_point(|&c| c < u).max(first).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[hi - 1], self.cdf[hi]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        ((hi - 1) as f64 + t) * step
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        self.quantile(rng.random())
    }
}

/// Categorical draw from the simplex vector `lambda`.
pub fn sample_component(lambda: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (h, &w) in lambda.iter().enumerate() {
        acc += w;
        if u < acc {
            return h;
        }
    }
    // Rounding left `u` beyond the accumulated mass.
    lambda.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Grid CDF of the conditional density of variable `n` under component `h`.
pub fn conditional_cdf(model: &CpdModel, n: usize, h: usize, grid_size: usize) -> Result<GridCdf> {
    if n >= model.n_vars() || h >= model.rank() {
        return Err(Error::Argument(format!("no variable {n} / component {h} in model")));
    }
    let column = model.factor(n).columns(h, 1).into_owned();
    GridCdf::from_fn(grid_size, |x| inner_sums(&column, model.k_max(), x)[0].re).ok_or(
        Error::DegenerateComponent {
            variable: n,
            component: h,
        },
    )
}

/// One draw of variable `n` given component `h`, in the unit interval. Builds
/// the CDF from scratch; use [`Sampler`] for repeated draws.
pub fn sample_conditional(model: &CpdModel, n: usize, h: usize, rng: &mut impl Rng) -> Result<f64> {
    Ok(conditional_cdf(model, n, h, DEFAULT_GRID_SIZE)?.sample(rng))
}

/// Sampler with a lazily built, thread-safe cache of conditional CDFs.
#[derive(Debug)]
pub struct Sampler<'a> {
    model: &'a CpdModel,
    grid_size: usize,
    cache: Vec<OnceLock<Option<GridCdf>>>,
}

impl<'a> Sampler<'a> {
    pub fn new(model: &'a CpdModel) -> Self {
        Self::with_grid_size(model, DEFAULT_GRID_SIZE)
    }

    pub fn with_grid_size(model: &'a CpdModel, grid_size: usize) -> Self {
        Self {
            model,
            grid_size,
            cache: (0..model.n_vars() * model.rank()).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn model(&self) -> &CpdModel {
        self.model
    }

    pub fn cdf(&self, n: usize, h: usize) -> Result<&GridCdf> {
        if n >= self.model.n_vars() || h >= self.model.rank() {
            return Err(Error::Argument(format!("no variable {n} / component {h} in model")));
        }
        self.cache[n * self.model.rank() + h]
            .get_or_init(|| conditional_cdf(self.model, n, h, self.grid_size).ok())
            .as_ref()
            .ok_or(Error::DegenerateComponent {
                variable: n,
                component: h,
            })
    }

    pub fn sample_conditional(&self, n: usize, h: usize, rng: &mut impl Rng) -> Result<f64> {
        Ok(self.cdf(n, h)?.sample(rng))
    }

    /// One joint draw in the unit hypercube.
    pub fn draw_normalized(&self, rng: &mut impl Rng) -> Result<Vec<f64>> {
        let h = sample_component(self.model.lambda(), rng);
        (0..self.model.n_vars())
            .map(|n| self.sample_conditional(n, h, rng))
            .collect()
    }

    /// `count` joint draws in raw units. Work is split into fixed-size chunks,
    /// each on its own ChaCha stream of `seed`, so the output does not depend
    /// on the number of threads.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Dataset> {
        if count == 0 {
            return Err(Error::Argument("sample count must be at least 1".into()));
        }
        let chunks: Vec<Result<Vec<f64>>> = (0..count.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(c as u64);
                let rows = CHUNK.min(count - c * CHUNK);
                let mut out = Vec::with_capacity(rows * self.model.n_vars());
                for _ in 0..rows {
                    let draw = self.draw_normalized(&mut rng)?;
                    out.extend(draw.iter().enumerate().map(|(n, &y)| self.model.scaling().inverse(n, y)));
                }
                Ok(out)
            })
            .collect();
        let mut values = Vec::with_capacity(count * self.model.n_vars());
        for chunk in chunks {
            values.extend(chunk?);
        }
        Dataset::new(self.model.n_vars(), values)
    }
}

/// `count` draws from `model` in raw units, reproducible for a given `seed`.
pub fn sample(model: &CpdModel, count: usize, seed: u64) -> Result<Dataset> {
    Sampler::new(model).sample(count, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ScalingRecord;
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use std::f64::consts::TAU;

    /// Kolmogorov–Smirnov statistic of a sample against the uniform CDF.
    fn ks_uniform(mut xs: Vec<f64>) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
            .fold(0.0, f64::max)
    }

    #[test]
    fn degenerate_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| sample_component(&[1.0, 0.0, 0.0], &mut rng) == 0));
        assert!((0..1000).all(|_| sample_component(&[0.0, 0.0, 1.0], &mut rng) == 2));
    }

    #[test]
    fn categorical_frequencies_within_three_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            counts[sample_component(&[0.25; 4], &mut rng)] += 1;
        }
        let sigma = (draws as f64 * 0.25 * 0.75).sqrt();
        assert!(counts.iter().all(|&c| (c as f64 - 25_000.0).abs() < 3.0 * sigma), "{counts:?}");

        let mut ones = 0usize;
        for _ in 0..draws {
            ones += sample_component(&[0.2, 0.8], &mut rng);
        }
        let sigma = (draws as f64 * 0.2 * 0.8).sqrt();
        assert!((ones as f64 - 80_000.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn uniform_component_passes_ks() {
        let model = CpdModel::uniform(1, 3, ScalingRecord::identity(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| sample_conditional(&model, 0, 0, &mut rng).unwrap())
            .collect();
        assert!(ks_uniform(xs) < 1.628 / 100.0);
    }

    #[test]
    fn gaussian_bump_mean() {
        let (mu, sigma, k_max) = (0.35, 0.08, 4usize);
        let column = DMatrix::from_fn(2 * k_max + 1, 1, |r, _| {
            let k = r as f64 - k_max as f64;
            Complex64::from_polar((-0.5 * (TAU * k * sigma).powi(2)).exp(), TAU * k * mu)
        });
        let model = CpdModel::new(k_max, vec![1.0], vec![column], ScalingRecord::identity(1)).unwrap();
        let cdf = conditional_cdf(&model, 0, 0, DEFAULT_GRID_SIZE).unwrap();

        // Quadrature moments of the clamped density on a fine midpoint grid.
        let fine = 1 << 16;
        let dens = |x: f64| inner_sums(model.factor(0), k_max, x)[0].re.max(0.0);
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..fine {
            let x = (i as f64 + 0.5) / fine as f64;
            let f = dens(x);
            z += f;
            m1 += x * f;
            m2 += x * x * f;
        }
        let mean = m1 / z;
        let sd = (m2 / z - mean * mean).sqrt();

        let draws = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let avg = (0..draws).map(|_| cdf.sample(&mut rng)).sum::<f64>() / draws as f64;
        assert!((avg - mean).abs() < 3.0 * sd / (draws as f64).sqrt(), "{avg} vs {mean}");
    }

    #[test]
    fn cdf_shape() {
        let cdf = GridCdf::from_fn(16, |x| x - 0.5).unwrap();
        assert_eq!(cdf.cdf()[0], 0.0);
        assert_eq!(*cdf.cdf().last().unwrap(), 1.0);
        assert!(cdf.cdf().windows(2).all(|w| w[0] <= w[1]));
        assert!(cdf.quantile(0.0) >= 0.5 - 1.0 / 15.0);
        assert_eq!(cdf.quantile(1.0), 1.0);
        assert!(GridCdf::from_fn(16, |_| -1.0).is_none());
    }

    #[test]
    fn degenerate_component_is_reported() {
        // Density 1 − 100·cos(2πx): unit mean, but negative at both ends of a
        // two-node grid.
        let mut a = DMatrix::from_element(3, 2, Complex64::new(0.0, 0.0));
        a.row_mut(1).fill(Complex64::new(1.0, 0.0));
        a[(0, 1)] = Complex64::new(-50.0, 0.0);
        a[(2, 1)] = Complex64::new(-50.0, 0.0);
        let model = CpdModel::new(1, vec![0.5, 0.5], vec![a], ScalingRecord::identity(1)).unwrap();
        assert!(Sampler::new(&model).cdf(0, 1).is_ok());
        let coarse = Sampler::with_grid_size(&model, 2);
        assert!(coarse.cdf(0, 0).is_ok());
        assert!(matches!(
            coarse.cdf(0, 1),
            Err(Error::DegenerateComponent { variable: 0, component: 1 })
        ));
        assert!(matches!(coarse.cdf(1, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn seeded_sampling_is_deterministic_and_chunked() {
        let rec = ScalingRecord::from_bounds(&[(0.0, 10.0), (-1.0, 1.0)]).unwrap();
        let model = CpdModel::uniform(2, 2, rec).unwrap();
        let a = sample(&model, 10_000, 7).unwrap();
        let b = sample(&model, 10_000, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.n_rows(), a.n_vars()), (10_000, 2));
        let c = sample(&model, 10_000, 8).unwrap();
        assert_ne!(a, c);
        assert!(a.column(0).iter().all(|&x| (0.0..=10.0).contains(&x)));
        assert!(sample(&model, 0, 7).is_err());
    }

    #[test]
    fn uniform_model_marginals_pass_ks() {
        let model = CpdModel::uniform(3, 2, ScalingRecord::identity(3)).unwrap();
        let data = sample(&model, 10_000, 11).unwrap();
        for n in 0..3 {
            assert!(ks_uniform(data.column(n)) < 1.628 / 100.0);
        }
    }
}
