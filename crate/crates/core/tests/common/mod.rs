#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use chartensor::{ComplexMatrix, CpdModel, Dataset, ScalingRecord};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Mixture of separable Fejér-kernel bumps on the unit circle. Each bump has
/// characteristic function `(1 − |k|/(K+1))·exp(j2πkμ)` for `|k| ≤ K` and zero
/// beyond, so the planted characteristic tensor is exactly rank `F`.
#[derive(Debug, Clone)]
pub struct Planted {
    pub k_max: usize,
    pub lambda: Vec<f64>,
    /// `centers[n][h]`.
    pub centers: Vec<Vec<f64>>,
}

impl Planted {
    pub fn two_component(n_vars: usize) -> Self {
        Self {
            k_max: 3,
            lambda: vec![0.35, 0.65],
            centers: (0..n_vars)
                .map(|n| vec![0.2 + 0.05 * n as f64, 0.7 - 0.04 * n as f64])
                .collect(),
        }
    }

    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    pub fn n_vars(&self) -> usize {
        self.centers.len()
    }

    pub fn model(&self) -> CpdModel {
        let k = self.k_max as i64;
        let factors = self
            .centers
            .iter()
            .map(|mus| {
                DMatrix::from_fn(2 * self.k_max + 1, self.rank(), |r, h| {
                    let f = r as i64 - k;
                    let amp = 1.0 - f.abs() as f64 / (k + 1) as f64;
                    if f == 0 {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::from_polar(amp, TAU * f as f64 * mus[h])
                    }
                })
            })
            .collect();
        CpdModel::new(self.k_max, self.lambda.clone(), factors, ScalingRecord::identity(self.n_vars())).unwrap()
    }

    fn fejer(&self, t: f64) -> f64 {
        let k1 = (self.k_max + 1) as f64;
        1.0 + (1..=self.k_max)
            .map(|k| 2.0 * (1.0 - k as f64 / k1) * (TAU * k as f64 * t).cos())
            .sum::<f64>()
    }

    /// Rejection sampling against the uniform proposal (the kernel peaks at `K+1`).
    pub fn sample(&self, rows: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = (self.k_max + 1) as f64;
        let mut values = Vec::with_capacity(rows * self.n_vars());
        for _ in 0..rows {
            let u: f64 = rng.random();
            let h = if u < self.lambda[0] { 0 } else { 1 };
            for mus in &self.centers {
                loop {
                    let x: f64 = rng.random();
                    if rng.random::<f64>() * bound <= self.fejer(x - mus[h]) {
                        values.push(x);
                        break;
                    }
                }
            }
        }
        Dataset::new(self.n_vars(), values).unwrap()
    }
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct Recovery {
    /// Largest relative column error.
    pub max_column: f64,
    /// `‖Â − A‖_F / ‖A‖_F` over all factors stacked.
    pub aggregate: f64,
    pub lambda_tv: f64,
}

/// Errors of `fitted` against `truth` under the component permutation that
/// minimizes the aggregate factor error.
pub fn recovery(fitted: &CpdModel, truth: &CpdModel) -> Recovery {
    permutations(truth.rank())
        .into_iter()
        .map(|perm| {
            let p = fitted.permute_components(&perm).unwrap();
            let mut max_column: f64 = 0.0;
            let (mut num, mut den) = (0.0, 0.0);
            for (a, b) in p.factors().iter().zip(truth.factors()) {
                for h in 0..truth.rank() {
                    let d = (a.column(h) - b.column(h)).norm_squared();
                    let t = b.column(h).norm_squared();
                    max_column = max_column.max((d / t).sqrt());
                    num += d;
                    den += t;
                }
            }
            let lambda_tv = 0.5 * p.lambda().iter().zip(truth.lambda()).map(|(a, b)| (a - b).abs()).sum::<f64>();
            Recovery {
                max_column,
                aggregate: (num / den).sqrt(),
                lambda_tv,
            }
        })
        .min_by(|a, b| a.aggregate.total_cmp(&b.aggregate))
        .unwrap()
}

/// scikit-learn style two moons with isotropic Gaussian noise.
pub fn moons(rows: usize, noise: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise).unwrap();
    let mut values = Vec::with_capacity(2 * rows);
    for i in 0..rows {
        let t = PI * rng.random::<f64>();
        let (x, y) = if i % 2 == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        values.push(x + normal.sample(&mut rng));
        values.push(y + normal.sample(&mut rng));
    }
    Dataset::new(2, values).unwrap()
}

/// Two-sample energy-distance permutation test; returns the statistic and p-value.
pub fn energy_test(a: &Dataset, b: &Dataset, permutations: usize, seed: u64) -> (f64, f64) {
    let pts: Vec<&[f64]> = (0..a.n_rows())
        .map(|r| a.row_values(r))
        .chain((0..b.n_rows()).map(|r| b.row_values(r)))
        .collect();
    let n = pts.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let d = pts[i].iter().zip(pts[j]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let na = a.n_rows();
    let statistic = |labels: &[bool]| {
        let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let row = &dist[i * n..(i + 1) * n];
            for j in 0..n {
                match (labels[i], labels[j]) {
                    (true, true) => xx += row[j],
                    (false, false) => yy += row[j],
                    _ => xy += row[j],
                }
            }
        }
        let (fa, fb) = (na as f64, (n - na) as f64);
        xy / (fa * fb) - xx / (fa * fa) - yy / (fb * fb)
    };
    let mut labels: Vec<bool> = (0..n).map(|i| i < na).collect();
    let observed = statistic(&labels);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exceed = 0;
    for _ in 0..permutations {
        rand::seq::SliceRandom::shuffle(labels.as_mut_slice(), &mut rng);
        if statistic(&labels) >= observed {
            exceed += 1;
        }
    }
    (observed, (1 + exceed) as f64 / (1 + permutations) as f64)
}

/// Kolmogorov–Smirnov statistic against the uniform distribution on `[lo, hi]`.
pub fn ks_uniform(mut xs: Vec<f64>, lo: f64, hi: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let u = (x - lo) / (hi - lo);
            (u - i as f64 / n).max((i + 1) as f64 / n - u)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Midpoints of an `n`-cell partition of `[0, 1]`.
pub fn midpoints(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| (i as f64 + 0.5) / n as f64)
}

pub fn random_factor(rows: usize, cols: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let k = rows / 2;
    let mut a = DMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4))
    });
    a.row_mut(k).fill(Complex64::new(1.0, 0.0));
    a
}

pub fn report(criterion: &str, pass: bool, detail: impl AsRef<str>) {
    println!(
        "criterion {criterion}: {} {}",
        if pass { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
}
