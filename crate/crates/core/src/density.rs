//! Inversion of a fitted characteristic-tensor model into densities.
//!
//! Every conditional density is a trigonometric polynomial
//! `f_n(x | h) = Σ_k A_n(k, h) exp(−j·2π·k·x)` on `[0, 1]`, so joint densities,
//! marginals and conditional means all reduce to per-dimension inner sums.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::CpdModel;
use crate::tensor::ComplexMatrix;

/// Floor applied inside logarithms and to conditioning evidence.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Coordinate system of query points and returned densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// Raw data units; densities include the normalization Jacobian.
    Raw,
    /// The unit hypercube the model lives in.
    Normalized,
}

/// Density value with the diagnostics of how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Clamped, non-negative density in the requested space.
    pub density: f64,
    /// Complex model value before taking the real part and clamping, in the
    /// requested space.
    pub signed: Complex64,
    /// Coordinates that fell outside `[0, 1]` after normalization.
    pub clamped_coords: usize,
}

/// `Σ_k A(k, h) exp(−j·2π·k·x)` for every component `h`.
pub(crate) fn inner_sums(factor: &ComplexMatrix, k_max: usize, x: f64) -> Vec<Complex64> {
    let phases: Vec<Complex64> = (0..factor.nrows())
        .map(|r| Complex64::cis(-TAU * (r as f64 - k_max as f64) * x))
        .collect();
    (0..factor.ncols())
        .map(|h| factor.column(h).iter().zip(&phases).map(|(a, p)| a * p).sum())
        .collect()
}

fn to_unit(model: &CpdModel, var: usize, x: f64, space: Space, clamped: &mut usize) -> f64 {
    let y = match space {
        Space::Raw => model.scaling().forward(var, x),
        Space::Normalized => x,
    };
    if !(0.0..=1.0).contains(&y) {
        *clamped += 1;
    }
    y.clamp(0.0, 1.0)
}

/// Signed mixture value over a subset of variables with given unit-cube coordinates.
fn mixture(model: &CpdModel, coords: &[(usize, f64)]) -> Complex64 {
    let mut prod: Vec<Complex64> = model.lambda().iter().map(|&w| Complex64::new(w, 0.0)).collect();
    for &(var, y) in coords {
        let s = inner_sums(model.factor(var), model.k_max(), y);
        prod.iter_mut().zip(s).for_each(|(p, s)| *p *= s);
    }
    prod.into_iter().sum()
}

/// Density of the marginal over the listed variables; the remaining variables are
/// integrated out exactly.
pub fn evaluate_subset(model: &CpdModel, point: &[(usize, f64)], space: Space) -> Result<Evaluation> {
    let mut clamped = 0;
    let mut coords = Vec::with_capacity(point.len());
    for &(var, x) in point {
        if var >= model.n_vars() {
            return Err(Error::Argument(format!("variable {var} out of range")));
        }
        if !x.is_finite() {
            return Err(Error::Argument(format!("non-finite coordinate for variable {var}")));
        }
        coords.push((var, to_unit(model, var, x, space, &mut clamped)));
    }
    let mut signed = mixture(model, &coords);
    if space == Space::Raw {
        signed *= model.scaling().jacobian(point.iter().map(|&(v, _)| v));
    }
    Ok(Evaluation {
        density: signed.re.max(0.0),
        signed,
        clamped_coords: clamped,
    })
}

/// Joint density at a full point.
pub fn evaluate(model: &CpdModel, x: &[f64], space: Space) -> Result<Evaluation> {
    if x.len() != model.n_vars() {
        return Err(Error::Dimension {
            context: "density query point",
            expected: model.n_vars(),
            found: x.len(),
        });
    }
    let point: Vec<(usize, f64)> = x.iter().copied().enumerate().collect();
    evaluate_subset(model, &point, space)
}

/// Non-negative joint density at `x`.
pub fn pdf_eval(model: &CpdModel, x: &[f64], space: Space) -> Result<f64> {
    Ok(evaluate(model, x, space)?.density)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodReport {
    /// Mean log-density over scored rows.
    pub mean: f64,
    pub scored: usize,
    /// Rows scored on the marginal of their observed subset.
    pub partial_rows: usize,
    /// Rows without any observed cell.
    pub skipped: usize,
    pub floor_hits: usize,
    pub clamped_coords: usize,
}

/// Average log-likelihood per row. Rows with missing cells are scored on the
/// marginal of their observed variables.
pub fn log_likelihood(model: &CpdModel, data: &Dataset, space: Space) -> Result<LikelihoodReport> {
    if data.n_vars() != model.n_vars() {
        return Err(Error::Dimension {
            context: "dataset vs model",
            expected: model.n_vars(),
            found: data.n_vars(),
        });
    }
    let mut total = 0.0;
    let mut report = LikelihoodReport {
        mean: f64::NAN,
        scored: 0,
        partial_rows: 0,
        skipped: 0,
        floor_hits: 0,
        clamped_coords: 0,
    };
    for row in 0..data.n_rows() {
        let point: Vec<(usize, f64)> = (0..data.n_vars())
            .filter_map(|c| data.get(row, c).map(|v| (c, v)))
            .collect();
        if point.is_empty() {
            report.skipped += 1;
            continue;
        }
        if point.len() < data.n_vars() {
            report.partial_rows += 1;
        }
        let ev = evaluate_subset(model, &point, space)?;
        report.clamped_coords += ev.clamped_coords;
        if ev.density < DENSITY_FLOOR {
            report.floor_hits += 1;
        }
        total += ev.density.max(DENSITY_FLOOR).ln();
        report.scored += 1;
    }
    if report.scored == 0 {
        return Err(Error::InsufficientData("no observed rows to score".into()));
    }
    report.mean = total / report.scored as f64;
    Ok(report)
}

/// `∫₀¹ x·exp(−j·2π·k·x) dx`; the `k = 0` limit is `1/2`.
pub fn first_moment_coefficient(k: i64) -> Complex64 {
    if k == 0 {
        return Complex64::new(0.5, 0.0);
    }
    let a = Complex64::new(0.0, -TAU * k as f64);
    let e = a.exp();
    e / a + (Complex64::new(1.0, 0.0) - e) / (a * a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: f64,
    /// The conditioning evidence fell below [`DENSITY_FLOOR`].
    pub low_evidence: bool,
}

/// `E[X_target | observed]` under the model. Variables that are neither
/// observed nor the target are marginalized out.
pub fn conditional_mean(
    model: &CpdModel,
    observed: &[(usize, f64)],
    target: usize,
    space: Space,
) -> Result<Prediction> {
    if target >= model.n_vars() {
        return Err(Error::Argument(format!("target {target} out of range")));
    }
    if observed.iter().any(|&(v, _)| v == target) {
        return Err(Error::Argument(format!("target {target} is also observed")));
    }
    let mut clamped = 0;
    let mut weights: Vec<Complex64> = model.lambda().iter().map(|&w| Complex64::new(w, 0.0)).collect();
    for &(var, x) in observed {
        if var >= model.n_vars() || !x.is_finite() {
            return Err(Error::Argument(format!("bad observation for variable {var}")));
        }
        let y = to_unit(model, var, x, space, &mut clamped);
        let s = inner_sums(model.factor(var), model.k_max(), y);
        weights.iter_mut().zip(s).for_each(|(w, s)| *w *= s);
    }
    let evidence: Complex64 = weights.iter().sum();
    let grid = model.grid();
    let moments: Vec<Complex64> = grid.frequencies().map(first_moment_coefficient).collect();
    let a = model.factor(target);
    let numerator: Complex64 = weights
        .iter()
        .enumerate()
        .map(|(h, w)| w * a.column(h).iter().zip(&moments).map(|(a, c)| a * c).sum::<Complex64>())
        .sum();
    // The density is the real part of the model, so both integrals are too.
    let low_evidence = evidence.re < DENSITY_FLOOR;
    let unit = numerator.re / evidence.re.max(DENSITY_FLOOR);
    let value = match space {
        Space::Raw => model.scaling().inverse(target, unit),
        Space::Normalized => unit,
    };
    Ok(Prediction { value, low_evidence })
}

/// Observed values and the variables to predict.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityQuery {
    pub observed: Vec<(usize, f64)>,
    pub targets: Vec<usize>,
}

/// Predicts every target by its conditional mean given the observed values,
/// with the other targets marginalized out.
pub fn impute(model: &CpdModel, query: &DensityQuery, space: Space) -> Result<Vec<Prediction>> {
    if query.targets.is_empty() {
        return Err(Error::Argument("no target variables".into()));
    }
    for (i, t) in query.targets.iter().enumerate() {
        if query.targets[..i].contains(t) {
            return Err(Error::Argument(format!("target {t} listed twice")));
        }
    }
    query
        .targets
        .iter()
        .map(|&t| conditional_mean(model, &query.observed, t, space))
        .collect()
}
