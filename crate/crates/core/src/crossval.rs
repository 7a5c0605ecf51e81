//! Hold-out selection of the rank and harmonic cutoff by validation log-likelihood.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::density::{log_likelihood, Space};
use crate::error::{Error, Result};
use crate::factorization::{fit, FitOptions, FitReport};
use crate::model::CpdModel;

pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct CvPlan {
    /// Candidate `(F, K)` pairs.
    pub grid: Vec<(usize, usize)>,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl CvPlan {
    pub fn new(grid: Vec<(usize, usize)>) -> Self {
        Self {
            grid,
            validation_fraction: DEFAULT_VALIDATION_FRACTION,
            seed: 0,
        }
    }

    /// Parses `"F=2,4,8;K=3,5"` into the Cartesian product of the two lists.
    pub fn parse_grid(spec: &str) -> Result<Vec<(usize, usize)>> {
        let mut ranks = None;
        let mut harmonics = None;
        for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, values) = part
                .split_once('=')
                .ok_or_else(|| Error::Argument(format!("grid entry {part:?} is not KEY=v1,v2")))?;
            let values = values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<usize>()
                        .ok()
                        .filter(|&v| v > 0)
                        .ok_or_else(|| Error::Argument(format!("invalid grid value {v:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let slot = match key.trim() {
                "F" | "f" => &mut ranks,
                "K" | "k" => &mut harmonics,
                other => return Err(Error::Argument(format!("unknown grid key {other:?}"))),
            };
            if slot.replace(values).is_some() {
                return Err(Error::Argument(format!("grid key {key:?} given twice")));
            }
        }
        let (Some(ranks), Some(harmonics)) = (ranks, harmonics) else {
            return Err(Error::Argument("grid needs both F= and K= lists".into()));
        };
        Ok(ranks
            .iter()
            .flat_map(|&f| harmonics.iter().map(move |&k| (f, k)))
            .collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Argument("cross-validation grid is empty".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Argument("validation fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Shuffled split into (training, validation) rows.
    pub fn split(&self, data: &Dataset) -> Result<(Dataset, Dataset)> {
        let mut rows: Vec<usize> = (0..data.n_rows()).collect();
        rows.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let n_val = (self.validation_fraction * rows.len() as f64).round() as usize;
        if n_val == 0 || n_val == rows.len() {
            return Err(Error::InsufficientData(format!(
                "{} rows cannot be split with validation fraction {}",
                rows.len(),
                self.validation_fraction
            )));
        }
        let (val, train) = rows.split_at(n_val);
        Ok((data.select_rows(train), data.select_rows(val)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvCell {
    pub rank: usize,
    pub k_max: usize,
    /// Mean raw-space validation log-likelihood, or why the cell failed.
    pub score: Result<f64, String>,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub cells: Vec<CvCell>,
    pub selected: (usize, usize),
    /// Selected configuration refit on all rows.
    pub model: CpdModel,
    pub report: FitReport,
}

pub struct CvTable<'a>(pub &'a [CvCell]);

impl fmt::Display for CvTable<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>4} {:>4}  validation log-likelihood", "F", "K")?;
        for cell in self.0 {
            match &cell.score {
                Ok(s) => writeln!(f, "{:>4} {:>4}  {s:.6}", cell.rank, cell.k_max)?,
                Err(e) => writeln!(f, "{:>4} {:>4}  failed: {e}", cell.rank, cell.k_max)?,
            }
        }
        Ok(())
    }
}

/// Scores every grid cell on a held-out split, picks the best (ties go to the
/// smaller `F`, then the smaller `K`) and refits it on all of `data`. Every
/// other field of `base` is shared by all fits.
pub fn cross_validate(data: &Dataset, plan: &CvPlan, base: &FitOptions) -> Result<CvOutcome> {
    plan.validate()?;
    let (train, val) = plan.split(data)?;
    let mut order = plan.grid.clone();
    order.sort_unstable();
    order.dedup();
    let cells: Vec<CvCell> = order
        .iter()
        .map(|&(rank, k_max)| {
            let opts = FitOptions {
                rank,
                k_max,
                ..base.clone()
            };
            let score = fit(&train, &opts)
                .and_then(|(model, _)| log_likelihood(&model, &val, Space::Raw))
                .map(|r| r.mean)
                .map_err(|e| e.to_string());
            CvCell { rank, k_max, score }
        })
        .collect();
    let mut best: Option<(f64, (usize, usize))> = None;
    for cell in &cells {
        if let Ok(s) = cell.score {
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, (cell.rank, cell.k_max)));
            }
        }
    }
    let Some((_, selected)) = best else {
        return Err(Error::CrossValidation(
            cells
                .iter()
                .map(|c| format!("F={} K={}: {}", c.rank, c.k_max, c.score.as_ref().unwrap_err()))
                .collect(),
        ));
    };
    let opts = FitOptions {
        rank: selected.0,
        k_max: selected.1,
        ..base.clone()
    };
    let (model, report) = fit(data, &opts)?;
    Ok(CvOutcome {
        cells,
        selected,
        model,
        report,
    })
}
