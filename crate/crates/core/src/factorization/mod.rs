//! Coupled CPD fitting of characteristic tensors by block coordinate descent:
//! exact constrained least-squares factor updates followed by an ADMM
//! simplex-constrained update of the component weights.

mod coupled;
mod identifiability;
mod simplex;

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use coupled::{admm_simplex_least_squares, AdmmOptions, CoupledProblem, DEFAULT_RIDGE};
pub use identifiability::{check_generic_identifiability, Identifiability};
pub use simplex::project_simplex;

use crate::data::{normalize, Dataset, ScalingRecord, DEFAULT_PAD};
use crate::ecf::{self, TripleCf, DEFAULT_MIN_COUNT, DEFAULT_MIN_COVER};
use crate::error::{Error, Result};
use crate::model::CpdModel;
use crate::tensor::{ComplexMatrix, FrequencyGrid};

/// How raw values are mapped into the unit hypercube before fitting.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    /// Observed min/max per column, leaving `pad` on each side.
    FromData { pad: f64 },
    /// Data already lives in `[0, 1]`.
    Unit,
    /// Known per-column bounds.
    Bounds(Vec<(f64, f64)>),
}

impl Default for Support {
    fn default() -> Self {
        Support::FromData { pad: DEFAULT_PAD }
    }
}

impl Support {
    /// Normalized data, its scaling record and the number of clamped cells.
    pub fn normalize(&self, data: &Dataset) -> Result<(Dataset, ScalingRecord, usize)> {
        match self {
            Support::FromData { pad } => {
                let (d, rec) = normalize(data, *pad)?;
                Ok((d, rec, 0))
            }
            Support::Unit => {
                let rec = ScalingRecord::identity(data.n_vars());
                let (d, clamped) = rec.apply(data)?;
                Ok((d, rec, clamped))
            }
            Support::Bounds(bounds) => {
                let rec = ScalingRecord::from_bounds(bounds)?;
                let (d, clamped) = rec.apply(data)?;
                Ok((d, rec, clamped))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub rank: usize,
    pub k_max: usize,
    pub max_outer_iters: usize,
    /// Stop when the relative objective change over one sweep falls below this.
    pub rel_tol: f64,
    pub admm: AdmmOptions,
    /// Maximum number of triples; `None` uses all of them.
    pub triple_budget: Option<usize>,
    pub min_count: usize,
    pub min_cover: usize,
    pub seed: u64,
    pub restarts: usize,
    pub weight_by_count: bool,
    pub support: Support,
    /// Record the objective after every block update, not just every sweep.
    pub track_steps: bool,
}

impl FitOptions {
    pub fn new(rank: usize, k_max: usize) -> Self {
        Self {
            rank,
            k_max,
            max_outer_iters: 200,
            rel_tol: 1e-6,
            admm: AdmmOptions::default(),
            triple_budget: None,
            min_count: DEFAULT_MIN_COUNT,
            min_cover: DEFAULT_MIN_COVER,
            seed: 0,
            restarts: 3,
            weight_by_count: false,
            support: Support::default(),
            track_steps: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.rank == 0 || self.k_max == 0 {
            return Err(Error::Argument("rank and harmonic cutoff must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) || !(self.admm.ridge >= 0.0) || self.admm.rho.is_some_and(|r| !(r > 0.0)) {
            return Err(Error::Argument("tolerances and penalties must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Argument("at least one restart is required".into()));
        }
        Ok(())
    }
}

/// Which block an objective sample follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Init,
    Factor(usize),
    Lambda,
}

/// Trace of one block-coordinate-descent run.
#[derive(Debug, Clone)]
pub struct Run {
    pub model: CpdModel,
    /// Objective at initialization and after each outer sweep.
    pub trajectory: Vec<f64>,
    /// Objective after every block update (only when tracking steps).
    pub steps: Vec<(Step, f64)>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    /// Trajectory of the selected restart.
    pub trajectory: Vec<f64>,
    pub steps: Vec<(Step, f64)>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time: Duration,
    /// Final objective of every restart, in order.
    pub restart_objectives: Vec<f64>,
    pub selected_restart: usize,
    /// Variable groups entering the objective and their final squared residuals.
    pub residuals: Vec<(Vec<usize>, f64)>,
    pub dropped: Vec<Vec<usize>>,
    pub clamped_cells: usize,
    pub identifiability: Identifiability,
    pub warnings: Vec<String>,
}

impl FitReport {
    pub fn final_objective(&self) -> f64 {
        self.trajectory.last().copied().unwrap_or(f64::NAN)
    }
}

/// Variable groups to estimate: all (or a budgeted subset of) triples for
/// three or more variables, otherwise the single full group.
pub fn variable_groups(n_vars: usize, opts: &FitOptions) -> Result<Vec<Vec<usize>>> {
    if n_vars >= 3 {
        let budget = opts.triple_budget.unwrap_or(usize::MAX);
        Ok(ecf::select_triples(n_vars, budget, opts.seed, opts.min_cover)?
            .into_iter()
            .map(|t| t.to_vec())
            .collect())
    } else {
        Ok(vec![(0..n_vars).collect()])
    }
}

/// Estimates every group's characteristic tensor in parallel; groups without
/// enough joint observations are returned separately instead of failing.
pub fn estimate_groups(
    data: &Dataset,
    groups: &[Vec<usize>],
    k_max: usize,
    min_count: usize,
) -> Result<(Vec<TripleCf>, Vec<Vec<usize>>)> {
    let results: Vec<Result<TripleCf>> = groups
        .par_iter()
        .map(|g| ecf::estimate_group(data, g, k_max, min_count))
        .collect();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for r in results {
        match r {
            Ok(t) => kept.push(t),
            Err(Error::InsufficientOverlap { vars, .. }) => dropped.push(vars),
            Err(e) => return Err(e),
        }
    }
    Ok((kept, dropped))
}

/// Random initialization satisfying the constraints: uniform weights and
/// conjugate-symmetric unit phases shrunk by `1/(1+|k|)`, zero-frequency row one.
pub fn initial_model(
    n_vars: usize,
    rank: usize,
    k_max: usize,
    scaling: ScalingRecord,
    rng: &mut impl Rng,
) -> Result<CpdModel> {
    let grid = FrequencyGrid::new(k_max);
    let factors = (0..n_vars)
        .map(|_| {
            let mut a = ComplexMatrix::zeros(grid.len(), rank);
            for h in 0..rank {
                a[(grid.zero(), h)] = Complex64::new(1.0, 0.0);
                for k in 1..=k_max {
                    let z = Complex64::from_polar(1.0 / (1.0 + k as f64), TAU * rng.random::<f64>());
                    a[(grid.zero() + k, h)] = z;
                    a[(grid.zero() - k, h)] = z.conj();
                }
            }
            a
        })
        .collect();
    let mut lambda = vec![1.0 / rank as f64; rank];
    lambda[0] += 1.0 - lambda.iter().sum::<f64>();
    CpdModel::new(k_max, lambda, factors, scaling)
}

/// Block coordinate descent from a given model: factors in ascending variable
/// order, then the weights, until the relative change of the objective over a
/// sweep drops below `rel_tol` or `max_outer_iters` sweeps have run.
pub fn run_from(problem: &CoupledProblem, init: CpdModel, opts: &FitOptions) -> Result<Run> {
    let mut model = init;
    let mut prev = problem.objective(&model)?;
    let mut trajectory = vec![prev];
    let mut steps = Vec::new();
    if opts.track_steps {
        steps.push((Step::Init, prev));
    }
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_outer_iters {
        iterations += 1;
        for n in 0..model.n_vars() {
            let a = problem.factor_update(n, &model, opts.admm.ridge)?;
            model.set_factor(n, a);
            if opts.track_steps {
                steps.push((Step::Factor(n), problem.objective(&model)?));
            }
        }
        let lambda = problem.lambda_update(&model, &opts.admm)?;
        model.set_lambda(lambda);
        let cur = problem.objective(&model)?;
        if opts.track_steps {
            steps.push((Step::Lambda, cur));
        }
        trajectory.push(cur);
        if !cur.is_finite() {
            return Err(Error::Divergence);
        }
        let change = (prev - cur).abs() / prev.max(f64::MIN_POSITIVE);
        prev = cur;
        if change < opts.rel_tol {
            converged = true;
            break;
        }
    }
    Ok(Run {
        model,
        trajectory,
        steps,
        iterations,
        converged,
    })
}

/// Fits a rank-`F` characteristic-tensor model to (possibly incomplete) raw data.
pub fn fit(data: &Dataset, opts: &FitOptions) -> Result<(CpdModel, FitReport)> {
    let start = Instant::now();
    opts.validate()?;
    let (normalized, scaling, clamped_cells) = opts.support.normalize(data)?;
    let n_vars = data.n_vars();
    let groups = variable_groups(n_vars, opts)?;
    let (triples, dropped) = estimate_groups(&normalized, &groups, opts.k_max, opts.min_count)?;
    let mut warnings: Vec<String> = dropped
        .iter()
        .map(|g| format!("dropped variables {g:?}: fewer than {} joint observations", opts.min_count))
        .collect();
    if let Some(v) = (0..n_vars).find(|v| !triples.iter().any(|t| t.vars().contains(v))) {
        return Err(Error::InsufficientData(format!(
            "variable {v} is not covered by any retained characteristic tensor"
        )));
    }
    let problem = if opts.weight_by_count {
        CoupledProblem::weighted_by_count(triples)?
    } else {
        CoupledProblem::new(triples)?
    };

    let mut best: Option<(usize, Run)> = None;
    let mut restart_objectives = Vec::with_capacity(opts.restarts);
    for restart in 0..opts.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(restart as u64 + 1);
        let init = initial_model(n_vars, opts.rank, opts.k_max, scaling.clone(), &mut rng)?;
        let run = run_from(&problem, init, opts)?;
        let obj = *run.trajectory.last().expect("trajectory is never empty");
        restart_objectives.push(obj);
        if best.as_ref().is_none_or(|(_, b)| obj < *b.trajectory.last().unwrap()) {
            best = Some((restart, run));
        }
    }
    let (selected_restart, run) = best.expect("at least one restart");
    if !run.converged {
        warnings.push(format!(
            "did not converge within {} sweeps (rel_tol {})",
            opts.max_outer_iters, opts.rel_tol
        ));
    }
    let identifiability = check_generic_identifiability(opts.k_max, opts.rank);
    if !identifiability.is_ok() {
        warnings.push(identifiability.to_string());
    }
    if clamped_cells > 0 {
        warnings.push(format!("{clamped_cells} training cells clamped into the unit interval"));
    }
    let residuals = problem
        .triples()
        .iter()
        .map(|t| t.vars().to_vec())
        .zip(problem.residuals(&run.model)?)
        .collect();
    let report = FitReport {
        trajectory: run.trajectory,
        steps: run.steps,
        iterations: run.iterations,
        converged: run.converged,
        wall_time: start.elapsed(),
        restart_objectives,
        selected_restart,
        residuals,
        dropped,
        clamped_cells,
        identifiability,
        warnings,
    };
    Ok((run.model, report))
}
