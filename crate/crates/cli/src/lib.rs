//! Subcommands of the `chartensor` binary. Everything a command prints goes
//! to the writer passed to [`run`], so the commands can be driven from tests.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use chartensor::crossval::{cross_validate, CvPlan, CvTable, DEFAULT_VALIDATION_FRACTION};
use chartensor::data::DEFAULT_PAD;
use chartensor::density::{impute, log_likelihood, DensityQuery, Space};
use chartensor::factorization::{FitOptions, FitReport, Support};
use chartensor::{fit, load_model, read_csv_path, sample, save_model, write_csv, CpdModel, Dataset, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "chartensor", version, about = "Low-rank characteristic-tensor density estimation")]
pub struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true, env = "CHARTENSOR_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a CSV dataset.
    Train(TrainArgs),
    /// Select rank and harmonic cutoff on a validation split, then refit on all rows.
    Crossval(CrossvalArgs),
    /// Average log-likelihood of a dataset under a model.
    Eval(EvalArgs),
    /// Draw samples from a model.
    Sample(SampleArgs),
    /// Predict target columns by their conditional means given the other columns.
    Regress(RegressArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SupportKind {
    /// Observed range of each column, widened by --pad.
    Data,
    /// Values already lie in [0, 1].
    Unit,
}

#[derive(Debug, Args)]
pub struct Input {
    #[arg(long)]
    pub input: PathBuf,
    /// Field delimiter of the CSV input.
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Maximum number of variable triples to fit (all of them by default).
    #[arg(long = "triples")]
    pub triple_budget: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Minimum number of rows observing a whole triple for it to be kept.
    #[arg(long, default_value_t = 30)]
    pub min_count: usize,
    /// Weight each triple's residual by its number of joint observations.
    #[arg(long)]
    pub weight_by_count: bool,
    #[arg(long, value_enum, default_value_t = SupportKind::Data)]
    pub support: SupportKind,
    /// Relative padding around the observed range with `--support data`.
    #[arg(long, default_value_t = DEFAULT_PAD)]
    pub pad: f64,
}

impl FitArgs {
    fn options(&self, rank: usize, k_max: usize) -> FitOptions {
        FitOptions {
            triple_budget: self.triple_budget,
            seed: self.seed,
            restarts: self.restarts,
            max_outer_iters: self.max_iters,
            rel_tol: self.tol,
            min_count: self.min_count,
            weight_by_count: self.weight_by_count,
            support: match self.support {
                SupportKind::Data => Support::FromData { pad: self.pad },
                SupportKind::Unit => Support::Unit,
            },
            ..FitOptions::new(rank, k_max)
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: Input,
    #[arg(long, short = 'F')]
    pub rank: usize,
    #[arg(long, short = 'K')]
    pub harmonics: usize,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[command(flatten)]
    pub input: Input,
    /// Candidate values, e.g. "F=2,4,8;K=3,5,7".
    #[arg(long)]
    pub grid: String,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_VALIDATION_FRACTION)]
    pub validation_fraction: f64,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: Input,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Destination CSV; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: Input,
    /// Comma-separated target column names (or zero-based indices).
    #[arg(long)]
    pub targets: String,
    /// Destination CSV for predictions; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.into())
    }
}

impl CliError {
    /// 2 for usage errors, 4 for numerical failures, 3 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(e) if e.is_numerical() => 4,
            CliError::Run(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn delimiter(c: char) -> CliResult<u8> {
    u8::try_from(c)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| CliError::Usage(format!("delimiter {c:?} is not a single ASCII character")))
}

fn read_input(input: &Input) -> CliResult<Dataset> {
    Ok(read_csv_path(&input.input, delimiter(input.delimiter)?)?)
}

fn check_width(model: &CpdModel, data: &Dataset) -> CliResult {
    if model.n_vars() != data.n_vars() {
        return Err(CliError::Usage(format!(
            "model has {} variables but the input has {} columns",
            model.n_vars(),
            data.n_vars()
        )));
    }
    Ok(())
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult {
    match &cli.command {
        Command::Train(args) => train(args, out),
        Command::Crossval(args) => crossval(args, out),
        Command::Eval(args) => eval(args, out),
        Command::Sample(args) => sample_cmd(args, out),
        Command::Regress(args) => regress(args, out),
    }
}

fn print_report(model: &CpdModel, report: &FitReport, out: &mut dyn Write) -> CliResult {
    writeln!(out, "model: N={} F={} K={}", model.n_vars(), model.rank(), model.k_max())?;
    writeln!(
        out,
        "iterations: {} ({})",
        report.iterations,
        if report.converged { "converged" } else { "not converged" }
    )?;
    let trajectory: Vec<String> = report.trajectory.iter().map(|o| format!("{o:.6e}")).collect();
    writeln!(out, "objective trajectory: {}", trajectory.join(" "))?;
    let restarts: Vec<String> = report.restart_objectives.iter().map(|o| format!("{o:.6e}")).collect();
    writeln!(out, "restart objectives: {} (kept #{})", restarts.join(" "), report.selected_restart)?;
    writeln!(out, "lambda: {:.4?}", model.lambda())?;
    writeln!(out, "identifiability: {}", report.identifiability)?;
    for (vars, r) in &report.residuals {
        writeln!(out, "residual {vars:?}: {r:.6e}")?;
    }
    for w in &report.warnings {
        writeln!(out, "warning: {w}")?;
    }
    writeln!(out, "wall time: {:.3}s", report.wall_time.as_secs_f64())?;
    Ok(())
}

fn train(args: &TrainArgs, out: &mut dyn Write) -> CliResult {
    let data = read_input(&args.input)?;
    let (model, report) = fit(&data, &args.fit.options(args.rank, args.harmonics))?;
    save_model(&model, &args.output)?;
    print_report(&model, &report, out)?;
    writeln!(out, "wrote {}", args.output.display())?;
    Ok(())
}

fn crossval(args: &CrossvalArgs, out: &mut dyn Write) -> CliResult {
    let data = read_input(&args.input)?;
    let grid = CvPlan::parse_grid(&args.grid).map_err(|e| CliError::Usage(e.to_string()))?;
    let plan = CvPlan {
        grid,
        validation_fraction: args.validation_fraction,
        seed: args.fit.seed,
    };
    plan.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    // Rank and cutoff are overwritten per grid cell.
    let outcome = cross_validate(&data, &plan, &args.fit.options(1, 1))?;
    write!(out, "{}", CvTable(&outcome.cells))?;
    writeln!(out, "selected: F={} K={}", outcome.selected.0, outcome.selected.1)?;
    save_model(&outcome.model, &args.output)?;
    print_report(&outcome.model, &outcome.report, out)?;
    writeln!(out, "wrote {}", args.output.display())?;
    Ok(())
}

fn eval(args: &EvalArgs, out: &mut dyn Write) -> CliResult {
    let model = load_model(&args.model)?;
    let data = read_input(&args.input)?;
    check_width(&model, &data)?;
    let r = log_likelihood(&model, &data, Space::Raw)?;
    writeln!(out, "average log-likelihood: {:.6}", r.mean)?;
    writeln!(
        out,
        "rows scored: {} ({} on observed marginals, {} skipped)",
        r.scored, r.partial_rows, r.skipped
    )?;
    writeln!(out, "density floor hits: {}", r.floor_hits)?;
    writeln!(out, "clamped coordinates: {}", r.clamped_coords)?;
    Ok(())
}

fn sink(path: &Option<PathBuf>, out: &mut dyn Write, body: impl FnOnce(&mut dyn Write) -> CliResult) -> CliResult {
    match path {
        Some(p) => {
            let mut file = BufWriter::new(File::create(p)?);
            body(&mut file)?;
            file.flush()?;
            Ok(())
        }
        None => body(out),
    }
}

fn sample_cmd(args: &SampleArgs, out: &mut dyn Write) -> CliResult {
    if args.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let model = load_model(&args.model)?;
    let draws = sample(&model, args.count, args.seed)?;
    sink(&args.output, out, |w| Ok(write_csv(&draws, w)?))
}

fn resolve_targets(spec: &str, data: &Dataset) -> CliResult<Vec<usize>> {
    let mut targets = Vec::new();
    for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let idx = data
            .column_index(name)
            .or_else(|| name.parse::<usize>().ok().filter(|&i| i < data.n_vars()))
            .ok_or_else(|| CliError::Usage(format!("unknown target column {name:?}")))?;
        if targets.contains(&idx) {
            return Err(CliError::Usage(format!("target column {name:?} listed twice")));
        }
        targets.push(idx);
    }
    if targets.is_empty() {
        return Err(CliError::Usage("no target columns given".into()));
    }
    Ok(targets)
}

fn regress(args: &RegressArgs, out: &mut dyn Write) -> CliResult {
    let model = load_model(&args.model)?;
    let data = read_input(&args.input)?;
    check_width(&model, &data)?;
    let targets = resolve_targets(&args.targets, &data)?;

    let mut values = Vec::with_capacity(data.n_rows() * targets.len());
    let mut abs_err = vec![0.0; targets.len()];
    let mut truth_rows = vec![0usize; targets.len()];
    let mut low_evidence = 0;
    for row in 0..data.n_rows() {
        let observed = (0..data.n_vars())
            .filter(|c| !targets.contains(c))
            .filter_map(|c| data.get(row, c).map(|v| (c, v)))
            .collect();
        let query = DensityQuery {
            observed,
            targets: targets.clone(),
        };
        for (t, p) in impute(&model, &query, Space::Raw)?.into_iter().enumerate() {
            low_evidence += usize::from(p.low_evidence);
            if let Some(truth) = data.get(row, targets[t]) {
                abs_err[t] += (p.value - truth).abs();
                truth_rows[t] += 1;
            }
            values.push(p.value);
        }
    }
    let names = targets.iter().map(|&t| data.names()[t].clone()).collect();
    let predictions = Dataset::new(targets.len(), values)?.with_names(names)?;
    sink(&args.output, out, |w| Ok(write_csv(&predictions, w)?))?;

    // Keep standard output a clean CSV when predictions go there.
    let mut summary = Vec::new();
    for (t, &idx) in targets.iter().enumerate() {
        if truth_rows[t] > 0 {
            writeln!(
                summary,
                "MAE {}: {:.6} over {} rows",
                data.names()[idx],
                abs_err[t] / truth_rows[t] as f64,
                truth_rows[t]
            )?;
        }
    }
    if low_evidence > 0 {
        writeln!(summary, "warning: {low_evidence} predictions had conditioning evidence below the floor")?;
    }
    if args.output.is_some() {
        out.write_all(&summary)?;
    } else {
        std::io::stderr().write_all(&summary)?;
    }
    Ok(())
}
