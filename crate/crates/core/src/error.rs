use thiserror::Error;

/// Errors raised by the estimation, fitting and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("frequency {k} outside [-{max}, {max}]")]
    FrequencyOutOfRange { k: i64, max: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("column {column} is constant over its observed cells; cannot normalize")]
    DegenerateColumn { column: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("variables {vars:?} are jointly observed in {count} rows, need at least {required}")]
    InsufficientOverlap {
        vars: Vec<usize>,
        count: usize,
        required: usize,
    },

    #[error("{0} variables is not supported here (need at least 3)")]
    UnsupportedDimension(usize),

    #[error("triple budget {budget} cannot cover {n} variables at least {min_cover} times each")]
    Coverage {
        budget: usize,
        n: usize,
        min_cover: usize,
    },

    #[error("normal equations for variable {variable} are ill-conditioned; try a smaller rank")]
    IllConditioned { variable: usize },

    #[error("simplex-constrained weight update diverged; try a larger penalty")]
    Divergence,

    #[error("component {component} of variable {variable} has no positive mass on the grid")]
    DegenerateComponent { variable: usize, component: usize },

    #[error("malformed model file (line {line}): {msg}")]
    ModelFormat { line: usize, msg: String },

    #[error("every cross-validation cell failed: {}", .0.join("; "))]
    CrossValidation(Vec<String>),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Numerical failures (as opposed to bad input) get their own class so
    /// front ends can map them to distinct exit statuses.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IllConditioned { .. } | Error::Divergence | Error::DegenerateComponent { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
