//! Nonparametric density estimation for bounded random vectors through
//! low-rank models of their characteristic function.
//!
//! Data are mapped into the unit hypercube, where a density is represented by
//! its truncated multivariate Fourier series. The series coefficients are
//! samples of the characteristic function on the integer grid `[-K, K]^N`;
//! they are modeled by a rank-`F` canonical polyadic decomposition
//!
//! ```text
//! Φ[k₁, …, k_N] ≈ Σ_h λ(h) Π_n A_n(k_n, h)
//! ```
//!
//! which is the same thing as a mixture of `F` separable densities. Factors are
//! fitted jointly to empirical characteristic tensors of variable triples, so
//! neither the full tensor nor complete observations are ever needed. The
//! fitted model evaluates, marginalizes, conditions and samples in closed form.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crossval;
pub mod data;
pub mod density;
pub mod ecf;
pub mod error;
pub mod factorization;
pub mod io;
pub mod model;
pub mod sampler;
pub mod tensor;

pub use crossval::{cross_validate, CvOutcome, CvPlan};
pub use data::{normalize, read_csv, read_csv_path, write_csv, Dataset, ScalingRecord};
pub use ecf::{ecf_point, estimate_group, estimate_triple, select_triples, suggest_harmonics, TripleCf};
pub use density::{
    conditional_mean, evaluate, impute, log_likelihood, pdf_eval, DensityQuery, LikelihoodReport, Prediction, Space,
};
pub use error::{Error, Result};
pub use factorization::{
    check_generic_identifiability, fit, project_simplex, CoupledProblem, FitOptions, FitReport,
    Identifiability, Support,
};
pub use io::{load_model, read_model, save_model, write_model};
pub use model::CpdModel;
pub use sampler::{sample, GridCdf, Sampler};
pub use tensor::{khatri_rao, mode1_unfold, ComplexMatrix, FrequencyGrid, Tensor3};
