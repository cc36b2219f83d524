//! Varying-coefficient regression with simultaneous selection of zero and
//! constant coefficient functions.
//!
//! Each coefficient function is expanded in a B-spline basis and the
//! coefficient groups are penalized by a weighted group norm plus a weighted
//! norm of their deviation from the group mean. The first penalty removes
//! covariates, the second collapses coefficient functions to constants.

mod bcd;
pub mod error;
pub mod io;
pub mod penalty;
pub mod simulation;
pub mod solver;
pub mod spline;
pub mod tuning;

pub use error::{Error, Result};
pub use io::{read_dataset, run_fit, Dataset, FitExport, FitOptions, ReadOptions};
pub use penalty::{centered_norm, kkt_residual, objective, CoefState, GroupClass, PenaltyWeights};
pub use simulation::{gen_dataset, run_monte_carlo, Method, SimConfig, SimReport};
pub use solver::{
    compute_adaptive_weights, fit_constrained_ls, fit_double_penalty, fit_group_lasso, lqa_step, FitResult,
    Problem, SolverConfig,
};
pub use spline::{build_design, eval_basis, make_knots, BasisSpec, GroupedDesign};
pub use tuning::{
    compute_bic, cn_value, gcv_select_k, select_lambda0, select_lambda_pair, CriterionMode, GridOptions,
    TuningReport,
};

/// Name and version recorded in exports and reports.
pub const SOFTWARE: &str = concat!("vcselect ", env!("CARGO_PKG_VERSION"));
