//! Random variates, ensemble accumulators and the Monte Carlo error
//! statistics used to benchmark the schemes.

mod dist;
mod estimators;
mod rng;

pub use dist::{normal_quantile, regularized_incomplete_beta, student_t_cdf, student_t_quantile};
pub use estimators::{
    arctan_functional_error, error_count, error_table, estimate_moments, fit_gamma, functional_error,
    node_errors, slope_fit, EnsembleMoments, ErrorTable, GammaFit, McEstimate, MomentAccumulator,
    NodeEstimate,
};
pub use rng::RngStream;

/// Significance level of the two-sided batch-means confidence interval (90%).
pub const CONFIDENCE_ALPHA: f64 = 0.10;
