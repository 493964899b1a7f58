//! Correlation, permutation tests and least-squares fits on paired samples.

mod correlation;
mod permutation;
mod regression;

pub use correlation::{
    average_ranks, explained_variation, fisher_ci, pearson, pearson_coefficient, spearman,
    students_t_two_sided, CorrelationResult, FisherInterval, Method, PMethod, EXACT_SPEARMAN_MAX_N,
};
pub use permutation::{permutation_pvalue, PermutationMode, EXACT_PERMUTATION_MAX_N};
pub use regression::{ols, weighted_ols, RegressionFit};

use crate::error::{Error, Result};

pub(crate) fn check_paired(x: &[f64], y: &[f64], min_n: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < min_n {
        return Err(Error::TooFewObservations {
            needed: min_n,
            got: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite value in input".into()));
    }
    Ok(())
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
