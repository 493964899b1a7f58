//! Statistics for the relationship between lifetime stem-cell divisions and
//! lifetime cancer risk across tissues.
//!
//! - [`data`]: cohort and radiation datasets, CSV ingestion, subgroup collapsing
//! - [`stats`]: Pearson/Spearman correlation, Fisher CIs, permutation p-values,
//!   ordinary and weighted least squares
//! - [`scores`]: extra-risk scores (ERS, RBERS), unit rescaling, two-cluster
//!   D/R assignment
//! - [`multistage`]: closed-form multistage incidence, radiation excess risk,
//!   lifetime-risk prediction and a Monte Carlo lineage simulator
//! - [`pipelines`]: end-to-end reports combining the above

pub mod data;
pub mod error;
pub mod fmt;
pub mod multistage;
pub mod pipelines;
mod rng;
pub mod scores;
pub mod stats;

pub use data::{
    collapse_subgroups, log_pairs, parse_cohort, parse_radiation, CohortDataset, GroupingSpec,
    LogPairs, MergeSpec, RadiationRecord, TissueRecord,
};
pub use error::{Error, Result};
pub use rng::GENERATOR_NAME;
pub use stats::{CorrelationResult, Method, PMethod, RegressionFit};
