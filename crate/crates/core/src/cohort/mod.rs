//! Synthetic cohorts matched to published marginals.

pub mod config;
pub mod generate;
pub mod validate;

pub use config::{GroupBias, LosModel, SyntheticCohortConfig};
pub use generate::{generate_cohort, sample_long_stay_body};
pub use validate::{validate_cohort, CohortValidation};
