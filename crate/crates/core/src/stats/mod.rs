//! Descriptive statistics and hypothesis tests.

pub mod hypothesis;
pub mod quartiles;

pub use hypothesis::{
    average_ranks, binomial_test, chi_square_gof, kolmogorov_sf, ks_normality, spearman, KsOutcome, TestOutcome,
};
pub use quartiles::{los_threshold_psi, psi_excluding_outliers, quantile_sorted, quartile_summary, QuartileSummary};
