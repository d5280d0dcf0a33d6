pub mod cohort;
pub mod error;
pub mod learners;
pub mod matrix;
pub mod metrics;
pub mod mitigation;
pub mod pipeline;
pub mod rng;
pub mod stats;
pub mod tabular;

pub use error::{ClassLabel, Error, Result};
pub use matrix::{FeatureMatrix, SchemaFingerprint};

// Every guide chapter is compiled and run by `cargo test --doc`.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/cohorts.md")]
    mod cohorts {}
    #[doc = include_str!("../../../book/src/preparation.md")]
    mod preparation {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/learners.md")]
    mod learners {}
    #[doc = include_str!("../../../book/src/auditing.md")]
    mod auditing {}
    #[doc = include_str!("../../../book/src/mitigation.md")]
    mod mitigation {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
