//! Instance-weighted binary classifiers.

pub mod config;
pub mod forest;
pub mod gboost;
pub mod logreg;
pub mod model;
pub mod tree;

pub use config::{FeatureSubsample, LearnerConfig, LearnerKind, SplitCriterion};
pub use model::{fit, predict, predict_proba, threshold_scores, ModelParams, TrainedModel};
