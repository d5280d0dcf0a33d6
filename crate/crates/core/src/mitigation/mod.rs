//! Bias mitigation: exponentiated-gradient reweighting and per-group thresholds.

pub mod compare;
pub mod constraint;
pub mod eg;
pub mod threshold;

pub use compare::{compare_mitigation, MitigationComparison, MitigationMethod, RangeComparison};
pub use constraint::{ConstraintMetric, FairnessConstraint, DEFAULT_EPSILON};
pub use eg::{
    fit_exponentiated_gradient, predict_eg, predict_eg_randomized, replay_exponentiated_gradient,
    verify_multiplier_trace, EGEnsemble, EgParams, EgTrainingSummary, MixtureRule, MultiplierStep,
};
pub use threshold::{
    fit_threshold_optimizer, predict_thresholded, GroupCalibration, ThresholdObjective, ThresholdPolicy,
    ThresholdedPredictions,
};
