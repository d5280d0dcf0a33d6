use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Logreg,
    Tree,
    Forest,
    Gboost,
}

impl LearnerKind {
    pub fn label(self) -> &'static str {
        match self {
            LearnerKind::Logreg => "logreg",
            LearnerKind::Tree => "tree",
            LearnerKind::Forest => "forest",
            LearnerKind::Gboost => "gboost",
        }
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logreg" | "lr" => Ok(LearnerKind::Logreg),
            "tree" | "dt" => Ok(LearnerKind::Tree),
            "forest" | "rf" => Ok(LearnerKind::Forest),
            "gboost" | "gb" => Ok(LearnerKind::Gboost),
            other => Err(Error::Config(format!("unknown learner {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    Gini,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    /// `floor(sqrt(n_features))` candidates per split.
    Sqrt,
    All,
}

impl FeatureSubsample {
    pub fn count(self, n_features: usize) -> usize {
        match self {
            FeatureSubsample::Sqrt => ((n_features as f64).sqrt().floor() as usize).clamp(1, n_features.max(1)),
            FeatureSubsample::All => n_features.max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub n_estimators: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub split_criterion: SplitCriterion,
    pub feature_subsample: FeatureSubsample,
    pub learning_rate: f64,
    /// Inverse regularisation strength `C` of logistic regression.
    pub l2_penalty: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig::forest()
    }
}

impl LearnerConfig {
    fn base(kind: LearnerKind) -> Self {
        LearnerConfig {
            kind,
            n_estimators: 100,
            max_depth: None,
            min_samples_split: 2,
            split_criterion: SplitCriterion::Gini,
            feature_subsample: FeatureSubsample::All,
            learning_rate: 0.1,
            l2_penalty: 1.0,
            max_iterations: 1000,
            tolerance: 1e-6,
            seed: 0,
        }
    }

    /// L2-penalised logistic regression, `C = 1`, at most 1000 iterations.
    pub fn logreg() -> Self {
        LearnerConfig::base(LearnerKind::Logreg)
    }

    /// A single unpruned CART tree over all features.
    pub fn tree() -> Self {
        LearnerConfig::base(LearnerKind::Tree)
    }

    /// 100 unlimited-depth Gini trees, `sqrt` features per split.
    pub fn forest() -> Self {
        LearnerConfig {
            feature_subsample: FeatureSubsample::Sqrt,
            ..LearnerConfig::base(LearnerKind::Forest)
        }
    }

    /// 100 boosted stumps at learning rate 0.1.
    pub fn gboost() -> Self {
        LearnerConfig {
            max_depth: Some(1),
            ..LearnerConfig::base(LearnerKind::Gboost)
        }
    }

    pub fn for_kind(kind: LearnerKind) -> Self {
        match kind {
            LearnerKind::Logreg => LearnerConfig::logreg(),
            LearnerKind::Tree => LearnerConfig::tree(),
            LearnerKind::Forest => LearnerConfig::forest(),
            LearnerKind::Gboost => LearnerConfig::gboost(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators < 1 {
            return Err(Error::Config("n_estimators must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.l2_penalty > 0.0 && self.l2_penalty.is_finite()) {
            return Err(Error::Config("l2_penalty (C) must be positive".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Config("min_samples_split must be at least 2".into()));
        }
        if self.kind == LearnerKind::Gboost && self.max_depth != Some(1) {
            return Err(Error::Config(
                "gradient boosting is implemented for stumps only (max_depth = 1)".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let rf = LearnerConfig::forest();
        assert_eq!((rf.n_estimators, rf.max_depth), (100, None));
        assert_eq!(rf.feature_subsample, FeatureSubsample::Sqrt);
        assert_eq!(rf.split_criterion, SplitCriterion::Gini);
        let gb = LearnerConfig::gboost();
        assert_eq!((gb.learning_rate, gb.max_depth, gb.n_estimators), (0.1, Some(1), 100));
        let lr = LearnerConfig::logreg();
        assert_eq!((lr.l2_penalty, lr.max_iterations), (1.0, 1000));
        for c in [rf, gb, lr, LearnerConfig::tree()] {
            c.validate().unwrap();
        }
        assert_eq!(FeatureSubsample::Sqrt.count(74), 8);
        assert_eq!(FeatureSubsample::Sqrt.count(3), 1);
    }

    #[test]
    fn invalid_configs() {
        let mut c = LearnerConfig::forest();
        c.n_estimators = 0;
        assert!(c.validate().is_err());
        let mut c = LearnerConfig::gboost();
        c.max_depth = Some(3);
        assert!(c.validate().is_err());
        let mut c = LearnerConfig::gboost();
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
    }
}
