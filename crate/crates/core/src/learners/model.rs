//! Fitting, scoring and serialisation of the base learners.

use serde::{Deserialize, Serialize};

use super::config::{LearnerConfig, LearnerKind};
use super::forest::{fit_forest, forest_score};
use super::gboost::{fit_gboost, BoostedStumps};
use super::logreg::{fit_logreg, LogisticModel};
use super::tree::{grow_tree, DecisionTree, TreeParams};
use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, SchemaFingerprint};
use crate::rng::stream_rng;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Logreg(LogisticModel),
    Tree(DecisionTree),
    Forest { trees: Vec<DecisionTree> },
    Gboost(BoostedStumps),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub config: LearnerConfig,
    pub fingerprint: SchemaFingerprint,
    pub n_features: usize,
    pub params: ModelParams,
}

fn check_training_inputs(x: &FeatureMatrix, y: &[u8], w: &[f64]) -> Result<()> {
    if y.len() != x.n_rows() || w.len() != x.n_rows() {
        return Err(Error::InvalidInput(format!(
            "{} rows, {} labels, {} weights",
            x.n_rows(),
            y.len(),
            w.len()
        )));
    }
    if let Some(bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidInput(format!("label {bad} is not binary")));
    }
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidInput(
            "sample weights must be finite and non-negative".into(),
        ));
    }
    x.check_finite()?;
    let (mut w0, mut w1) = (0.0, 0.0);
    for (&yi, &wi) in y.iter().zip(w) {
        if yi == 1 {
            w1 += wi;
        } else {
            w0 += wi;
        }
    }
    if w0 + w1 <= 0.0 {
        return Err(Error::InvalidInput("sample weights are all zero".into()));
    }
    if w0 <= 0.0 || w1 <= 0.0 {
        return Err(Error::Degenerate(
            "training labels (with positive weight) contain a single class".into(),
        ));
    }
    Ok(())
}

/// Fits the learner described by `config`. Omitted weights mean weight 1
/// on every row.
pub fn fit(
    config: &LearnerConfig,
    x: &FeatureMatrix,
    y: &[u8],
    sample_weights: Option<&[f64]>,
) -> Result<TrainedModel> {
    config.validate()?;
    let ones;
    let w = match sample_weights {
        Some(w) => w,
        None => {
            ones = vec![1.0; x.n_rows()];
            &ones
        }
    };
    check_training_inputs(x, y, w)?;

    let tree_params = |max_features| TreeParams {
        max_depth: config.max_depth,
        min_samples_split: config.min_samples_split,
        max_features,
    };
    let n_features = x.n_cols();
    let params = match config.kind {
        LearnerKind::Logreg => ModelParams::Logreg(fit_logreg(
            x,
            y,
            w,
            config.l2_penalty,
            config.max_iterations,
            config.tolerance,
        )),
        LearnerKind::Tree => {
            let mut rng = stream_rng(config.seed, 0);
            let mf = config.feature_subsample.count(n_features);
            ModelParams::Tree(grow_tree(x, y, w, tree_params(mf), &mut rng))
        }
        LearnerKind::Forest => ModelParams::Forest {
            trees: fit_forest(
                x,
                y,
                w,
                config.n_estimators,
                tree_params(config.feature_subsample.count(n_features)),
                config.seed,
            ),
        },
        LearnerKind::Gboost => ModelParams::Gboost(fit_gboost(x, y, w, config.n_estimators, config.learning_rate)),
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        config: config.clone(),
        fingerprint: x.fingerprint().clone(),
        n_features,
        params,
    })
}

impl TrainedModel {
    pub fn check_schema(&self, x: &FeatureMatrix) -> Result<()> {
        if x.fingerprint() != &self.fingerprint || x.n_cols() != self.n_features {
            return Err(Error::SchemaMismatch {
                expected: format!("{} ({} columns)", self.fingerprint, self.n_features),
                found: format!("{} ({} columns)", x.fingerprint(), x.n_cols()),
            });
        }
        Ok(())
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        match &self.params {
            ModelParams::Logreg(m) => m.score(row),
            ModelParams::Tree(t) => t.score(row),
            ModelParams::Forest { trees } => forest_score(trees, row),
            ModelParams::Gboost(b) => b.score(row),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: TrainedModel = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        Ok(model)
    }
}

/// Positive-class scores in `[0, 1]`.
pub fn predict_proba(model: &TrainedModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    model.check_schema(x)?;
    x.check_finite()?;
    Ok(x.rows().map(|r| model.score_row(r)).collect())
}

/// Labels each score 1 iff it reaches `threshold`.
pub fn threshold_scores(scores: &[f64], threshold: f64) -> Result<Vec<u8>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidInput(format!(
            "decision threshold {threshold} outside [0, 1]"
        )));
    }
    Ok(scores.iter().map(|&s| u8::from(s >= threshold)).collect())
}

pub fn predict(model: &TrainedModel, x: &FeatureMatrix, threshold: f64) -> Result<Vec<u8>> {
    threshold_scores(&predict_proba(model, x)?, threshold)
}
