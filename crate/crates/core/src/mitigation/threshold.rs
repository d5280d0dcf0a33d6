//! Per-group decision thresholds on a frozen scorer.
//!
//! For each target FNR `tau` on a grid, every group gets the largest
//! threshold whose calibration FNR does not exceed `tau`. The target with the
//! best mean per-group balanced accuracy wins (lowest target on ties).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdObjective {
    /// Number of evenly spaced FNR targets in `[0, 1]`.
    pub grid_points: usize,
}

impl Default for ThresholdObjective {
    fn default() -> Self {
        ThresholdObjective { grid_points: 101 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCalibration {
    pub threshold: f64,
    pub n: u64,
    pub positives: u64,
    pub negatives: u64,
    pub fnr: f64,
    pub fpr: f64,
    pub balanced_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub thresholds: BTreeMap<String, f64>,
    /// Used for groups unseen or excluded at fit time.
    pub fallback: f64,
    pub target_fnr: f64,
    pub mean_balanced_accuracy: f64,
    pub calibration: BTreeMap<String, GroupCalibration>,
    pub excluded: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdedPredictions {
    pub labels: Vec<u8>,
    /// Rows whose group had no fitted threshold.
    pub fallback_rows: usize,
}

/// Sorted calibration scores of one group, split by class.
struct ClassScores {
    pos: Vec<f64>,
    neg: Vec<f64>,
}

impl ClassScores {
    fn new(scores: impl Iterator<Item = (f64, u8)>) -> Self {
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for (s, y) in scores {
            if y == 1 {
                pos.push(s);
            } else {
                neg.push(s);
            }
        }
        pos.sort_by(f64::total_cmp);
        neg.sort_by(f64::total_cmp);
        ClassScores { pos, neg }
    }

    /// Largest threshold in `[0, 1]` with FNR at most `tau`.
    fn threshold_for(&self, tau: f64) -> f64 {
        let p = self.pos.len();
        let mut k = ((tau * p as f64).floor() as usize).min(p);
        while k > 0 && k as f64 / p as f64 > tau {
            k -= 1;
        }
        while k < p && (k + 1) as f64 / p as f64 <= tau {
            k += 1;
        }
        if k == p {
            1.0
        } else {
            self.pos[k]
        }
    }

    fn evaluate(&self, threshold: f64) -> GroupCalibration {
        let fn_ = self.pos.partition_point(|&s| s < threshold);
        let tn = self.neg.partition_point(|&s| s < threshold);
        let fnr = fn_ as f64 / self.pos.len() as f64;
        let fpr = (self.neg.len() - tn) as f64 / self.neg.len() as f64;
        GroupCalibration {
            threshold,
            n: (self.pos.len() + self.neg.len()) as u64,
            positives: self.pos.len() as u64,
            negatives: self.neg.len() as u64,
            fnr,
            fpr,
            balanced_accuracy: ((1.0 - fnr) + (1.0 - fpr)) / 2.0,
        }
    }
}

/// Fits one threshold per group on calibration scores from an already
/// trained model. Groups lacking a class are excluded and use the fallback,
/// which is the pooled threshold for the chosen target.
pub fn fit_threshold_optimizer<S: AsRef<str>>(
    scores: &[f64],
    y: &[u8],
    groups: &[S],
    objective: &ThresholdObjective,
) -> Result<ThresholdPolicy> {
    if scores.len() != y.len() || groups.len() != y.len() {
        return Err(Error::InvalidInput("scores, labels and groups are not aligned".into()));
    }
    if objective.grid_points < 2 {
        return Err(Error::Config("threshold grid needs at least two points".into()));
    }
    if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::InvalidInput("calibration scores must lie in [0, 1]".into()));
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        members.entry(g.as_ref()).or_default().push(i);
    }
    let mut fitted = Vec::new();
    let mut excluded = Vec::new();
    for (name, idx) in &members {
        let cs = ClassScores::new(idx.iter().map(|&i| (scores[i], y[i])));
        if cs.pos.is_empty() || cs.neg.is_empty() {
            log::warn!("group {name} lacks a class in calibration data; it will use the fallback threshold");
            excluded.push(name.to_string());
        } else {
            fitted.push((name.to_string(), cs));
        }
    }
    let pooled = ClassScores::new(scores.iter().copied().zip(y.iter().copied()));
    if pooled.pos.is_empty() || pooled.neg.is_empty() {
        return Err(Error::InsufficientData("calibration data needs both classes".into()));
    }

    let last = (objective.grid_points - 1) as f64;
    let mut best: Option<(f64, f64)> = None;
    for j in 0..objective.grid_points {
        let tau = j as f64 / last;
        let mean_ba = if fitted.is_empty() {
            pooled.evaluate(pooled.threshold_for(tau)).balanced_accuracy
        } else {
            fitted
                .iter()
                .map(|(_, cs)| cs.evaluate(cs.threshold_for(tau)).balanced_accuracy)
                .sum::<f64>()
                / fitted.len() as f64
        };
        if best.is_none_or(|(_, b)| mean_ba > b) {
            best = Some((tau, mean_ba));
        }
    }
    let (tau, mean_balanced_accuracy) = best.expect("grid is non-empty");
    let mut thresholds = BTreeMap::new();
    let mut calibration = BTreeMap::new();
    for (name, cs) in &fitted {
        let cal = cs.evaluate(cs.threshold_for(tau));
        thresholds.insert(name.clone(), cal.threshold);
        calibration.insert(name.clone(), cal);
    }
    Ok(ThresholdPolicy {
        thresholds,
        fallback: pooled.threshold_for(tau),
        target_fnr: tau,
        mean_balanced_accuracy,
        calibration,
        excluded,
    })
}

impl ThresholdPolicy {
    /// A policy applying one threshold to every group.
    pub fn uniform(threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidInput(format!("threshold {threshold} outside [0, 1]")));
        }
        Ok(ThresholdPolicy {
            thresholds: BTreeMap::new(),
            fallback: threshold,
            target_fnr: f64::NAN,
            mean_balanced_accuracy: f64::NAN,
            calibration: BTreeMap::new(),
            excluded: Vec::new(),
        })
    }

    pub fn threshold(&self, group: &str) -> f64 {
        self.thresholds.get(group).copied().unwrap_or(self.fallback)
    }
}

/// Labels a row 1 iff its score reaches its group's threshold.
pub fn predict_thresholded<S: AsRef<str>>(
    policy: &ThresholdPolicy,
    scores: &[f64],
    groups: &[S],
) -> Result<ThresholdedPredictions> {
    if scores.len() != groups.len() {
        return Err(Error::InvalidInput("scores and groups are not aligned".into()));
    }
    let mut fallback_rows = 0;
    let labels = scores
        .iter()
        .zip(groups)
        .map(|(&s, g)| {
            let t = match policy.thresholds.get(g.as_ref()) {
                Some(&t) => t,
                None => {
                    fallback_rows += 1;
                    policy.fallback
                }
            };
            u8::from(s >= t)
        })
        .collect();
    if fallback_rows > 0 {
        log::info!("{fallback_rows} rows scored with the fallback threshold");
    }
    Ok(ThresholdedPredictions { labels, fallback_rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_group_thresholds_apply() {
        let mut p = ThresholdPolicy::uniform(0.5).unwrap();
        p.thresholds.insert("A".into(), 0.3);
        p.thresholds.insert("B".into(), 0.7);
        let out = predict_thresholded(&p, &[0.5, 0.5, 0.5], &["A", "B", "C"]).unwrap();
        assert_eq!(out.labels, vec![1, 0, 1]);
        assert_eq!(out.fallback_rows, 1);
    }

    #[test]
    fn threshold_for_respects_target() {
        let cs = ClassScores::new([(0.1, 1), (0.2, 1), (0.3, 1), (0.4, 1), (0.5, 0)].into_iter());
        assert_eq!(cs.threshold_for(0.0), 0.1);
        assert_eq!(cs.threshold_for(0.25), 0.2);
        assert_eq!(cs.threshold_for(0.74), 0.3);
        assert_eq!(cs.threshold_for(0.75), 0.4);
        assert_eq!(cs.threshold_for(1.0), 1.0);
        assert_eq!(cs.evaluate(0.3).fnr, 0.5);
    }

    #[test]
    fn single_class_group_falls_back() {
        let s = [0.2, 0.8, 0.4, 0.6, 0.9];
        let y = [0, 1, 0, 1, 1];
        let g = ["a", "a", "a", "a", "b"];
        let p = fit_threshold_optimizer(&s, &y, &g, &ThresholdObjective::default()).unwrap();
        assert_eq!(p.excluded, vec!["b".to_string()]);
        assert!(!p.thresholds.contains_key("b"));
        assert_eq!(p.thresholds["a"], 0.6);
        assert_eq!(p.calibration["a"].balanced_accuracy, 1.0);
    }
}
