//! ROC curve, area under it, and the Youden-optimal operating point.

use serde::{Deserialize, Serialize};

use crate::error::{ClassLabel, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Rows with `score >= threshold` are predicted positive.
    pub threshold: f64,
    pub tp: u64,
    pub fp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub positives: u64,
    pub negatives: u64,
    pub points: Vec<RocPoint>,
}

fn validate(y_true: &[u8], scores: &[f64]) -> Result<(u64, u64)> {
    if y_true.len() != scores.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels but {} scores",
            y_true.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("non-finite score".into()));
    }
    let mut p = 0;
    for &y in y_true {
        match y {
            0 => {}
            1 => p += 1,
            other => return Err(Error::InvalidInput(format!("non-binary label {other}"))),
        }
    }
    let n = y_true.len() as u64 - p;
    if p == 0 {
        return Err(Error::MissingClass(ClassLabel::Positive));
    }
    if n == 0 {
        return Err(Error::MissingClass(ClassLabel::Negative));
    }
    Ok((p, n))
}

/// One point per distinct score (descending), preceded by a sentinel above
/// the maximum score that yields `(0, 0)`.
pub fn roc_curve(y_true: &[u8], scores: &[f64]) -> Result<RocCurve> {
    let (p, n) = validate(y_true, scores)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let max = scores[order[0]];
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: max + 1.0,
        tp: 0,
        fp: 0,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut k = 0;
    while k < order.len() {
        let t = scores[order[k]];
        while k < order.len() && scores[order[k]] == t {
            if y_true[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / n as f64,
            tpr: tp as f64 / p as f64,
            threshold: t,
            tp,
            fp,
        });
    }
    Ok(RocCurve {
        positives: p,
        negatives: n,
        points,
    })
}

impl RocCurve {
    /// Trapezoidal area, accumulated on integer counts so that it equals the
    /// Mann-Whitney probability with half credit for ties.
    pub fn auc(&self) -> f64 {
        let mut twice_area: u128 = 0;
        for pair in self.points.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            twice_area += u128::from(b.fp - a.fp) * u128::from(a.tp + b.tp);
        }
        twice_area as f64 / (2.0 * self.positives as f64 * self.negatives as f64)
    }

    /// Point maximising `tpr - fpr`; ties go to the lower false-positive
    /// rate, then the lower threshold.
    pub fn optimal_point(&self) -> RocPoint {
        let (p, n) = (i128::from(self.positives), i128::from(self.negatives));
        let j = |pt: &RocPoint| i128::from(pt.tp) * n - i128::from(pt.fp) * p;
        let mut best = self.points[0];
        for pt in &self.points[1..] {
            let (jp, jb) = (j(pt), j(&best));
            if jp > jb || (jp == jb && (pt.fp < best.fp || (pt.fp == best.fp && pt.threshold < best.threshold))) {
                best = *pt;
            }
        }
        best
    }
}

pub fn auc(y_true: &[u8], scores: &[f64]) -> Result<f64> {
    Ok(roc_curve(y_true, scores)?.auc())
}

pub fn optimal_roc_point(y_true: &[u8], scores: &[f64]) -> Result<RocPoint> {
    Ok(roc_curve(y_true, scores)?.optimal_point())
}
