//! Confusion counts and the rates derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{ClassLabel, Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub fp: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fn_: u64, tn: u64, fp: u64) -> Self {
        ConfusionCounts { tp, fn_, tn, fp }
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    pub fn total(&self) -> u64 {
        self.positives() + self.negatives()
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, o: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts::new(self.tp + o.tp, self.fn_ + o.fn_, self.tn + o.tn, self.fp + o.fp)
    }
}

fn check_binary(name: &str, v: &[u8]) -> Result<()> {
    match v.iter().find(|&&x| x > 1) {
        Some(bad) => Err(Error::InvalidInput(format!("{name} contains non-binary value {bad}"))),
        None => Ok(()),
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionCounts> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    check_binary("y_true", y_true)?;
    check_binary("y_pred", y_pred)?;
    let mut c = ConfusionCounts::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => c.tp += 1,
            (1, _) => c.fn_ += 1,
            (_, 0) => c.tn += 1,
            _ => c.fp += 1,
        }
    }
    Ok(c)
}

/// Error and accuracy rates of one evaluation slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub tpr: f64,
    pub tnr: f64,
    pub fnr: f64,
    pub fpr: f64,
    pub balanced_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
}

impl MetricBundle {
    /// Bundle built from a published `(fnr, fpr)` pair.
    pub fn from_error_rates(fnr: f64, fpr: f64) -> Self {
        let tpr = 1.0 - fnr;
        let tnr = 1.0 - fpr;
        MetricBundle {
            tpr,
            tnr,
            fnr,
            fpr,
            balanced_accuracy: (tpr + tnr) / 2.0,
            auc: None,
        }
    }

    pub fn with_auc(mut self, auc: f64) -> Self {
        self.auc = Some(auc);
        self
    }
}

pub fn rates(counts: &ConfusionCounts) -> Result<MetricBundle> {
    let p = counts.positives();
    let n = counts.negatives();
    if p == 0 {
        return Err(Error::MissingClass(ClassLabel::Positive));
    }
    if n == 0 {
        return Err(Error::MissingClass(ClassLabel::Negative));
    }
    let tpr = counts.tp as f64 / p as f64;
    let tnr = counts.tn as f64 / n as f64;
    Ok(MetricBundle {
        tpr,
        tnr,
        fnr: 1.0 - tpr,
        fpr: 1.0 - tnr,
        balanced_accuracy: (tpr + tnr) / 2.0,
        auc: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_each_cell() {
        let c = confusion(&[1, 1, 0, 0], &[1, 0, 0, 1]).unwrap();
        assert_eq!(c, ConfusionCounts::new(1, 1, 1, 1));
        let c = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((c.fn_, c.fp), (0, 0));
        assert!(confusion(&[1, 0], &[1]).is_err());
        assert!(confusion(&[2], &[1]).is_err());
    }

    #[test]
    fn scaled_published_rates() {
        let m = rates(&ConfusionCounts::new(776, 224, 604, 396)).unwrap();
        assert!((m.fnr - 0.224).abs() < 1e-12);
        assert!((m.fpr - 0.396).abs() < 1e-12);
        assert!((m.balanced_accuracy - 0.690).abs() < 1e-12);

        let m = rates(&ConfusionCounts::new(0, 5, 5, 0)).unwrap();
        assert_eq!((m.fnr, m.fpr, m.balanced_accuracy), (1.0, 0.0, 0.5));
    }

    #[test]
    fn missing_class_is_named() {
        assert!(matches!(
            rates(&ConfusionCounts::new(0, 0, 3, 1)),
            Err(Error::MissingClass(ClassLabel::Positive))
        ));
        assert!(matches!(
            rates(&ConfusionCounts::new(2, 1, 0, 0)),
            Err(Error::MissingClass(ClassLabel::Negative))
        ));
    }

    #[test]
    fn serializes_fn_field_name() {
        let text = serde_json::to_string(&ConfusionCounts::new(1, 2, 3, 4)).unwrap();
        assert_eq!(text, r#"{"tp":1,"fn":2,"tn":3,"fp":4}"#);
    }
}
