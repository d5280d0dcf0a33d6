//! Per-group metric tables and performance ranges.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::confusion::{confusion, rates, ConfusionCounts, MetricBundle};
use super::roc::auc;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: String,
    pub n: u64,
    pub counts: Option<ConfusionCounts>,
    /// `None` when the group lacks one of the classes.
    pub metrics: Option<MetricBundle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded_reason: Option<String>,
}

/// Max minus min of each metric over the groups with defined metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRanges {
    pub fnr: f64,
    pub fpr: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub balanced_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeMetric {
    Fnr,
    Fpr,
    BalancedAccuracy,
}

impl RangeMetric {
    pub const ALL: [RangeMetric; 3] = [RangeMetric::Fnr, RangeMetric::Fpr, RangeMetric::BalancedAccuracy];

    pub fn label(self) -> &'static str {
        match self {
            RangeMetric::Fnr => "FNR",
            RangeMetric::Fpr => "FPR",
            RangeMetric::BalancedAccuracy => "Balanced accuracy",
        }
    }

    pub fn of(self, m: &MetricBundle) -> f64 {
        match self {
            RangeMetric::Fnr => m.fnr,
            RangeMetric::Fpr => m.fpr,
            RangeMetric::BalancedAccuracy => m.balanced_accuracy,
        }
    }
}

impl MetricRanges {
    pub fn get(&self, metric: RangeMetric) -> f64 {
        match metric {
            RangeMetric::Fnr => self.fnr,
            RangeMetric::Fpr => self.fpr,
            RangeMetric::BalancedAccuracy => self.balanced_accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetricTable {
    pub rows: Vec<GroupRow>,
    pub ranges: MetricRanges,
}

/// `max - min`, or `None` for an empty slice.
pub fn range_of(values: &[f64]) -> Option<f64> {
    let max = values.iter().copied().reduce(f64::max)?;
    let min = values.iter().copied().reduce(f64::min)?;
    Some(max - min)
}

impl GroupMetricTable {
    /// Builds a table from already-computed per-group bundles.
    pub fn from_metrics<S: AsRef<str>>(groups: &[(S, MetricBundle)]) -> Result<Self> {
        let rows = groups
            .iter()
            .map(|(g, m)| GroupRow {
                group: g.as_ref().to_string(),
                n: 0,
                counts: None,
                metrics: Some(*m),
                excluded_reason: None,
            })
            .collect();
        Self::from_rows(rows)
    }

    fn from_rows(rows: Vec<GroupRow>) -> Result<Self> {
        let defined: Vec<&MetricBundle> = rows.iter().filter_map(|r| r.metrics.as_ref()).collect();
        if defined.is_empty() {
            return Err(Error::InsufficientData(
                "no group has both classes; ranges are undefined".into(),
            ));
        }
        let range =
            |f: fn(&MetricBundle) -> f64| range_of(&defined.iter().map(|m| f(m)).collect::<Vec<_>>()).unwrap_or(0.0);
        let aucs: Option<Vec<f64>> = defined.iter().map(|m| m.auc).collect();
        let ranges = MetricRanges {
            fnr: range(|m| m.fnr),
            fpr: range(|m| m.fpr),
            tpr: range(|m| m.tpr),
            tnr: range(|m| m.tnr),
            balanced_accuracy: range(|m| m.balanced_accuracy),
            auc: aucs.and_then(|v| range_of(&v)),
        };
        Ok(GroupMetricTable { rows, ranges })
    }

    pub fn row(&self, group: &str) -> Option<&GroupRow> {
        self.rows.iter().find(|r| r.group == group)
    }

    pub fn metric(&self, group: &str) -> Option<&MetricBundle> {
        self.row(group).and_then(|r| r.metrics.as_ref())
    }

    pub fn excluded(&self) -> Vec<&str> {
        self.rows
            .iter()
            .filter(|r| r.metrics.is_none())
            .map(|r| r.group.as_str())
            .collect()
    }
}

/// Per-group rates of hard predictions (and AUC when scores are given).
/// Groups are listed in lexical order. A group lacking either class is kept
/// in the table with undefined metrics and left out of every range.
pub fn group_metric_table<S: AsRef<str>>(
    y_true: &[u8],
    y_pred: &[u8],
    scores: Option<&[f64]>,
    groups: &[S],
) -> Result<GroupMetricTable> {
    if groups.len() != y_true.len() || scores.is_some_and(|s| s.len() != y_true.len()) {
        return Err(Error::InvalidInput("group labels are not aligned with rows".into()));
    }
    confusion(y_true, y_pred)?;
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        members.entry(g.as_ref()).or_default().push(i);
    }
    let mut rows = Vec::with_capacity(members.len());
    for (group, idx) in members {
        let yt: Vec<u8> = idx.iter().map(|&i| y_true[i]).collect();
        let yp: Vec<u8> = idx.iter().map(|&i| y_pred[i]).collect();
        let counts = confusion(&yt, &yp)?;
        let (metrics, excluded_reason) = match rates(&counts) {
            Ok(mut m) => {
                if let Some(s) = scores {
                    let gs: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
                    m.auc = Some(auc(&yt, &gs)?);
                }
                (Some(m), None)
            }
            Err(e) => {
                log::warn!("group {group} excluded from ranges: {e}");
                (None, Some(e.to_string()))
            }
        };
        rows.push(GroupRow {
            group: group.to_string(),
            n: idx.len() as u64,
            counts: Some(counts),
            metrics,
            excluded_reason,
        });
    }
    GroupMetricTable::from_rows(rows)
}
