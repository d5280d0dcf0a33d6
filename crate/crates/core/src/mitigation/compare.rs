use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{group_metric_table, GroupMetricTable, RangeMetric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MitigationMethod {
    Unmitigated,
    ExponentiatedGradient,
    ThresholdOptimizer,
}

impl MitigationMethod {
    pub const ALL: [MitigationMethod; 3] = [
        MitigationMethod::Unmitigated,
        MitigationMethod::ExponentiatedGradient,
        MitigationMethod::ThresholdOptimizer,
    ];

    pub fn label(self) -> &'static str {
        match self {
            MitigationMethod::Unmitigated => "Unmitigated",
            MitigationMethod::ExponentiatedGradient => "Exponentiated gradient",
            MitigationMethod::ThresholdOptimizer => "Threshold optimizer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeComparison {
    pub metric: RangeMetric,
    pub unmitigated: f64,
    pub exponentiated_gradient: f64,
    pub threshold_optimizer: f64,
    /// Change relative to the unmitigated range.
    pub delta_eg: f64,
    pub delta_threshold: f64,
    /// Every method attaining the smallest range.
    pub minimizing: Vec<MitigationMethod>,
}

impl RangeComparison {
    pub fn value(&self, method: MitigationMethod) -> f64 {
        match method {
            MitigationMethod::Unmitigated => self.unmitigated,
            MitigationMethod::ExponentiatedGradient => self.exponentiated_gradient,
            MitigationMethod::ThresholdOptimizer => self.threshold_optimizer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationComparison {
    pub unmitigated: GroupMetricTable,
    pub exponentiated_gradient: GroupMetricTable,
    pub threshold_optimizer: GroupMetricTable,
    pub ranges: Vec<RangeComparison>,
}

impl MitigationComparison {
    pub fn from_tables(
        unmitigated: GroupMetricTable,
        exponentiated_gradient: GroupMetricTable,
        threshold_optimizer: GroupMetricTable,
    ) -> Self {
        let ranges = RangeMetric::ALL
            .iter()
            .map(|&metric| {
                let u = unmitigated.ranges.get(metric);
                let e = exponentiated_gradient.ranges.get(metric);
                let t = threshold_optimizer.ranges.get(metric);
                let min = u.min(e).min(t);
                let minimizing = MitigationMethod::ALL
                    .into_iter()
                    .zip([u, e, t])
                    .filter(|&(_, v)| v == min)
                    .map(|(m, _)| m)
                    .collect();
                RangeComparison {
                    metric,
                    unmitigated: u,
                    exponentiated_gradient: e,
                    threshold_optimizer: t,
                    delta_eg: e - u,
                    delta_threshold: t - u,
                    minimizing,
                }
            })
            .collect();
        MitigationComparison {
            unmitigated,
            exponentiated_gradient,
            threshold_optimizer,
            ranges,
        }
    }

    pub fn table(&self, method: MitigationMethod) -> &GroupMetricTable {
        match method {
            MitigationMethod::Unmitigated => &self.unmitigated,
            MitigationMethod::ExponentiatedGradient => &self.exponentiated_gradient,
            MitigationMethod::ThresholdOptimizer => &self.threshold_optimizer,
        }
    }

    pub fn range(&self, metric: RangeMetric) -> &RangeComparison {
        self.ranges
            .iter()
            .find(|r| r.metric == metric)
            .expect("every range metric is compared")
    }
}

/// Group tables for the three prediction vectors, with their ranges side by side.
pub fn compare_mitigation<S: AsRef<str>>(
    y: &[u8],
    groups: &[S],
    unmitigated: &[u8],
    eg: &[u8],
    threshold: &[u8],
) -> Result<MitigationComparison> {
    if unmitigated.len() != y.len() || eg.len() != y.len() || threshold.len() != y.len() {
        return Err(Error::InvalidInput(
            "prediction vectors are not aligned with labels".into(),
        ));
    }
    Ok(MitigationComparison::from_tables(
        group_metric_table(y, unmitigated, None, groups)?,
        group_metric_table(y, eg, None, groups)?,
        group_metric_table(y, threshold, None, groups)?,
    ))
}
