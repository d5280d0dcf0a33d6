//! Confusion-based rates, ROC analysis and group audits.

pub mod confusion;
pub mod groups;
pub mod roc;

pub use confusion::{confusion, rates, ConfusionCounts, MetricBundle};
pub use groups::{group_metric_table, range_of, GroupMetricTable, GroupRow, MetricRanges, RangeMetric};
pub use roc::{auc, optimal_roc_point, roc_curve, RocCurve, RocPoint};
