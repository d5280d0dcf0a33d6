//! Report types. Every field is plain data so a parsed report re-serialises
//! to the same bytes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::learners::LearnerKind;
use crate::metrics::{ConfusionCounts, GroupMetricTable, MetricBundle, RocPoint};
use crate::mitigation::{EgTrainingSummary, GroupCalibration, MitigationComparison};
use crate::stats::{KsOutcome, TestOutcome};
use crate::tabular::Sex;

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub master_seed: u64,
}

impl Provenance {
    pub fn new(config_hash: String, master_seed: u64) -> Self {
        Provenance {
            tool: "fairlos".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash,
            master_seed,
        }
    }

    /// One-line tag written at the top of every table and figure.
    pub fn tag(&self) -> String {
        format!(
            "{} {} config_hash={} seed={}",
            self.tool, self.version, self.config_hash, self.master_seed
        )
    }
}

/// Seeds used for one sex and one split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub split: u64,
    pub downsample: u64,
    pub learner: u64,
    pub calibration: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiSource {
    Computed,
    Pinned,
}

/// LOS quartiles with the outlier count rather than the outlier list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosSummary {
    pub n: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub iqr: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub upper_fence: f64,
    pub n_outliers: usize,
    pub inlier_mean: f64,
    pub mean: f64,
    /// Number of admissions at each LOS in days.
    pub histogram: BTreeMap<u32, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub variable: String,
    pub category: String,
    pub admissions: u64,
    pub share: f64,
    pub long_stays: u64,
    pub long_stay_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub admissions: u64,
    pub patients: u64,
    pub long_stays: u64,
    pub long_stay_rate: f64,
    pub categories: Vec<CategoryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTest {
    pub name: String,
    pub outcome: TestOutcome,
    pub rejects_at_05: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedKs {
    pub feature: String,
    pub outcome: Option<KsOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    /// Equal-probability chi-square tests over category counts.
    pub chi_square: Vec<NamedTest>,
    /// Exact test that long and short stays are equally likely.
    pub long_stay_binomial_p: f64,
    pub normality: Vec<NamedKs>,
    /// Spearman correlation of each numeric feature with LOS.
    pub spearman_with_los: Vec<NamedTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub usable_rows: u64,
    pub train_rows: u64,
    pub test_rows: u64,
    pub balanced_train_rows: u64,
    pub train_long: u64,
    pub test_long: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub learner: LearnerKind,
    pub metrics: MetricBundle,
    pub counts: ConfusionCounts,
    pub optimal_point: RocPoint,
    /// Thinned ROC curve for plotting.
    pub roc: Vec<[f64; 2]>,
    pub groups: GroupMetricTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSummary {
    pub target_fnr: f64,
    pub thresholds: BTreeMap<String, f64>,
    pub fallback: f64,
    pub excluded: Vec<String>,
    pub calibration: BTreeMap<String, GroupCalibration>,
    pub fallback_rows: usize,
    /// The frozen scorer the thresholds were fitted on, at 0.5, on test data.
    pub base_groups: GroupMetricTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationReport {
    pub epsilon: f64,
    pub eg_learner: LearnerKind,
    pub eg_training: EgTrainingSummary,
    pub eg_mixture_weights: Vec<f64>,
    pub threshold: ThresholdSummary,
    pub comparison: MitigationComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SexReport {
    pub sex: Sex,
    pub psi: u32,
    pub psi_source: PsiSource,
    pub seeds: StageSeeds,
    pub los: LosSummary,
    pub dataset: DatasetSummary,
    pub stats: StatsSummary,
    pub split: SplitSummary,
    pub model: ModelResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mitigation: Option<MitigationReport>,
}

/// Published performance of learners on the original restricted data, kept
/// for side-by-side context only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub model: String,
    pub sex: Sex,
    pub auc: f64,
    pub fnr: f64,
    pub fpr: f64,
    pub balanced_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub provenance: Provenance,
    pub sexes: Vec<SexReport>,
    pub external_reference: Vec<ReferenceRow>,
}

impl RunReport {
    pub fn sex(&self, sex: Sex) -> Option<&SexReport> {
        self.sexes.iter().find(|s| s.sex == sex)
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation; absent for a single split.
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub seeds: StageSeeds,
    pub metrics: MetricBundle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SexRepeat {
    pub sex: Sex,
    pub psi: u32,
    pub splits: Vec<SplitResult>,
    pub summary: Vec<MetricSummary>,
}

impl SexRepeat {
    pub fn summary_of(&self, metric: &str) -> Option<&MetricSummary> {
        self.summary.iter().find(|m| m.metric == metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatReport {
    pub format_version: u32,
    pub provenance: Provenance,
    pub k: usize,
    pub same_seed: bool,
    pub sexes: Vec<SexRepeat>,
}

impl RepeatReport {
    pub fn sex(&self, sex: Sex) -> Option<&SexRepeat> {
        self.sexes.iter().find(|s| s.sex == sex)
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Published performance rows, male then female.
pub fn external_reference() -> Vec<ReferenceRow> {
    const ROWS: [(&str, [f64; 4], [f64; 4]); 8] = [
        ("LR", [0.742, 0.362, 0.285, 0.677], [0.751, 0.343, 0.292, 0.682]),
        ("RF", [0.759, 0.224, 0.396, 0.690], [0.756, 0.229, 0.392, 0.689]),
        ("SVM", [0.742, 0.420, 0.243, 0.669], [0.747, 0.376, 0.266, 0.679]),
        ("KNN", [0.679, 0.375, 0.369, 0.628], [0.681, 0.385, 0.359, 0.628]),
        ("GBoost", [0.742, 0.399, 0.264, 0.668], [0.747, 0.401, 0.251, 0.674]),
        ("HistGBoost", [0.771, 0.296, 0.303, 0.701], [0.773, 0.278, 0.313, 0.705]),
        ("XGBoost", [0.763, 0.284, 0.326, 0.695], [0.761, 0.286, 0.331, 0.692]),
        ("NN", [0.716, 0.496, 0.210, 0.647], [0.723, 0.473, 0.233, 0.647]),
    ];
    let mut out = Vec::new();
    for (sex, pick) in [(Sex::Male, 0usize), (Sex::Female, 1)] {
        for (model, m, f) in ROWS {
            let v = if pick == 0 { m } else { f };
            out.push(ReferenceRow {
                model: model.into(),
                sex,
                auc: v[0],
                fnr: v[1],
                fpr: v[2],
                balanced_accuracy: v[3],
            });
        }
    }
    out
}

/// Descriptive statistics of one sex, without any model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SexStats {
    pub sex: Sex,
    pub psi: u32,
    pub psi_source: PsiSource,
    pub los: LosSummary,
    pub dataset: DatasetSummary,
    pub stats: StatsSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub format_version: u32,
    pub provenance: Provenance,
    pub sexes: Vec<SexStats>,
}

impl StatsReport {
    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}
