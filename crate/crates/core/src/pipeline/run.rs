//! Stage functions and the end-to-end run.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::config::{CohortSource, MitigationSettings, RunConfig};
use super::emit::emit_report;
use super::report::{
    external_reference, CategoryRow, DatasetSummary, LosSummary, MitigationReport, ModelResult, NamedKs, NamedTest,
    Provenance, PsiSource, RunReport, SexReport, SexStats, SplitSummary, StageSeeds, StatsReport, StatsSummary,
    ThresholdSummary, REPORT_FORMAT_VERSION,
};
use crate::cohort::{generate_cohort, SyntheticCohortConfig};
use crate::error::{Error, Result};
use crate::learners::{fit, predict_proba, threshold_scores, LearnerConfig, TrainedModel};
use crate::metrics::{auc, confusion, group_metric_table, rates, roc_curve, RocCurve};
use crate::mitigation::{
    compare_mitigation, fit_exponentiated_gradient, fit_threshold_optimizer, predict_eg, predict_thresholded,
    EGEnsemble, FairnessConstraint, ThresholdPolicy,
};
use crate::rng::derive_seed;
use crate::stats::{binomial_test, chi_square_gof, ks_normality, psi_excluding_outliers, spearman};
use crate::tabular::split::{downsample_indices, stratified_split_indices};
use crate::tabular::{
    encode_one_hot, read_admissions_csv, zscore_apply, zscore_fit, AdmissionRecord, AgeGroup, ColumnKind,
    EncodedDataset, EthnicGroup, SchemaSpec, Sex, Wimd,
};

pub const DECISION_THRESHOLD: f64 = 0.5;

/// Loads or generates the admissions. Generated cohorts use `seed`.
pub fn load_records(source: &CohortSource, seed: u64) -> Result<Vec<AdmissionRecord>> {
    match source {
        CohortSource::Synthetic { config } => generate_cohort(&SyntheticCohortConfig {
            seed,
            ..(**config).clone()
        }),
        CohortSource::CohortConfig { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let config = SyntheticCohortConfig::from_json(&text)?;
            generate_cohort(&SyntheticCohortConfig { seed, ..config })
        }
        CohortSource::Admissions { path } => {
            let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            read_admissions_csv(std::io::BufReader::new(file))
        }
    }
}

pub fn records_for_sex(records: &[AdmissionRecord], sex: Sex) -> Vec<AdmissionRecord> {
    records.iter().filter(|r| r.sex == sex).cloned().collect()
}

impl StageSeeds {
    /// Seeds for split `index` of one sex, derived from the master seed.
    pub fn derive(master: u64, sex: Sex, index: u64) -> Self {
        let d = |stage: &str| derive_seed(master, &format!("{stage}/{}", sex.label()), index);
        StageSeeds {
            split: d("split"),
            downsample: d("downsample"),
            learner: d("learner"),
            calibration: d("calibration"),
        }
    }
}

/// LOS threshold and quartile summary of one cohort.
pub fn los_summary(records: &[AdmissionRecord]) -> Result<(u32, LosSummary)> {
    let los: Vec<f64> = records.iter().map(|r| f64::from(r.los_days)).collect();
    let (psi, q) = psi_excluding_outliers(&los)?;
    let inliers = q.inliers(&los);
    let mut histogram = BTreeMap::new();
    for r in records {
        *histogram.entry(r.los_days).or_insert(0u64) += 1;
    }
    Ok((
        psi,
        LosSummary {
            n: q.n,
            q1: q.q1,
            median: q.q2,
            q3: q.q3,
            iqr: q.iqr,
            lower_whisker: q.lower_whisker,
            upper_whisker: q.upper_whisker,
            upper_fence: q.upper_fence,
            n_outliers: q.outlier_indices.len(),
            inlier_mean: inliers.iter().sum::<f64>() / inliers.len() as f64,
            mean: los.iter().sum::<f64>() / los.len() as f64,
            histogram,
        },
    ))
}

/// Admission counts and long-stay rates by demographic category.
pub fn dataset_summary(records: &[AdmissionRecord], psi: u32) -> DatasetSummary {
    let long = |r: &AdmissionRecord| r.los_days >= psi;
    let n = records.len() as u64;
    let n_long = records.iter().filter(|r| long(r)).count() as u64;
    let patients: BTreeSet<&str> = records.iter().map(|r| r.patient_id.as_str()).collect();
    let mut categories = Vec::new();
    let mut push = |variable: &str, labels: Vec<&str>, key: &dyn Fn(&AdmissionRecord) -> &'static str| {
        for label in labels {
            let rows: Vec<&AdmissionRecord> = records.iter().filter(|r| key(r) == label).collect();
            let admissions = rows.len() as u64;
            let long_stays = rows.iter().filter(|r| long(r)).count() as u64;
            categories.push(CategoryRow {
                variable: variable.into(),
                category: label.into(),
                admissions,
                share: ratio(admissions, n),
                long_stays,
                long_stay_rate: ratio(long_stays, admissions),
            });
        }
    };
    push("AGEGRP_AT_ADMIS_DT", AgeGroup::labels(), &|r| r.age_group.label());
    push("ETHNIC_GROUP", EthnicGroup::labels(), &|r| r.ethnic_group.label());
    push("WIMD", Wimd::labels(), &|r| r.wimd.label());
    DatasetSummary {
        admissions: n,
        patients: patients.len() as u64,
        long_stays: n_long,
        long_stay_rate: ratio(n_long, n),
        categories,
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Hypothesis tests over one cohort's categories and numeric features.
pub fn stats_summary(
    records: &[AdmissionRecord],
    encoded: &EncodedDataset,
    dataset: &DatasetSummary,
) -> Result<StatsSummary> {
    let mut chi_square = Vec::new();
    for variable in ["AGEGRP_AT_ADMIS_DT", "ETHNIC_GROUP", "WIMD"] {
        let counts: Vec<u64> = dataset
            .categories
            .iter()
            .filter(|c| c.variable == variable && c.admissions > 0)
            .map(|c| c.admissions)
            .collect();
        if counts.len() < 2 {
            continue;
        }
        let outcome = chi_square_gof(&counts)?;
        chi_square.push(NamedTest {
            name: variable.into(),
            outcome,
            rejects_at_05: outcome.rejects(0.05),
        });
    }
    let long_stay_binomial_p = binomial_test(dataset.long_stays, dataset.admissions, 0.5)?;

    let los: Vec<f64> = records.iter().map(|r| f64::from(r.los_days)).collect();
    let mut normality = Vec::new();
    let mut spearman_with_los = Vec::new();
    for (j, col) in encoded.schema.iter().enumerate() {
        if col.kind != ColumnKind::Numeric {
            continue;
        }
        let values = encoded.features.column(j);
        match ks_normality(&values) {
            Ok(o) => normality.push(NamedKs {
                feature: col.name.clone(),
                outcome: Some(o),
                note: None,
            }),
            Err(e) => normality.push(NamedKs {
                feature: col.name.clone(),
                outcome: None,
                note: Some(e.to_string()),
            }),
        }
        if let Ok(outcome) = spearman(&values, &los) {
            spearman_with_los.push(NamedTest {
                name: col.name.clone(),
                outcome,
                rejects_at_05: outcome.rejects(0.05),
            });
        }
    }
    Ok(StatsSummary {
        chi_square,
        long_stay_binomial_p,
        normality,
        spearman_with_los,
    })
}

/// LOS summary, demographics and hypothesis tests for each sex present.
pub fn stats_report(
    records: &[AdmissionRecord],
    psi_override: Option<u32>,
    provenance: Provenance,
) -> Result<StatsReport> {
    let mut sexes = Vec::new();
    for sex in [Sex::Male, Sex::Female] {
        let cohort = records_for_sex(records, sex);
        if cohort.is_empty() {
            continue;
        }
        let (computed, los) = los_summary(&cohort)?;
        let (psi, psi_source) = match psi_override {
            Some(p) => (p, PsiSource::Pinned),
            None => (computed, PsiSource::Computed),
        };
        let encoded = encode_one_hot(&cohort, &SchemaSpec::los_inputs(), psi)?;
        let dataset = dataset_summary(&cohort, psi);
        let stats = stats_summary(&cohort, &encoded, &dataset)?;
        sexes.push(SexStats {
            sex,
            psi,
            psi_source,
            los,
            dataset,
            stats,
        });
    }
    if sexes.is_empty() {
        return Err(Error::InsufficientData("no admissions".into()));
    }
    Ok(StatsReport {
        format_version: REPORT_FORMAT_VERSION,
        provenance,
        sexes,
    })
}

/// Encoded, split, balanced and normalised data for one cohort.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub psi: u32,
    pub psi_source: PsiSource,
    pub encoded: EncodedDataset,
    /// Normalised, class-balanced training split.
    pub train: EncodedDataset,
    /// Normalised test split (left imbalanced).
    pub test: EncodedDataset,
    pub split: SplitSummary,
}

pub fn prepare(
    records: &[AdmissionRecord],
    psi_override: Option<u32>,
    train_fraction: f64,
    seeds: &StageSeeds,
) -> Result<PreparedData> {
    let (psi, psi_source) = match psi_override {
        Some(p) => (p, PsiSource::Pinned),
        None => (los_summary(records)?.0, PsiSource::Computed),
    };
    let encoded = encode_one_hot(records, &SchemaSpec::los_inputs(), psi)?;
    prepare_encoded(encoded, psi, psi_source, train_fraction, seeds)
}

pub fn prepare_encoded(
    encoded: EncodedDataset,
    psi: u32,
    psi_source: PsiSource,
    train_fraction: f64,
    seeds: &StageSeeds,
) -> Result<PreparedData> {
    let (train_idx, test_idx) = stratified_split_indices(&encoded.labels, train_fraction, seeds.split)?;
    let mut train = encoded.subset(&train_idx);
    let mut test = encoded.subset(&test_idx);
    train.seed = Some(seeds.split);
    test.seed = Some(seeds.split);
    let keep = downsample_indices(&train.labels, seeds.downsample)?;
    let balanced = train.subset(&keep);
    let params = zscore_fit(&balanced)?;
    let count_long = |d: &EncodedDataset| d.labels.iter().filter(|&&l| l == 1).count() as u64;
    let split = SplitSummary {
        usable_rows: encoded.len() as u64,
        train_rows: train.len() as u64,
        test_rows: test.len() as u64,
        balanced_train_rows: balanced.len() as u64,
        train_long: count_long(&train),
        test_long: count_long(&test),
    };
    Ok(PreparedData {
        psi,
        psi_source,
        train: zscore_apply(&balanced, &params)?,
        test: zscore_apply(&test, &params)?,
        encoded,
        split,
    })
}

pub fn train_model(learner: &LearnerConfig, train: &EncodedDataset, seed: u64) -> Result<TrainedModel> {
    fit(&learner.clone().with_seed(seed), &train.features, &train.labels, None)
}

/// Keeps ROC vertices at least `step` apart in either coordinate, plus both ends.
pub fn thin_roc(curve: &RocCurve, step: f64) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = Vec::new();
    let last = curve.points.len().saturating_sub(1);
    for (i, p) in curve.points.iter().enumerate() {
        let keep = match out.last() {
            None => true,
            Some(prev) => i == last || (p.fpr - prev[0]).abs() >= step || (p.tpr - prev[1]).abs() >= step,
        };
        if keep {
            out.push([p.fpr, p.tpr]);
        }
    }
    out
}

/// Test-set metrics of `model`, overall and per ethnic group.
pub fn evaluate_model(model: &TrainedModel, test: &EncodedDataset) -> Result<(ModelResult, Vec<f64>)> {
    let scores = predict_proba(model, &test.features)?;
    let yhat = threshold_scores(&scores, DECISION_THRESHOLD)?;
    let counts = confusion(&test.labels, &yhat)?;
    let curve = roc_curve(&test.labels, &scores)?;
    let metrics = rates(&counts)?.with_auc(auc(&test.labels, &scores)?);
    let groups = group_metric_table(&test.labels, &yhat, Some(&scores), &test.groups)?;
    Ok((
        ModelResult {
            learner: model.config.kind,
            metrics,
            counts,
            optimal_point: curve.optimal_point(),
            roc: thin_roc(&curve, 0.005),
            groups,
        },
        scores,
    ))
}

pub struct MitigationOutcome {
    pub eg: EGEnsemble,
    pub threshold_base: TrainedModel,
    pub policy: ThresholdPolicy,
    pub report: MitigationReport,
}

/// Fits both mitigations on the balanced training split and compares them
/// with the unmitigated predictions on the test split.
pub fn run_mitigation(
    settings: &MitigationSettings,
    learner: &LearnerConfig,
    prepared: &PreparedData,
    unmitigated: &[u8],
    seeds: &StageSeeds,
) -> Result<MitigationOutcome> {
    let train = &prepared.train;
    let test = &prepared.test;
    let constraint = FairnessConstraint::fnr_parity(settings.epsilon, &train.groups)?;
    let eg_learner = settings.eg_learner.clone().with_seed(seeds.learner);
    let eg = fit_exponentiated_gradient(
        &eg_learner,
        &train.features,
        &train.labels,
        &train.groups,
        &constraint,
        &settings.eg,
    )?;
    let eg_pred = threshold_scores(&predict_eg(&eg, &test.features)?, settings.eg.decision_threshold)?;

    let (fit_idx, cal_idx) =
        stratified_split_indices(&train.labels, 1.0 - settings.calibration_fraction, seeds.calibration)?;
    let fit_part = train.subset(&fit_idx);
    let cal_part = train.subset(&cal_idx);
    let threshold_base = train_model(learner, &fit_part, seeds.learner)?;
    let cal_scores = predict_proba(&threshold_base, &cal_part.features)?;
    let policy = fit_threshold_optimizer(&cal_scores, &cal_part.labels, &cal_part.groups, &settings.threshold)?;
    let test_scores = predict_proba(&threshold_base, &test.features)?;
    let thresholded = predict_thresholded(&policy, &test_scores, &test.groups)?;
    let base_pred = threshold_scores(&test_scores, DECISION_THRESHOLD)?;

    let comparison = compare_mitigation(&test.labels, &test.groups, unmitigated, &eg_pred, &thresholded.labels)?;
    let report = MitigationReport {
        epsilon: settings.epsilon,
        eg_learner: eg_learner.kind,
        eg_training: eg.training.clone(),
        eg_mixture_weights: eg.mixture_weights.clone(),
        threshold: ThresholdSummary {
            target_fnr: policy.target_fnr,
            thresholds: policy.thresholds.clone(),
            fallback: policy.fallback,
            excluded: policy.excluded.clone(),
            calibration: policy.calibration.clone(),
            fallback_rows: thresholded.fallback_rows,
            base_groups: group_metric_table(&test.labels, &base_pred, Some(&test_scores), &test.groups)?,
        },
        comparison,
    };
    Ok(MitigationOutcome {
        eg,
        threshold_base,
        policy,
        report,
    })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Runs every stage for each requested sex, writes the artifacts and the
/// report into `config.out_dir`, and returns the report.
pub fn run_pipeline(config: &RunConfig) -> Result<RunReport> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let out = &config.out_dir;
    create_dir(out).map_err(|e| e.in_stage("config"))?;
    let provenance = Provenance::new(config.config_hash(), config.seed);

    let records = load_records(&config.cohort, config.seed).map_err(|e| e.in_stage("generate"))?;
    if config.persist_artifacts {
        let path = out.join("admissions.csv");
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e).in_stage("generate"))?;
        crate::tabular::write_admissions_csv(&records, std::io::BufWriter::new(file))
            .map_err(|e| e.in_stage("generate"))?;
    }

    let mut sexes = Vec::new();
    for sex in config.sex.sexes() {
        let seeds = StageSeeds::derive(config.seed, sex, 0);
        let cohort = records_for_sex(&records, sex);
        let dir = out.join(sex.label().to_ascii_lowercase());
        if config.persist_artifacts {
            create_dir(&dir).map_err(|e| e.in_stage("prepare"))?;
        }

        let (computed_psi, los) = los_summary(&cohort).map_err(|e| e.in_stage("stats"))?;
        let prepared =
            prepare(&cohort, config.psi, config.train_fraction, &seeds).map_err(|e| e.in_stage("prepare"))?;
        debug_assert!(config.psi.is_some() || prepared.psi == computed_psi);
        let dataset = dataset_summary(&cohort, prepared.psi);
        let stats = stats_summary(&cohort, &prepared.encoded, &dataset).map_err(|e| e.in_stage("stats"))?;
        if config.persist_artifacts {
            prepared.train.save(&dir, "train").map_err(|e| e.in_stage("prepare"))?;
            prepared.test.save(&dir, "test").map_err(|e| e.in_stage("prepare"))?;
        }

        let model = train_model(&config.learner, &prepared.train, seeds.learner).map_err(|e| e.in_stage("train"))?;
        if config.persist_artifacts {
            write_json(&dir.join("model.json"), &model).map_err(|e| e.in_stage("train"))?;
        }
        let (model_result, scores) = evaluate_model(&model, &prepared.test).map_err(|e| e.in_stage("evaluate"))?;

        let mitigation = match &config.mitigation {
            None => None,
            Some(settings) => {
                let unmitigated = threshold_scores(&scores, DECISION_THRESHOLD).map_err(|e| e.in_stage("mitigate"))?;
                let outcome = run_mitigation(settings, &config.learner, &prepared, &unmitigated, &seeds)
                    .map_err(|e| e.in_stage("mitigate"))?;
                if config.persist_artifacts {
                    write_json(&dir.join("eg_ensemble.json"), &outcome.eg).map_err(|e| e.in_stage("mitigate"))?;
                    write_json(&dir.join("threshold_policy.json"), &outcome.policy)
                        .map_err(|e| e.in_stage("mitigate"))?;
                    write_json(&dir.join("threshold_base_model.json"), &outcome.threshold_base)
                        .map_err(|e| e.in_stage("mitigate"))?;
                }
                Some(outcome.report)
            }
        };

        sexes.push(SexReport {
            sex,
            psi: prepared.psi,
            psi_source: prepared.psi_source,
            seeds,
            los,
            dataset,
            stats,
            split: prepared.split.clone(),
            model: model_result,
            mitigation,
        });
    }

    let report = RunReport {
        format_version: REPORT_FORMAT_VERSION,
        provenance,
        sexes,
        external_reference: external_reference(),
    };
    emit_report(&report, out, &super::emit::EmitOptions { svg: config.plots }).map_err(|e| e.in_stage("report"))?;
    Ok(report)
}
