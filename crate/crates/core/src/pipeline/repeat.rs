//! Repeated evaluation over independent train/test splits.

use super::config::RunConfig;
use super::report::{
    MetricSummary, Provenance, RepeatReport, SexRepeat, SplitResult, StageSeeds, REPORT_FORMAT_VERSION,
};
use super::run::{evaluate_model, load_records, los_summary, prepare_encoded, records_for_sex, train_model};
use crate::error::{Error, Result};
use crate::metrics::MetricBundle;
use crate::tabular::{encode_one_hot, SchemaSpec};

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation, `None` below two observations.
    pub fn std(&self) -> Option<f64> {
        (self.n >= 2).then(|| (self.m2 / (self.n - 1) as f64).sqrt())
    }
}

const SUMMARY_METRICS: [&str; 4] = ["auc", "fnr", "fpr", "balanced_accuracy"];

fn metric_value(m: &MetricBundle, name: &str) -> f64 {
    match name {
        "auc" => m.auc.unwrap_or(f64::NAN),
        "fnr" => m.fnr,
        "fpr" => m.fpr,
        _ => m.balanced_accuracy,
    }
}

/// Mean and sample std of each metric over the splits.
pub fn summarize(splits: &[SplitResult]) -> Vec<MetricSummary> {
    SUMMARY_METRICS
        .iter()
        .map(|&name| {
            let mut w = Welford::default();
            let first = splits.first().map(|s| metric_value(&s.metrics, name));
            let identical = splits.iter().all(|s| Some(metric_value(&s.metrics, name)) == first);
            for s in splits {
                w.push(metric_value(&s.metrics, name));
            }
            let std = if identical && splits.len() >= 2 {
                Some(0.0)
            } else {
                w.std()
            };
            MetricSummary {
                metric: name.into(),
                mean: first.filter(|_| identical).unwrap_or(w.mean()),
                std,
            }
        })
        .collect()
}

/// Trains and evaluates `k` times per sex. Split `i` uses seeds derived
/// from the master seed and `i`, or from index 0 for every split when
/// `same_seed` is set.
pub fn repeat_evaluate(config: &RunConfig, k: usize, same_seed: bool) -> Result<RepeatReport> {
    if k == 0 {
        return Err(Error::Config("repeat count must be at least 1".into()));
    }
    config.validate().map_err(|e| e.in_stage("config"))?;
    let records = load_records(&config.cohort, config.seed).map_err(|e| e.in_stage("generate"))?;
    let mut sexes = Vec::new();
    for sex in config.sex.sexes() {
        let cohort = records_for_sex(&records, sex);
        let (psi, source) = match config.psi {
            Some(p) => (p, super::report::PsiSource::Pinned),
            None => (
                los_summary(&cohort).map_err(|e| e.in_stage("prepare"))?.0,
                super::report::PsiSource::Computed,
            ),
        };
        let encoded = encode_one_hot(&cohort, &SchemaSpec::los_inputs(), psi).map_err(|e| e.in_stage("prepare"))?;
        let mut splits = Vec::with_capacity(k);
        for i in 0..k {
            let seeds = StageSeeds::derive(config.seed, sex, if same_seed { 0 } else { i as u64 });
            let prepared = prepare_encoded(encoded.clone(), psi, source, config.train_fraction, &seeds)
                .map_err(|e| e.in_stage("prepare"))?;
            let model =
                train_model(&config.learner, &prepared.train, seeds.learner).map_err(|e| e.in_stage("train"))?;
            let (result, _) = evaluate_model(&model, &prepared.test).map_err(|e| e.in_stage("evaluate"))?;
            log::info!("{} split {}: {:?}", sex.label(), i, result.metrics);
            splits.push(SplitResult {
                seeds,
                metrics: result.metrics,
            });
        }
        let summary = summarize(&splits);
        sexes.push(SexRepeat {
            sex,
            psi,
            splits,
            summary,
        });
    }
    Ok(RepeatReport {
        format_version: REPORT_FORMAT_VERSION,
        provenance: Provenance::new(config.config_hash(), config.seed),
        k,
        same_seed,
        sexes,
    })
}
