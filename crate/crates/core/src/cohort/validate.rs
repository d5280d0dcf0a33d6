//! Compares a cohort against the configuration it was generated from.

use serde::{Deserialize, Serialize};

use super::config::{ordered, Marginal, SyntheticCohortConfig};
use crate::tabular::record::{AdmissionRecord, AgeGroup, EthnicGroup, InvariantViolation, Sex, Wimd, LTC_NAMES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalDeviation {
    pub variable: String,
    pub category: String,
    pub expected: f64,
    pub observed: f64,
    pub abs_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceDeviation {
    pub condition: String,
    pub sex: Sex,
    pub admissions: usize,
    pub expected: f64,
    pub observed: f64,
    pub abs_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortValidation {
    pub n_admissions: usize,
    pub n_patients: usize,
    pub marginals: Vec<MarginalDeviation>,
    pub conditions: Vec<PrevalenceDeviation>,
    pub violations: Vec<InvariantViolation>,
}

impl CohortValidation {
    pub fn max_marginal_deviation(&self) -> f64 {
        self.marginals.iter().map(|m| m.abs_deviation).fold(0.0, f64::max)
    }

    pub fn max_prevalence_deviation(&self) -> f64 {
        self.conditions.iter().map(|c| c.abs_deviation).fold(0.0, f64::max)
    }

    pub fn marginal(&self, variable: &str, category: &str) -> Option<&MarginalDeviation> {
        self.marginals
            .iter()
            .find(|m| m.variable == variable && m.category == category)
    }

    pub fn prevalence(&self, condition: &str, sex: Sex) -> Option<&PrevalenceDeviation> {
        self.conditions
            .iter()
            .find(|c| c.condition == condition && c.sex == sex)
    }
}

fn compare<F>(
    out: &mut Vec<MarginalDeviation>,
    variable: &str,
    labels: &[&str],
    expected: &Marginal,
    records: &[AdmissionRecord],
    index_of: F,
) where
    F: Fn(&AdmissionRecord) -> usize,
{
    let mut counts = vec![0usize; labels.len()];
    for r in records {
        counts[index_of(r)] += 1;
    }
    let n = records.len().max(1) as f64;
    for ((label, &e), &c) in labels.iter().zip(&ordered(expected, labels)).zip(&counts) {
        let observed = c as f64 / n;
        out.push(MarginalDeviation {
            variable: variable.into(),
            category: label.to_string(),
            expected: e,
            observed,
            abs_deviation: (observed - e).abs(),
        });
    }
}

/// Reports admission-level marginal deviations, per-sex condition prevalence
/// deviations and every record invariant violation.
pub fn validate_cohort(records: &[AdmissionRecord], config: &SyntheticCohortConfig) -> CohortValidation {
    let mut marginals = Vec::new();
    compare(&mut marginals, "SEX", &Sex::labels(), &config.sex_split, records, |r| {
        r.sex.index()
    });
    compare(
        &mut marginals,
        "AGEGRP_AT_ADMIS_DT",
        &AgeGroup::labels(),
        &config.age_marginals,
        records,
        |r| r.age_group.index(),
    );
    compare(
        &mut marginals,
        "ETHNIC_GROUP",
        &EthnicGroup::labels(),
        &config.ethnicity_marginals,
        records,
        |r| r.ethnic_group.index(),
    );
    compare(
        &mut marginals,
        "WIMD",
        &Wimd::labels(),
        &config.wimd_marginals,
        records,
        |r| r.wimd.index(),
    );

    let mut conditions = Vec::new();
    for &sex in Sex::ALL {
        let rows: Vec<&AdmissionRecord> = records.iter().filter(|r| r.sex == sex).collect();
        if rows.is_empty() {
            continue;
        }
        for (k, name) in LTC_NAMES.iter().enumerate() {
            let expected = config.condition_prevalence.get(*name).map_or(0.0, |p| p.for_sex(sex));
            let hits = rows
                .iter()
                .filter(|r| r.cond_flags.get(k).copied().unwrap_or(false))
                .count();
            let observed = hits as f64 / rows.len() as f64;
            conditions.push(PrevalenceDeviation {
                condition: name.to_string(),
                sex,
                admissions: rows.len(),
                expected,
                observed,
                abs_deviation: (observed - expected).abs(),
            });
        }
    }

    let mut patients: Vec<&str> = records.iter().map(|r| r.patient_id.as_str()).collect();
    patients.sort_unstable();
    patients.dedup();

    CohortValidation {
        n_admissions: records.len(),
        n_patients: patients.len(),
        marginals,
        conditions,
        violations: records.iter().flat_map(AdmissionRecord::violations).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::generate_cohort;

    #[test]
    fn generated_cohort_is_clean_and_tampering_is_flagged() {
        let cfg = SyntheticCohortConfig {
            n_patients: 300,
            ..SyntheticCohortConfig::default()
        };
        let mut recs = generate_cohort(&cfg).unwrap();
        let report = validate_cohort(&recs, &cfg);
        assert!(report.violations.is_empty());
        assert_eq!(report.n_patients, 300);
        assert_eq!(report.marginals.len(), 2 + 7 + 5 + 6);

        recs[0].prior.admissions_1yr = recs[0].prior.admissions_3yr + 1;
        let report = validate_cohort(&recs, &cfg);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].admission_id, recs[0].admission_id);
    }
}
