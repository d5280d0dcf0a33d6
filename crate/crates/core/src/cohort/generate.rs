//! Synthetic admission generator.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Geometric, Normal, Poisson};
use rayon::prelude::*;

use super::config::{ordered, LosModel, SyntheticCohortConfig};
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::tabular::record::{
    AdmissionRecord, AgeGroup, BmiCategory, EthnicGroup, PriorCounts, Sex, Tristate, Wimd, LTC_NAMES,
    MAX_TOTAL_COMORBIDITY,
};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn weighted(probs: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(probs).map_err(|e| Error::Config(format!("bad probability vector: {e}")))
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> u32 {
    if lambda <= 0.0 {
        return 0;
    }
    match Poisson::new(lambda) {
        Ok(d) => d.sample(rng).min(f64::from(u32::MAX / 4)) as u32,
        Err(_) => 0,
    }
}

fn geometric_with_mean(rng: &mut ChaCha8Rng, mean: f64) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    Geometric::new(1.0 / (1.0 + mean))
        .map(|d| d.sample(rng).min(u64::from(u32::MAX / 4)) as u32)
        .unwrap_or(0)
}

/// Samplers built once from a validated configuration.
struct Prepared<'a> {
    cfg: &'a SyntheticCohortConfig,
    sex: WeightedIndex<f64>,
    age: WeightedIndex<f64>,
    ethnicity: WeightedIndex<f64>,
    wimd: WeightedIndex<f64>,
    bmi: WeightedIndex<f64>,
    smoking: WeightedIndex<f64>,
    alcohol: WeightedIndex<f64>,
    physical: WeightedIndex<f64>,
    short_los: WeightedIndex<f64>,
    /// Per sex (male, female): prevalence of each condition in canonical order.
    prevalence: [Vec<f64>; 2],
    condition_effect: Vec<f64>,
    age_effect: Vec<f64>,
    wimd_effect: Vec<f64>,
}

impl<'a> Prepared<'a> {
    fn new(cfg: &'a SyntheticCohortConfig) -> Result<Self> {
        cfg.validate()?;
        let ls = &cfg.lifestyle;
        let prevalence = |sex: Sex| -> Vec<f64> {
            LTC_NAMES
                .iter()
                .map(|n| cfg.condition_prevalence.get(*n).map_or(0.0, |p| p.for_sex(sex)))
                .collect()
        };
        let ew = &cfg.effect_weights;
        Ok(Prepared {
            cfg,
            sex: weighted(&ordered(&cfg.sex_split, &Sex::labels()))?,
            age: weighted(&ordered(&cfg.age_marginals, &AgeGroup::labels()))?,
            ethnicity: weighted(&ordered(&cfg.ethnicity_marginals, &EthnicGroup::labels()))?,
            wimd: weighted(&ordered(&cfg.wimd_marginals, &Wimd::labels()))?,
            bmi: weighted(&ordered(&ls.bmi, &BmiCategory::labels()))?,
            smoking: weighted(&ordered(&ls.smoking, &Tristate::labels()))?,
            alcohol: weighted(&ordered(&ls.alcohol, &Tristate::labels()))?,
            physical: weighted(&ordered(&ls.physical, &Tristate::labels()))?,
            short_los: weighted(&cfg.los.short_probs)?,
            prevalence: [prevalence(Sex::Male), prevalence(Sex::Female)],
            condition_effect: LTC_NAMES
                .iter()
                .map(|n| ew.conditions.get(*n).copied().unwrap_or(0.0))
                .collect(),
            age_effect: ordered(&ew.age, &AgeGroup::labels()),
            wimd_effect: ordered(&ew.deprivation, &Wimd::labels()),
        })
    }

    fn patient(&self, index: usize) -> Vec<AdmissionRecord> {
        let cfg = self.cfg;
        let mut rng = stream_rng(cfg.seed, index as u64);
        let sex = Sex::ALL[self.sex.sample(&mut rng)];
        let age_group = AgeGroup::ALL[self.age.sample(&mut rng)];
        let ethnic_group = EthnicGroup::ALL[self.ethnicity.sample(&mut rng)];
        let wimd = Wimd::ALL[self.wimd.sample(&mut rng)];
        let bmi = BmiCategory::ALL[self.bmi.sample(&mut rng)];
        let smoking_history = Tristate::ALL[self.smoking.sample(&mut rng)];
        let alcohol_history = Tristate::ALL[self.alcohol.sample(&mut rng)];
        let physical = Tristate::ALL[self.physical.sample(&mut rng)];
        let autism = rng.random::<f64>() < cfg.lifestyle.autism_rate;

        let frailty_sd = cfg.effect_weights.frailty_sd;
        let frailty = if frailty_sd > 0.0 {
            Normal::new(0.0, frailty_sd).map_or(0.0, |d| d.sample(&mut rng))
        } else {
            0.0
        };

        let apc = &cfg.admissions_per_patient;
        let extra_mean = apc.mean - 1.0;
        let n_admissions = 1 + if extra_mean > 0.0 {
            let lambda =
                Gamma::new(apc.dispersion, extra_mean / apc.dispersion).map_or(extra_mean, |g| g.sample(&mut rng));
            poisson(&mut rng, lambda)
        } else {
            0
        };

        let bias = cfg.bias_for(ethnic_group);
        let um = &cfg.utilisation;
        let utilisation = (um.frailty_loading * frailty).exp();
        let patient_id = format!("P{index:06}");
        let prevalence = &self.prevalence[sex.index()];

        (0..n_admissions)
            .map(|j| {
                let a1 = poisson(&mut rng, um.admissions_1yr * utilisation);
                let a3 = a1 + poisson(&mut rng, um.admissions_extra_3yr * utilisation);
                let e1 = a1 + poisson(&mut rng, um.extra_episodes * f64::from(a1));
                let e3 = e1 + (a3 - a1) + poisson(&mut rng, um.extra_episodes * f64::from(a3 - a1));
                let c1 = poisson(&mut rng, um.comorbid_1yr * utilisation);
                let c3 = c1 + poisson(&mut rng, um.comorbid_extra_3yr * utilisation);
                let d1 = poisson(&mut rng, um.days_per_admission * f64::from(a1) * utilisation);
                let d3 = d1 + poisson(&mut rng, um.days_per_admission * f64::from(a3 - a1) * utilisation);

                let true_flags: Vec<bool> = prevalence.iter().map(|&p| rng.random::<f64>() < p).collect();
                let cond_flags: Vec<bool> = if bias.under_recording > 0.0 {
                    true_flags
                        .iter()
                        .map(|&f| f && rng.random::<f64>() >= bias.under_recording)
                        .collect()
                } else {
                    true_flags.clone()
                };
                let count = |flags: &[bool]| flags.iter().filter(|&&f| f).count() as u32;
                let n24 = count(&cond_flags).min(MAX_TOTAL_COMORBIDITY);
                let extra = poisson(&mut rng, um.extra_comorbidity);
                let total = (n24 + extra).clamp(1, MAX_TOTAL_COMORBIDITY);
                let true_total =
                    (count(&true_flags).min(MAX_TOTAL_COMORBIDITY) + extra).clamp(1, MAX_TOTAL_COMORBIDITY);
                let episodes_24 = 1 + poisson(&mut rng, um.extra_episodes_24hrs);
                let medications = rng.random::<f64>() < cfg.lifestyle.medications_rate;

                let ew = &cfg.effect_weights;
                let clinical: f64 = cfg.base_long_stay_logit
                    + self.age_effect[age_group.index()]
                    + self.wimd_effect[wimd.index()]
                    + ew.comorbidity * f64::from(true_total - 1)
                    + ew.prior_days * f64::from(d1).ln_1p()
                    + true_flags
                        .iter()
                        .zip(&self.condition_effect)
                        .filter(|(f, _)| **f)
                        .map(|(_, w)| w)
                        .sum::<f64>()
                    + frailty;
                let u_noise: f64 = rng.random();
                let u_label: f64 = rng.random();
                let logit = if u_noise < bias.label_noise {
                    cfg.base_long_stay_logit + bias.logit_offset
                } else {
                    clinical + bias.logit_offset
                };
                let long = u_label < sigmoid(logit);
                let los_days = sample_los(&mut rng, long, &cfg.los, &self.short_los);

                AdmissionRecord {
                    admission_id: format!("A{index:06}-{j:03}"),
                    patient_id: patient_id.clone(),
                    sex,
                    age_group,
                    ethnic_group,
                    wimd,
                    bmi,
                    smoking_history,
                    alcohol_history,
                    physical,
                    autism,
                    medications,
                    prior: PriorCounts {
                        admissions_1yr: a1,
                        admissions_3yr: a3,
                        episodes_1yr: e1,
                        episodes_3yr: e3,
                        comorbid_1yr: c1,
                        comorbid_3yr: c3,
                        hospital_days_1yr: d1,
                        hospital_days_3yr: d3,
                    },
                    total_comorbidity: total,
                    numepisodes_24hrs: episodes_24,
                    numcomorbidities_24hrs: n24,
                    cond_flags,
                    los_days,
                }
            })
            .collect()
    }
}

fn sample_los(rng: &mut ChaCha8Rng, long: bool, model: &LosModel, short: &WeightedIndex<f64>) -> u32 {
    if !long {
        return short.sample(rng) as u32;
    }
    if rng.random::<f64>() < model.tail_prob {
        model.tail_min_days + geometric_with_mean(rng, model.tail_mean_extra)
    } else {
        model.long_min_days + geometric_with_mean(rng, model.long_mean_extra)
    }
}

/// Draws `n` stays from the geometric long-stay body of `model`.
pub fn sample_long_stay_body(model: &LosModel, n: usize, seed: u64) -> Vec<u32> {
    let mut rng = stream_rng(seed, 0);
    (0..n)
        .map(|_| model.long_min_days + geometric_with_mean(&mut rng, model.long_mean_extra))
        .collect()
}

/// Generates the cohort described by `config`. Each patient draws from its
/// own random stream, so the output does not depend on thread count.
pub fn generate_cohort(config: &SyntheticCohortConfig) -> Result<Vec<AdmissionRecord>> {
    let prepared = Prepared::new(config)?;
    let per_patient: Vec<Vec<AdmissionRecord>> = (0..config.n_patients)
        .into_par_iter()
        .map(|i| prepared.patient(i))
        .collect();
    Ok(per_patient.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::record::write_admissions_csv;

    fn small(seed: u64) -> SyntheticCohortConfig {
        SyntheticCohortConfig {
            n_patients: 200,
            seed,
            ..SyntheticCohortConfig::default()
        }
    }

    #[test]
    fn deterministic_bytes() {
        let a = generate_cohort(&small(5)).unwrap();
        let b = generate_cohort(&small(5)).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        write_admissions_csv(&a, &mut ba).unwrap();
        write_admissions_csv(&b, &mut bb).unwrap();
        assert_eq!(ba, bb);
        assert_ne!(a, generate_cohort(&small(6)).unwrap());
    }

    #[test]
    fn records_satisfy_invariants() {
        let recs = generate_cohort(&small(1)).unwrap();
        assert!(recs.len() > 200);
        for r in &recs {
            assert!(r.violations().is_empty(), "{:?}", r.violations());
            let set = r.cond_flags.iter().filter(|&&f| f).count() as u32;
            assert_eq!(r.numcomorbidities_24hrs, set.min(MAX_TOTAL_COMORBIDITY));
        }
    }

    #[test]
    fn malformed_config_is_rejected() {
        let mut cfg = small(1);
        cfg.sex_split.insert("Male".into(), 2.0);
        assert!(matches!(generate_cohort(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn single_sex_filter() {
        let cfg = small(2).single_sex(Sex::Female);
        let recs = generate_cohort(&cfg).unwrap();
        assert!(recs.iter().all(|r| r.sex == Sex::Female));
        assert!(recs.iter().all(|r| !r.condition("MS").unwrap()));
    }
}
