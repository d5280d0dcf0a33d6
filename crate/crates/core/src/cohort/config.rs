//! Generator configuration and its published-marginal defaults.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::record::{AgeGroup, BmiCategory, EthnicGroup, Sex, Tristate, Wimd, LTC_NAMES};

/// Category label → probability.
pub type Marginal = BTreeMap<String, f64>;

fn marginal(labels: &[&str], weights: &[f64]) -> Marginal {
    let total: f64 = weights.iter().sum();
    labels
        .iter()
        .zip(weights)
        .map(|(l, w)| (l.to_string(), w / total))
        .collect()
}

/// Number of admissions per patient: `1 + NegBin`, parameterised by the mean
/// (including the first admission) and the gamma shape of the mixing
/// distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountDistribution {
    pub mean: f64,
    pub dispersion: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SexPrevalence {
    pub male: f64,
    pub female: f64,
}

impl SexPrevalence {
    pub fn for_sex(&self, sex: Sex) -> f64 {
        match sex {
            Sex::Male => self.male,
            Sex::Female => self.female,
        }
    }
}

/// Additive contributions to the long-stay logit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EffectWeights {
    /// Per age group label.
    pub age: BTreeMap<String, f64>,
    /// Per deprivation quintile label.
    pub deprivation: BTreeMap<String, f64>,
    /// Per unit of total comorbidity above one.
    pub comorbidity: f64,
    /// Per unit of `ln(1 + prior hospital days in the last year)`.
    pub prior_days: f64,
    /// Per condition flag set on the admission.
    pub conditions: BTreeMap<String, f64>,
    /// Standard deviation of the per-patient random effect.
    pub frailty_sd: f64,
}

/// Bias injected for one ethnic group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroupBias {
    /// Added to the long-stay logit of every admission in the group.
    pub logit_offset: f64,
    /// Fraction of the group's admissions whose stay class ignores the
    /// clinical features and depends only on the base rate and offset.
    pub label_noise: f64,
    /// Probability that each condition present at an admission is missing
    /// from the recorded features. The stay class still depends on the
    /// true conditions.
    pub under_recording: f64,
}

/// Shape of the length-of-stay distribution given the latent stay class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LosModel {
    /// Probabilities of a short stay lasting 0, 1, 2, ... days.
    pub short_probs: Vec<f64>,
    /// First day of a long stay.
    pub long_min_days: u32,
    /// Mean number of days beyond `long_min_days` in the geometric body.
    pub long_mean_extra: f64,
    /// Probability that a long stay is drawn from the tail instead.
    pub tail_prob: f64,
    pub tail_min_days: u32,
    pub tail_mean_extra: f64,
}

impl Default for LosModel {
    fn default() -> Self {
        LosModel {
            short_probs: vec![0.30, 0.20, 0.25, 0.25],
            long_min_days: 4,
            long_mean_extra: 3.2,
            tail_prob: 0.018,
            tail_min_days: 18,
            tail_mean_extra: 20.0,
        }
    }
}

/// Background rates of the lifestyle and flag variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LifestyleMarginals {
    pub bmi: Marginal,
    pub smoking: Marginal,
    pub alcohol: Marginal,
    pub physical: Marginal,
    pub autism_rate: f64,
    pub medications_rate: f64,
}

impl Default for LifestyleMarginals {
    fn default() -> Self {
        LifestyleMarginals {
            bmi: marginal(&BmiCategory::labels(), &[0.04, 0.22, 0.20, 0.14, 0.05, 0.35]),
            smoking: marginal(&Tristate::labels(), &[0.30, 0.35, 0.35]),
            alcohol: marginal(&Tristate::labels(), &[0.22, 0.38, 0.40]),
            physical: marginal(&Tristate::labels(), &[0.25, 0.30, 0.45]),
            autism_rate: 0.12,
            medications_rate: 0.7,
        }
    }
}

/// Prior-utilisation parameters. A per-patient utilisation factor, tied to
/// the patient's frailty, scales every prior count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UtilisationModel {
    pub admissions_1yr: f64,
    pub admissions_extra_3yr: f64,
    pub extra_episodes: f64,
    pub comorbid_1yr: f64,
    pub comorbid_extra_3yr: f64,
    pub days_per_admission: f64,
    /// How strongly utilisation follows frailty (log scale).
    pub frailty_loading: f64,
    pub extra_comorbidity: f64,
    pub extra_episodes_24hrs: f64,
}

impl Default for UtilisationModel {
    fn default() -> Self {
        UtilisationModel {
            admissions_1yr: 1.2,
            admissions_extra_3yr: 1.6,
            extra_episodes: 0.3,
            comorbid_1yr: 1.5,
            comorbid_extra_3yr: 1.5,
            days_per_admission: 3.0,
            frailty_loading: 0.8,
            extra_comorbidity: 0.8,
            extra_episodes_24hrs: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticCohortConfig {
    pub n_patients: usize,
    pub admissions_per_patient: CountDistribution,
    pub sex_split: Marginal,
    pub age_marginals: Marginal,
    pub ethnicity_marginals: Marginal,
    pub wimd_marginals: Marginal,
    pub condition_prevalence: BTreeMap<String, SexPrevalence>,
    pub lifestyle: LifestyleMarginals,
    pub utilisation: UtilisationModel,
    pub los: LosModel,
    pub base_long_stay_logit: f64,
    pub effect_weights: EffectWeights,
    pub group_bias: BTreeMap<String, GroupBias>,
    pub seed: u64,
}

/// Published admission-level long-stay rates by age group (male cohort).
const AGE_LONG_STAY: [f64; 7] = [0.36741, 0.32521, 0.35620, 0.38205, 0.42145, 0.44643, 0.58771];
const WIMD_LONG_STAY: [f64; 6] = [0.37813, 0.38491, 0.41958, 0.41276, 0.39309, 0.35426];
const OVERALL_LONG_STAY: f64 = 0.38885;

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn relative_logits(labels: &[&str], rates: &[f64]) -> BTreeMap<String, f64> {
    labels
        .iter()
        .zip(rates)
        .map(|(l, &r)| (l.to_string(), logit(r) - logit(OVERALL_LONG_STAY)))
        .collect()
}

/// (condition, male %, female %) of the admission-level prevalence table.
const PREVALENCE_PCT: [(&str, f64, f64); 39] = [
    ("ANAEMIA", 2.648, 3.247),
    ("BARRETTS OESOPHAGUS", 0.760, 0.438),
    ("BRONCHIECTASIS", 1.176, 0.409),
    ("CANCER", 12.098, 14.641),
    ("CARDIAC ARRHYTHMIAS", 7.901, 7.108),
    ("CEREBRAL PALSY", 7.896, 6.357),
    ("CHRONIC CONSTIPATION", 1.812, 2.075),
    ("CHRONIC DIARRHOEA", 0.874, 0.955),
    ("CHRONIC AIRWAY DISEASES", 19.519, 22.755),
    ("CHRONIC ARTHRITIS", 5.232, 8.563),
    ("CHRONIC PAIN CONDITIONS", 0.512, 1.552),
    ("CHRONIC PNEUMONIA", 5.091, 3.451),
    ("CIRRHOSIS", 0.955, 0.455),
    ("CHRONIC KIDNEY DISEASE", 10.426, 11.963),
    ("CORONARY HEART DISEASE", 9.617, 6.203),
    ("DEMENTIA", 5.302, 5.794),
    ("DIABETES", 24.373, 21.686),
    ("DYSPHAGIA", 2.519, 1.950),
    ("EPILEPSY", 29.410, 24.097),
    ("HEARING LOSS", 3.155, 2.155),
    ("HEART FAILURE", 4.622, 3.685),
    ("HYPERTENSION", 0.232, 0.250),
    ("IBD", 1.715, 2.064),
    ("INSOMNIA", 2.341, 1.313),
    ("INTERSTITIAL LUNG DISEASE", 0.561, 0.426),
    ("MENOPAUSAL AND PRE-MENOPAUSAL", 0.0, 1.296),
    ("MENTAL ILLNESS", 17.540, 15.710),
    ("MS", 0.0, 0.0),
    ("NEUROPATHIC PAIN", 0.917, 0.824),
    ("OSTEOPOROSIS", 3.074, 4.640),
    ("PARKINSONS", 1.499, 0.603),
    ("POLYCYSTIC OVARY SYNDROME", 0.0, 0.210),
    ("PSORIASIS", 2.114, 1.291),
    ("PVD", 1.418, 0.842),
    ("REFLUX DISORDERS", 4.590, 4.594),
    ("STROKE", 2.190, 2.240),
    ("THYROID DISORDERS", 8.953, 17.030),
    ("TOURETTE", 0.156, 0.0),
    ("VISUAL IMPAIRMENT", 2.308, 1.700),
];

const CONDITION_EFFECTS: [(&str, f64); 12] = [
    ("HEART FAILURE", 0.6),
    ("DEMENTIA", 0.7),
    ("STROKE", 0.6),
    ("CHRONIC PNEUMONIA", 0.7),
    ("DYSPHAGIA", 0.5),
    ("CANCER", 0.4),
    ("CHRONIC KIDNEY DISEASE", 0.4),
    ("CEREBRAL PALSY", 0.3),
    ("PARKINSONS", 0.4),
    ("CIRRHOSIS", 0.5),
    ("EPILEPSY", -0.2),
    ("MENTAL ILLNESS", -0.15),
];

impl Default for EffectWeights {
    fn default() -> Self {
        EffectWeights {
            age: relative_logits(&AgeGroup::labels(), &AGE_LONG_STAY),
            deprivation: relative_logits(&Wimd::labels(), &WIMD_LONG_STAY),
            comorbidity: 0.45,
            prior_days: 0.35,
            conditions: CONDITION_EFFECTS.iter().map(|(n, w)| (n.to_string(), *w)).collect(),
            frailty_sd: 0.6,
        }
    }
}

impl Default for SyntheticCohortConfig {
    fn default() -> Self {
        SyntheticCohortConfig {
            n_patients: 5000,
            admissions_per_patient: CountDistribution {
                mean: 6.5,
                dispersion: 1.0,
            },
            sex_split: marginal(&Sex::labels(), &[32275.0, 29968.0]),
            age_marginals: marginal(
                &AgeGroup::labels(),
                &[1565.0, 4883.0, 6954.0, 7677.0, 6556.0, 3631.0, 1009.0],
            ),
            ethnicity_marginals: marginal(&EthnicGroup::labels(), &[576.0, 75.0, 76.0, 6208.0, 25340.0]),
            wimd_marginals: marginal(&Wimd::labels(), &[9071.0, 6947.0, 4943.0, 4184.0, 3068.0, 4062.0]),
            condition_prevalence: PREVALENCE_PCT
                .iter()
                .map(|&(n, m, f)| {
                    (
                        n.to_string(),
                        SexPrevalence {
                            male: m / 100.0,
                            female: f / 100.0,
                        },
                    )
                })
                .collect(),
            lifestyle: LifestyleMarginals::default(),
            utilisation: UtilisationModel::default(),
            los: LosModel::default(),
            base_long_stay_logit: -2.0,
            effect_weights: EffectWeights::default(),
            group_bias: BTreeMap::new(),
            seed: 42,
        }
    }
}

impl SyntheticCohortConfig {
    /// A male cohort with enlarged minority groups and bias injected into the
    /// Black group: most of its recorded conditions go missing, its stays run
    /// longer than the clinical features explain, and some of its stay
    /// classes are unrelated to the features. About 32,000 admissions at the
    /// default size.
    pub fn biased() -> Self {
        let mut cfg = SyntheticCohortConfig {
            ethnicity_marginals: marginal(&EthnicGroup::labels(), &[0.10, 0.10, 0.10, 0.20, 0.50]),
            ..SyntheticCohortConfig::default()
        };
        cfg.group_bias.insert(
            EthnicGroup::Black.label().to_string(),
            GroupBias {
                logit_offset: 1.0,
                label_noise: 0.3,
                under_recording: 0.9,
            },
        );
        cfg.single_sex(Sex::Male)
    }

    /// Restricts generation to one sex.
    pub fn single_sex(mut self, sex: Sex) -> Self {
        self.sex_split = Sex::ALL
            .iter()
            .map(|s| (s.label().to_string(), if *s == sex { 1.0 } else { 0.0 }))
            .collect();
        self
    }

    pub fn bias_for(&self, group: EthnicGroup) -> GroupBias {
        self.group_bias.get(group.label()).copied().unwrap_or_default()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SyntheticCohortConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_patients == 0 {
            return Err(Error::Config("n_patients must be positive".into()));
        }
        let apc = &self.admissions_per_patient;
        if !(apc.mean >= 1.0 && apc.mean.is_finite()) || apc.dispersion.is_nan() || apc.dispersion <= 0.0 {
            return Err(Error::Config(
                "admissions_per_patient needs mean >= 1 and dispersion > 0".into(),
            ));
        }
        check_marginal("sex_split", &self.sex_split, &Sex::labels())?;
        check_marginal("age_marginals", &self.age_marginals, &AgeGroup::labels())?;
        check_marginal("ethnicity_marginals", &self.ethnicity_marginals, &EthnicGroup::labels())?;
        check_marginal("wimd_marginals", &self.wimd_marginals, &Wimd::labels())?;
        let ls = &self.lifestyle;
        check_marginal("lifestyle.bmi", &ls.bmi, &BmiCategory::labels())?;
        check_marginal("lifestyle.smoking", &ls.smoking, &Tristate::labels())?;
        check_marginal("lifestyle.alcohol", &ls.alcohol, &Tristate::labels())?;
        check_marginal("lifestyle.physical", &ls.physical, &Tristate::labels())?;
        check_probability("lifestyle.autism_rate", ls.autism_rate)?;
        check_probability("lifestyle.medications_rate", ls.medications_rate)?;

        for (name, p) in &self.condition_prevalence {
            known_condition(name)?;
            check_probability(&format!("condition_prevalence.{name}.male"), p.male)?;
            check_probability(&format!("condition_prevalence.{name}.female"), p.female)?;
        }
        for name in self.effect_weights.conditions.keys() {
            known_condition(name)?;
        }
        for (label, known) in [
            (&self.effect_weights.age, AgeGroup::labels()),
            (&self.effect_weights.deprivation, Wimd::labels()),
        ] {
            if let Some(bad) = label.keys().find(|k| !known.contains(&k.as_str())) {
                return Err(Error::Config(format!("unknown effect category {bad}")));
            }
        }
        for (group, bias) in &self.group_bias {
            if !EthnicGroup::labels().contains(&group.as_str()) {
                return Err(Error::Config(format!("group_bias for unknown group {group}")));
            }
            check_probability(&format!("group_bias.{group}.label_noise"), bias.label_noise)?;
            check_probability(&format!("group_bias.{group}.under_recording"), bias.under_recording)?;
            if !bias.logit_offset.is_finite() {
                return Err(Error::Config(format!("group_bias.{group} offset is not finite")));
            }
        }

        let los = &self.los;
        if los.short_probs.is_empty() || los.short_probs.len() as u32 > los.long_min_days {
            return Err(Error::Config(
                "los.short_probs must cover 1..=long_min_days days".into(),
            ));
        }
        let labels: Vec<String> = (0..los.short_probs.len()).map(|d| d.to_string()).collect();
        let short: Marginal = labels.iter().cloned().zip(los.short_probs.iter().copied()).collect();
        check_marginal(
            "los.short_probs",
            &short,
            &labels.iter().map(String::as_str).collect::<Vec<_>>(),
        )?;
        check_probability("los.tail_prob", los.tail_prob)?;
        if !(los.long_mean_extra >= 0.0 && los.tail_mean_extra >= 0.0) {
            return Err(Error::Config("LOS geometric means must be non-negative".into()));
        }
        if self.effect_weights.frailty_sd < 0.0 {
            return Err(Error::Config("frailty_sd must be non-negative".into()));
        }
        Ok(())
    }
}

fn known_condition(name: &str) -> Result<()> {
    if LTC_NAMES.contains(&name) {
        Ok(())
    } else {
        Err(Error::Config(format!("unknown condition {name}")))
    }
}

fn check_probability(what: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} = {p} is not a probability")))
    }
}

fn check_marginal(what: &str, m: &Marginal, labels: &[&str]) -> Result<()> {
    for key in m.keys() {
        if !labels.contains(&key.as_str()) {
            return Err(Error::Config(format!("{what}: unknown category {key:?}")));
        }
    }
    for label in labels {
        let p = *m
            .get(*label)
            .ok_or_else(|| Error::Config(format!("{what}: missing category {label:?}")))?;
        check_probability(&format!("{what}.{label}"), p)?;
    }
    let total: f64 = m.values().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

/// Probability vector in the declared category order.
pub(crate) fn ordered(m: &Marginal, labels: &[&str]) -> Vec<f64> {
    labels.iter().map(|l| m.get(*l).copied().unwrap_or(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SyntheticCohortConfig::default().validate().unwrap();
        SyntheticCohortConfig::biased().validate().unwrap();
        let cfg = SyntheticCohortConfig::default();
        assert!((cfg.ethnicity_marginals["White"] - 0.78513).abs() < 1e-4);
        assert!((cfg.condition_prevalence["EPILEPSY"].male - 0.2941).abs() < 1e-12);
    }

    #[test]
    fn malformed_vectors_are_rejected() {
        let mut cfg = SyntheticCohortConfig::default();
        cfg.wimd_marginals.insert("1".into(), 0.9);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));

        let mut cfg = SyntheticCohortConfig::default();
        cfg.ethnicity_marginals.insert("Martian".into(), 0.0);
        assert!(cfg.validate().is_err());

        let mut cfg = SyntheticCohortConfig::default();
        cfg.condition_prevalence
            .insert("EPILEPSY".into(), SexPrevalence { male: 1.2, female: 0.1 });
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_partial_documents() {
        let cfg = SyntheticCohortConfig::biased();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(SyntheticCohortConfig::from_json(&text).unwrap(), cfg);
        let partial = SyntheticCohortConfig::from_json(r#"{"n_patients": 10, "seed": 3}"#).unwrap();
        assert_eq!(partial.n_patients, 10);
        assert_eq!(partial.age_marginals, SyntheticCohortConfig::default().age_marginals);
    }
}
