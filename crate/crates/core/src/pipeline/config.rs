use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cohort::SyntheticCohortConfig;
use crate::error::{Error, Result};
use crate::learners::LearnerConfig;
use crate::matrix::hex_prefix;
use crate::mitigation::{EgParams, FairnessConstraint, ThresholdObjective, DEFAULT_EPSILON};
use crate::tabular::Sex;

/// Where the admissions come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CohortSource {
    /// Generate from an inline configuration. Its seed is replaced by the
    /// run's master seed.
    Synthetic { config: Box<SyntheticCohortConfig> },
    /// Generate from a cohort configuration file.
    CohortConfig { path: PathBuf },
    /// Read an admissions CSV.
    Admissions { path: PathBuf },
}

impl Default for CohortSource {
    fn default() -> Self {
        CohortSource::Synthetic { config: Box::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SexFilter {
    Male,
    Female,
    #[default]
    BothSeparately,
}

impl SexFilter {
    pub fn sexes(self) -> Vec<Sex> {
        match self {
            SexFilter::Male => vec![Sex::Male],
            SexFilter::Female => vec![Sex::Female],
            SexFilter::BothSeparately => vec![Sex::Male, Sex::Female],
        }
    }
}

impl std::str::FromStr for SexFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(SexFilter::Male),
            "female" | "f" => Ok(SexFilter::Female),
            "both" | "both-separately" | "both_separately" => Ok(SexFilter::BothSeparately),
            other => Err(Error::Config(format!("unknown sex filter {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MitigationSettings {
    pub epsilon: f64,
    pub eg: EgParams,
    /// Base learner of the exponentiated-gradient iterates.
    pub eg_learner: LearnerConfig,
    pub threshold: ThresholdObjective,
    /// Share of the balanced training split held out to fit thresholds.
    pub calibration_fraction: f64,
}

impl Default for MitigationSettings {
    fn default() -> Self {
        MitigationSettings {
            epsilon: DEFAULT_EPSILON,
            eg: EgParams::default(),
            eg_learner: LearnerConfig::logreg(),
            threshold: ThresholdObjective::default(),
            calibration_fraction: 0.5,
        }
    }
}

impl MitigationSettings {
    pub fn validate(&self) -> Result<()> {
        FairnessConstraint::fnr_parity::<&str>(self.epsilon, &[])?;
        self.eg.validate()?;
        self.eg_learner.validate()?;
        if !(self.calibration_fraction > 0.0 && self.calibration_fraction < 1.0) {
            return Err(Error::Config("calibration_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub cohort: CohortSource,
    pub sex: SexFilter,
    /// Pins the LOS threshold instead of computing it from the data.
    pub psi: Option<u32>,
    pub learner: LearnerConfig,
    pub mitigation: Option<MitigationSettings>,
    pub train_fraction: f64,
    pub repeats: usize,
    pub seed: u64,
    /// Not part of the configuration hash.
    pub out_dir: PathBuf,
    pub plots: bool,
    /// Write the encoded splits and fitted models next to the report.
    pub persist_artifacts: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cohort: CohortSource::default(),
            sex: SexFilter::default(),
            psi: None,
            learner: LearnerConfig::forest(),
            mitigation: None,
            train_fraction: 0.5,
            repeats: 10,
            seed: 42,
            out_dir: PathBuf::from("fairlos-out"),
            plots: true,
            persist_artifacts: true,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats < 1 {
            return Err(Error::Config("repeat count must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
        }
        if self.psi == Some(0) {
            return Err(Error::Config("psi must be at least 1 day".into()));
        }
        self.learner.validate()?;
        if let Some(m) = &self.mitigation {
            m.validate()?;
        }
        match &self.cohort {
            CohortSource::Synthetic { config } => config.validate()?,
            CohortSource::CohortConfig { path } | CohortSource::Admissions { path } => {
                if !path.is_file() {
                    return Err(Error::Config(format!("{} does not exist", path.display())));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the configuration's JSON form, ignoring the output directory.
    pub fn config_hash(&self) -> String {
        let hashed = RunConfig {
            out_dir: PathBuf::new(),
            ..self.clone()
        };
        let json = serde_json::to_string(&hashed).expect("run configs serialise");
        hex_prefix(&Sha256::digest(json.as_bytes()), 32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_output_directory() {
        let a = RunConfig::default();
        let b = RunConfig {
            out_dir: "elsewhere".into(),
            ..RunConfig::default()
        };
        let c = RunConfig {
            seed: 7,
            ..RunConfig::default()
        };
        assert_eq!(a.config_hash(), b.config_hash());
        assert_ne!(a.config_hash(), c.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"sex": "male", "repeats": 3}"#).unwrap();
        assert_eq!(cfg.sex, SexFilter::Male);
        assert_eq!(cfg.repeats, 3);
        assert_eq!(cfg.learner, LearnerConfig::forest());
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_zero_repeats_and_missing_paths() {
        assert!(RunConfig {
            repeats: 0,
            ..RunConfig::default()
        }
        .validate()
        .is_err());
        let missing = RunConfig {
            cohort: CohortSource::Admissions {
                path: "/nonexistent/admissions.csv".into(),
            },
            ..RunConfig::default()
        };
        assert!(missing.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }
}
