//! The admission data model and the admissions CSV format.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declares a closed categorical variable with fixed textual labels.
macro_rules! category {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }

            pub fn labels() -> Vec<&'static str> {
                Self::ALL.iter().map(|c| c.label()).collect()
            }

            pub fn index(self) -> usize {
                Self::ALL.iter().position(|c| *c == self).unwrap()
            }
        }

        impl std::str::FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let s = s.trim();
                Self::ALL
                    .iter()
                    .copied()
                    .find(|c| c.label() == s)
                    .ok_or_else(|| Error::SchemaViolation(format!(
                        "{:?} is not a {} category (expected one of {:?})",
                        s,
                        stringify!($name),
                        Self::labels()
                    )))
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.label())
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(self.label())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

category!(Sex { Male => "Male", Female => "Female" });

category!(AgeGroup {
    Under30 => "<30",
    From30To39 => "30-39",
    From40To49 => "40-49",
    From50To59 => "50-59",
    From60To69 => "60-69",
    From70To79 => "70-79",
    Over80 => "80+",
});

category!(EthnicGroup {
    Asian => "Asian",
    Black => "Black",
    Other => "Other",
    Unknown => "Unknown",
    White => "White",
});

category!(
    /// Welsh Index of Multiple Deprivation quintile; 1 is most deprived.
    Wimd {
        Q1 => "1",
        Q2 => "2",
        Q3 => "3",
        Q4 => "4",
        Q5 => "5",
        Unknown => "Unknown",
    }
);

category!(BmiCategory {
    Underweight => "underweight",
    Normal => "normal",
    PreObesity => "pre-obesity",
    ObesityI => "obesity-I",
    ObesityIII => "obesity-III",
    Unknown => "Unknown",
});

category!(
    /// Lifestyle history answer where a missing record maps to `Unknown`.
    Tristate { Yes => "Yes", No => "No", Unknown => "Unknown" }
);

/// The 39 long-term conditions, in canonical order.
pub const LTC_NAMES: [&str; 39] = [
    "ANAEMIA",
    "BARRETTS OESOPHAGUS",
    "BRONCHIECTASIS",
    "CANCER",
    "CARDIAC ARRHYTHMIAS",
    "CEREBRAL PALSY",
    "CHRONIC CONSTIPATION",
    "CHRONIC DIARRHOEA",
    "CHRONIC AIRWAY DISEASES",
    "CHRONIC ARTHRITIS",
    "CHRONIC PAIN CONDITIONS",
    "CHRONIC PNEUMONIA",
    "CIRRHOSIS",
    "CHRONIC KIDNEY DISEASE",
    "CORONARY HEART DISEASE",
    "DEMENTIA",
    "DIABETES",
    "DYSPHAGIA",
    "EPILEPSY",
    "HEARING LOSS",
    "HEART FAILURE",
    "HYPERTENSION",
    "IBD",
    "INSOMNIA",
    "INTERSTITIAL LUNG DISEASE",
    "MENOPAUSAL AND PRE-MENOPAUSAL",
    "MENTAL ILLNESS",
    "MS",
    "NEUROPATHIC PAIN",
    "OSTEOPOROSIS",
    "PARKINSONS",
    "POLYCYSTIC OVARY SYNDROME",
    "PSORIASIS",
    "PVD",
    "REFLUX DISORDERS",
    "STROKE",
    "THYROID DISORDERS",
    "TOURETTE",
    "VISUAL IMPAIRMENT",
];

pub const N_CONDITIONS: usize = LTC_NAMES.len();

/// Largest admissible total comorbidity count.
pub const MAX_TOTAL_COMORBIDITY: u32 = 21;

/// CSV column name for a condition flag, e.g. `COND_CHRONIC_KIDNEY_DISEASE`.
pub fn condition_column(name: &str) -> String {
    let body: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    format!("COND_{body}")
}

pub fn condition_index(name: &str) -> Option<usize> {
    LTC_NAMES.iter().position(|n| *n == name)
}

/// Prior-hospitalisation counts over the 1- and 3-year look-back windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PriorCounts {
    pub admissions_1yr: u32,
    pub admissions_3yr: u32,
    pub episodes_1yr: u32,
    pub episodes_3yr: u32,
    pub comorbid_1yr: u32,
    pub comorbid_3yr: u32,
    pub hospital_days_1yr: u32,
    pub hospital_days_3yr: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionRecord {
    pub admission_id: String,
    pub patient_id: String,
    pub sex: Sex,
    pub age_group: AgeGroup,
    pub ethnic_group: EthnicGroup,
    pub wimd: Wimd,
    pub bmi: BmiCategory,
    pub smoking_history: Tristate,
    pub alcohol_history: Tristate,
    pub physical: Tristate,
    pub autism: bool,
    pub medications: bool,
    pub prior: PriorCounts,
    pub total_comorbidity: u32,
    pub numepisodes_24hrs: u32,
    pub numcomorbidities_24hrs: u32,
    pub cond_flags: Vec<bool>,
    pub los_days: u32,
}

/// One broken invariant on one record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantViolation {
    pub admission_id: String,
    pub message: String,
}

impl AdmissionRecord {
    /// Lists every invariant this record breaks; empty when the record is valid.
    pub fn violations(&self) -> Vec<InvariantViolation> {
        let mut out = Vec::new();
        let mut flag = |message: String| {
            out.push(InvariantViolation {
                admission_id: self.admission_id.clone(),
                message,
            })
        };
        let p = &self.prior;
        for (name, short, long) in [
            ("admissions", p.admissions_1yr, p.admissions_3yr),
            ("episodes", p.episodes_1yr, p.episodes_3yr),
            ("comorbid", p.comorbid_1yr, p.comorbid_3yr),
            ("hospital_days", p.hospital_days_1yr, p.hospital_days_3yr),
        ] {
            if short > long {
                flag(format!("prior {name}: 1yr count {short} exceeds 3yr count {long}"));
            }
        }
        if self.total_comorbidity < 1 || self.total_comorbidity > MAX_TOTAL_COMORBIDITY {
            flag(format!(
                "total_comorbidity {} outside 1..={MAX_TOTAL_COMORBIDITY}",
                self.total_comorbidity
            ));
        }
        if self.numcomorbidities_24hrs > self.total_comorbidity {
            flag(format!(
                "numcomorbidities_24hrs {} exceeds total_comorbidity {}",
                self.numcomorbidities_24hrs, self.total_comorbidity
            ));
        }
        if self.cond_flags.len() != N_CONDITIONS {
            flag(format!(
                "cond_flags has {} entries, expected {N_CONDITIONS}",
                self.cond_flags.len()
            ));
        }
        out
    }

    pub fn condition(&self, name: &str) -> Option<bool> {
        condition_index(name).and_then(|i| self.cond_flags.get(i).copied())
    }
}

/// Non-condition columns of the admissions CSV, in file order.
pub const BASE_COLUMNS: [&str; 23] = [
    "ADMISSION_ID",
    "PATIENT_ID",
    "SEX",
    "AGEGRP_AT_ADMIS_DT",
    "ETHNIC_GROUP",
    "WIMD",
    "BMI",
    "SMOKING_HISTORY",
    "ALCOHOL_HISTORY",
    "PHYSICAL",
    "AUTISM",
    "NUM_PRVADMISSION_1YR",
    "NUM_PRVEPISODES_1YR",
    "NUM_PRVCOMORBID_1YR",
    "NUM_PRVADMISSION_3YR",
    "NUM_PRVEPISODES_3YR",
    "NUM_PRVCOMORBID_3YR",
    "NUM_PRVHOSPITAL_DAYS_1YR",
    "NUM_PRVHOSPITAL_DAYS_3YR",
    "MEDICATIONS",
    "TOTAL_COMORBIDITY",
    "NUMEPISODES_24HRS",
    "NUMCOMORBIDITIES_24HRS",
];

pub const LOS_COLUMN: &str = "LOS_DAYS";

pub fn csv_header() -> Vec<String> {
    BASE_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(LTC_NAMES.iter().map(|n| condition_column(n)))
        .chain(std::iter::once(LOS_COLUMN.to_string()))
        .collect()
}

fn flag_str(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_admissions_csv<W: Write>(records: &[AdmissionRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header())?;
    for r in records {
        let p = &r.prior;
        let mut row: Vec<String> = vec![
            r.admission_id.clone(),
            r.patient_id.clone(),
            r.sex.to_string(),
            r.age_group.to_string(),
            r.ethnic_group.to_string(),
            r.wimd.to_string(),
            r.bmi.to_string(),
            r.smoking_history.to_string(),
            r.alcohol_history.to_string(),
            r.physical.to_string(),
            flag_str(r.autism).into(),
            p.admissions_1yr.to_string(),
            p.episodes_1yr.to_string(),
            p.comorbid_1yr.to_string(),
            p.admissions_3yr.to_string(),
            p.episodes_3yr.to_string(),
            p.comorbid_3yr.to_string(),
            p.hospital_days_1yr.to_string(),
            p.hospital_days_3yr.to_string(),
            flag_str(r.medications).into(),
            r.total_comorbidity.to_string(),
            r.numepisodes_24hrs.to_string(),
            r.numcomorbidities_24hrs.to_string(),
        ];
        row.extend(r.cond_flags.iter().map(|&b| flag_str(b).to_string()));
        row.push(r.los_days.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<admissions csv>", e))?;
    Ok(())
}

struct RowReader<'a> {
    record: &'a csv::StringRecord,
    columns: &'a [usize],
    line: u64,
}

impl RowReader<'_> {
    fn text(&self, slot: usize) -> &str {
        self.record.get(self.columns[slot]).unwrap_or("").trim()
    }

    fn category<T: std::str::FromStr<Err = Error>>(&self, slot: usize) -> Result<T> {
        let raw = self.text(slot);
        // Missing categorical values fall into the declared Unknown category.
        let raw = if raw.is_empty() { "Unknown" } else { raw };
        raw.parse()
            .map_err(|e| Error::SchemaViolation(format!("line {}: {e}", self.line)))
    }

    fn count(&self, slot: usize, header: &str) -> Result<u32> {
        let raw = self.text(slot);
        if raw.is_empty() {
            return Err(Error::InvalidRecord(format!(
                "line {}: missing numeric value for {header}",
                self.line
            )));
        }
        raw.parse::<u32>().map_err(|_| {
            Error::InvalidRecord(format!(
                "line {}: {header} must be a non-negative integer, got {raw:?}",
                self.line
            ))
        })
    }

    fn flag(&self, slot: usize, header: &str) -> Result<bool> {
        match self.text(slot) {
            "1" | "Yes" => Ok(true),
            "0" | "No" => Ok(false),
            "" => Err(Error::InvalidRecord(format!(
                "line {}: missing flag value for {header}",
                self.line
            ))),
            other => Err(Error::SchemaViolation(format!(
                "line {}: {header} must be 0/1, got {other:?}",
                self.line
            ))),
        }
    }
}

/// Reads the admissions CSV. Columns are matched by header name, so column
/// order in the file is free; every expected header must be present.
pub fn read_admissions_csv<R: Read>(input: R) -> Result<Vec<AdmissionRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let expected = csv_header();
    let mut columns = Vec::with_capacity(expected.len());
    for name in &expected {
        let pos = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::SchemaViolation(format!("admissions CSV is missing column {name}")))?;
        columns.push(pos);
    }

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let r = RowReader {
            record: &rec,
            columns: &columns,
            line: i as u64 + 2,
        };
        let los_raw = r.text(expected.len() - 1);
        if los_raw.starts_with('-') {
            return Err(Error::InvalidRecord(format!(
                "line {}: negative length of stay {los_raw}",
                r.line
            )));
        }
        let mut cond_flags = Vec::with_capacity(N_CONDITIONS);
        for k in 0..N_CONDITIONS {
            let slot = BASE_COLUMNS.len() + k;
            cond_flags.push(r.flag(slot, &expected[slot])?);
        }
        let record = AdmissionRecord {
            admission_id: r.text(0).to_string(),
            patient_id: r.text(1).to_string(),
            sex: r.category(2)?,
            age_group: r.category(3)?,
            ethnic_group: r.category(4)?,
            wimd: r.category(5)?,
            bmi: r.category(6)?,
            smoking_history: r.category(7)?,
            alcohol_history: r.category(8)?,
            physical: r.category(9)?,
            autism: r.flag(10, BASE_COLUMNS[10])?,
            prior: PriorCounts {
                admissions_1yr: r.count(11, BASE_COLUMNS[11])?,
                episodes_1yr: r.count(12, BASE_COLUMNS[12])?,
                comorbid_1yr: r.count(13, BASE_COLUMNS[13])?,
                admissions_3yr: r.count(14, BASE_COLUMNS[14])?,
                episodes_3yr: r.count(15, BASE_COLUMNS[15])?,
                comorbid_3yr: r.count(16, BASE_COLUMNS[16])?,
                hospital_days_1yr: r.count(17, BASE_COLUMNS[17])?,
                hospital_days_3yr: r.count(18, BASE_COLUMNS[18])?,
            },
            medications: r.flag(19, BASE_COLUMNS[19])?,
            total_comorbidity: r.count(20, BASE_COLUMNS[20])?,
            numepisodes_24hrs: r.count(21, BASE_COLUMNS[21])?,
            numcomorbidities_24hrs: r.count(22, BASE_COLUMNS[22])?,
            cond_flags,
            los_days: r.count(expected.len() - 1, LOS_COLUMN)?,
        };
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) fn sample_record(id: &str) -> AdmissionRecord {
    AdmissionRecord {
        admission_id: id.to_string(),
        patient_id: "P1".into(),
        sex: Sex::Male,
        age_group: AgeGroup::From40To49,
        ethnic_group: EthnicGroup::White,
        wimd: Wimd::Q2,
        bmi: BmiCategory::Normal,
        smoking_history: Tristate::No,
        alcohol_history: Tristate::Unknown,
        physical: Tristate::Yes,
        autism: false,
        medications: true,
        prior: PriorCounts {
            admissions_1yr: 1,
            admissions_3yr: 2,
            episodes_1yr: 1,
            episodes_3yr: 3,
            comorbid_1yr: 2,
            comorbid_3yr: 4,
            hospital_days_1yr: 5,
            hospital_days_3yr: 9,
        },
        total_comorbidity: 3,
        numepisodes_24hrs: 1,
        numcomorbidities_24hrs: 2,
        cond_flags: {
            let mut f = vec![false; N_CONDITIONS];
            f[18] = true;
            f[16] = true;
            f
        },
        los_days: 4,
    }
}
