//! One-hot encoding of admission records into a numeric dataset.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::label::derive_los_class;
use super::normalize::NormalizationParams;
use super::record::{condition_column, AdmissionRecord, AgeGroup, BmiCategory, Tristate, LTC_NAMES};
use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, SchemaFingerprint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariableKind {
    /// Expanded into one column per declared category.
    Categorical { categories: Vec<String> },
    /// A 0/1 flag kept as a single column.
    Binary,
    /// A count passed through unchanged (later z-scored).
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: VariableKind,
}

/// Which record variables become model inputs, and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaSpec {
    pub variables: Vec<VariableSpec>,
}

fn categorical(name: &str, labels: Vec<&str>) -> VariableSpec {
    VariableSpec {
        name: name.into(),
        kind: VariableKind::Categorical {
            categories: labels.into_iter().map(String::from).collect(),
        },
    }
}

fn simple(name: &str, kind: VariableKind) -> VariableSpec {
    VariableSpec {
        name: name.into(),
        kind,
    }
}

pub const NUMERIC_INPUTS: [&str; 11] = [
    "NUM_PRVADMISSION_1YR",
    "NUM_PRVEPISODES_1YR",
    "NUM_PRVCOMORBID_1YR",
    "NUM_PRVADMISSION_3YR",
    "NUM_PRVEPISODES_3YR",
    "NUM_PRVCOMORBID_3YR",
    "NUM_PRVHOSPITAL_DAYS_1YR",
    "NUM_PRVHOSPITAL_DAYS_3YR",
    "TOTAL_COMORBIDITY",
    "NUMEPISODES_24HRS",
    "NUMCOMORBIDITIES_24HRS",
];

impl SchemaSpec {
    /// The model inputs of the LOS study: lifestyle, prior hospitalisation,
    /// medication, first-24-hour admission data, condition flags, and age group.
    /// Ethnic group and deprivation are kept out of the inputs and used only
    /// for auditing.
    pub fn los_inputs() -> Self {
        let mut v = vec![
            categorical("BMI", BmiCategory::labels()),
            categorical("SMOKING_HISTORY", Tristate::labels()),
            categorical("ALCOHOL_HISTORY", Tristate::labels()),
            categorical("PHYSICAL", Tristate::labels()),
            simple("AUTISM", VariableKind::Binary),
        ];
        for name in &NUMERIC_INPUTS[..8] {
            v.push(simple(name, VariableKind::Numeric));
        }
        v.push(simple("MEDICATIONS", VariableKind::Binary));
        for name in &NUMERIC_INPUTS[8..] {
            v.push(simple(name, VariableKind::Numeric));
        }
        for name in LTC_NAMES {
            v.push(simple(&condition_column(name), VariableKind::Binary));
        }
        v.push(categorical("AGEGRP_AT_ADMIS_DT", AgeGroup::labels()));
        SchemaSpec { variables: v }
    }
}

impl Default for SchemaSpec {
    fn default() -> Self {
        SchemaSpec::los_inputs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    OneHot,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub kind: ColumnKind,
}

enum RawValue {
    Category(&'static str),
    Flag(bool),
    Number(u32),
}

/// Index into `LTC_NAMES` of a condition column name.
fn condition_of(variable: &str) -> Option<usize> {
    LTC_NAMES.iter().position(|n| condition_column(n) == variable)
}

fn raw_value(record: &AdmissionRecord, variable: &str, condition: Option<usize>) -> Result<RawValue> {
    use RawValue::*;
    let p = &record.prior;
    Ok(match variable {
        "SEX" => Category(record.sex.label()),
        "AGEGRP_AT_ADMIS_DT" => Category(record.age_group.label()),
        "ETHNIC_GROUP" => Category(record.ethnic_group.label()),
        "WIMD" => Category(record.wimd.label()),
        "BMI" => Category(record.bmi.label()),
        "SMOKING_HISTORY" => Category(record.smoking_history.label()),
        "ALCOHOL_HISTORY" => Category(record.alcohol_history.label()),
        "PHYSICAL" => Category(record.physical.label()),
        "AUTISM" => Flag(record.autism),
        "MEDICATIONS" => Flag(record.medications),
        "NUM_PRVADMISSION_1YR" => Number(p.admissions_1yr),
        "NUM_PRVEPISODES_1YR" => Number(p.episodes_1yr),
        "NUM_PRVCOMORBID_1YR" => Number(p.comorbid_1yr),
        "NUM_PRVADMISSION_3YR" => Number(p.admissions_3yr),
        "NUM_PRVEPISODES_3YR" => Number(p.episodes_3yr),
        "NUM_PRVCOMORBID_3YR" => Number(p.comorbid_3yr),
        "NUM_PRVHOSPITAL_DAYS_1YR" => Number(p.hospital_days_1yr),
        "NUM_PRVHOSPITAL_DAYS_3YR" => Number(p.hospital_days_3yr),
        "TOTAL_COMORBIDITY" => Number(record.total_comorbidity),
        "NUMEPISODES_24HRS" => Number(record.numepisodes_24hrs),
        "NUMCOMORBIDITIES_24HRS" => Number(record.numcomorbidities_24hrs),
        other => {
            let idx = condition.ok_or_else(|| Error::SchemaViolation(format!("unknown variable {other}")))?;
            let flag = record.cond_flags.get(idx).copied().ok_or_else(|| {
                Error::InvalidRecord(format!("{}: cond_flags too short for {other}", record.admission_id))
            })?;
            Flag(flag)
        }
    })
}

/// Numeric dataset ready for the learners.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    pub features: FeatureMatrix,
    pub labels: Vec<u8>,
    /// Ethnic group of each row, used for auditing only.
    pub groups: Vec<String>,
    pub schema: Vec<ColumnSpec>,
    pub normalization: Option<NormalizationParams>,
    pub seed: Option<u64>,
}

impl EncodedDataset {
    pub fn new(features: FeatureMatrix, labels: Vec<u8>, groups: Vec<String>, schema: Vec<ColumnSpec>) -> Result<Self> {
        if schema.len() != features.n_cols() {
            return Err(Error::SchemaViolation(format!(
                "schema has {} columns, matrix has {}",
                schema.len(),
                features.n_cols()
            )));
        }
        if labels.len() != features.n_rows() || groups.len() != features.n_rows() {
            return Err(Error::InvalidInput(format!(
                "{} rows but {} labels and {} groups",
                features.n_rows(),
                labels.len(),
                groups.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidInput(format!("label {bad} is not binary")));
        }
        let names: Vec<&str> = schema.iter().map(|c| c.name.as_str()).collect();
        let features = features.with_fingerprint(SchemaFingerprint::from_names(&names));
        Ok(EncodedDataset {
            features,
            labels,
            groups,
            schema,
            normalization: None,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.schema.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn numeric_columns(&self) -> Vec<usize> {
        self.schema
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == ColumnKind::Numeric)
            .map(|(i, _)| i)
            .collect()
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> EncodedDataset {
        EncodedDataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            groups: indices.iter().map(|&i| self.groups[i].clone()).collect(),
            schema: self.schema.clone(),
            normalization: self.normalization.clone(),
            seed: self.seed,
        }
    }

    /// Column ranges of each one-hot block, keyed by source variable.
    pub fn one_hot_blocks(&self) -> Vec<(String, Vec<usize>)> {
        let mut blocks: Vec<(String, Vec<usize>)> = Vec::new();
        for (i, c) in self.schema.iter().enumerate() {
            if c.kind != ColumnKind::OneHot {
                continue;
            }
            match blocks.last_mut() {
                Some((src, cols)) if *src == c.source => cols.push(i),
                _ => blocks.push((c.source.clone(), vec![i])),
            }
        }
        blocks
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.column_names();
        header.push(LABEL_COLUMN);
        header.push(GROUP_COLUMN);
        w.write_record(&header)?;
        for (i, row) in self.features.rows().enumerate() {
            let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            cells.push(self.labels[i].to_string());
            cells.push(self.groups[i].clone());
            w.write_record(&cells)?;
        }
        w.flush().map_err(|e| Error::io("<encoded csv>", e))?;
        Ok(())
    }

    pub fn sidecar(&self) -> DatasetSidecar {
        DatasetSidecar {
            format_version: SIDECAR_VERSION,
            fingerprint: self.features.fingerprint().clone(),
            schema: self.schema.clone(),
            normalization: self.normalization.clone(),
            seed: self.seed,
            label_column: LABEL_COLUMN.into(),
            group_column: GROUP_COLUMN.into(),
        }
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let csv_path = dir.join(format!("{stem}.csv"));
        let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(std::io::BufWriter::new(file))?;
        let json_path = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(&self.sidecar())?;
        std::fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
        Ok(())
    }

    pub fn load(csv_path: &Path, json_path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(json_path).map_err(|e| Error::io(json_path, e))?;
        let sidecar: DatasetSidecar = serde_json::from_str(&text)?;
        let file = std::fs::File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
        Self::read(std::io::BufReader::new(file), sidecar)
    }

    pub fn read<R: Read>(input: R, sidecar: DatasetSidecar) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        let n_cols = sidecar.schema.len();
        if headers.len() != n_cols + 2 {
            return Err(Error::SchemaViolation(format!(
                "encoded CSV has {} columns, sidecar declares {}",
                headers.len(),
                n_cols + 2
            )));
        }
        for (h, c) in headers.iter().zip(&sidecar.schema) {
            if h != c.name {
                return Err(Error::SchemaViolation(format!(
                    "encoded CSV column {h} does not match sidecar column {}",
                    c.name
                )));
            }
        }
        let mut data = Vec::new();
        let mut labels = Vec::new();
        let mut groups = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            for j in 0..n_cols {
                let v: f64 = rec[j]
                    .parse()
                    .map_err(|_| Error::InvalidRecord(format!("non-numeric feature {:?}", &rec[j])))?;
                data.push(v);
            }
            labels.push(
                rec[n_cols]
                    .parse::<u8>()
                    .map_err(|_| Error::InvalidRecord(format!("bad label {:?}", &rec[n_cols])))?,
            );
            groups.push(rec[n_cols + 1].to_string());
        }
        let features = FeatureMatrix::new(labels.len(), n_cols, data)?;
        let mut ds = EncodedDataset::new(features, labels, groups, sidecar.schema)?;
        if ds.features.fingerprint() != &sidecar.fingerprint {
            return Err(Error::SchemaMismatch {
                expected: sidecar.fingerprint.0,
                found: ds.features.fingerprint().0.clone(),
            });
        }
        ds.normalization = sidecar.normalization;
        ds.seed = sidecar.seed;
        Ok(ds)
    }
}

pub const LABEL_COLUMN: &str = "LOS_CLASS";
pub const GROUP_COLUMN: &str = "ETHNIC_GROUP";
const SIDECAR_VERSION: u32 = 1;

/// JSON document stored next to an encoded-features CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub format_version: u32,
    pub fingerprint: SchemaFingerprint,
    pub schema: Vec<ColumnSpec>,
    pub normalization: Option<NormalizationParams>,
    pub seed: Option<u64>,
    pub label_column: String,
    pub group_column: String,
}

/// Builds the column layout for a schema spec.
pub fn column_schema(spec: &SchemaSpec) -> Vec<ColumnSpec> {
    let mut out = Vec::new();
    for var in &spec.variables {
        match &var.kind {
            VariableKind::Categorical { categories } => {
                for cat in categories {
                    out.push(ColumnSpec {
                        name: format!("{}_{cat}", var.name),
                        source: var.name.clone(),
                        category: Some(cat.clone()),
                        kind: ColumnKind::OneHot,
                    });
                }
            }
            VariableKind::Binary => out.push(ColumnSpec {
                name: var.name.clone(),
                source: var.name.clone(),
                category: None,
                kind: ColumnKind::Binary,
            }),
            VariableKind::Numeric => out.push(ColumnSpec {
                name: var.name.clone(),
                source: var.name.clone(),
                category: None,
                kind: ColumnKind::Numeric,
            }),
        }
    }
    out
}

/// Encodes records into numeric features, deriving labels at `psi` days.
pub fn encode_one_hot(records: &[AdmissionRecord], spec: &SchemaSpec, psi: u32) -> Result<EncodedDataset> {
    let schema = column_schema(spec);
    let n_cols = schema.len();
    let mut data = Vec::with_capacity(records.len() * n_cols);
    let mut labels = Vec::with_capacity(records.len());
    let mut groups = Vec::with_capacity(records.len());

    let conditions: Vec<Option<usize>> = spec.variables.iter().map(|v| condition_of(&v.name)).collect();
    for record in records {
        for (var, &condition) in spec.variables.iter().zip(&conditions) {
            let value = raw_value(record, &var.name, condition)?;
            match (&var.kind, value) {
                (VariableKind::Categorical { categories }, RawValue::Category(cat)) => {
                    let hot = categories.iter().position(|c| c == cat).ok_or_else(|| {
                        Error::SchemaViolation(format!(
                            "{}: {} value {cat:?} not among declared categories {categories:?}",
                            record.admission_id, var.name
                        ))
                    })?;
                    data.extend((0..categories.len()).map(|k| if k == hot { 1.0 } else { 0.0 }));
                }
                (VariableKind::Binary, RawValue::Flag(b)) => data.push(if b { 1.0 } else { 0.0 }),
                (VariableKind::Numeric, RawValue::Number(n)) => data.push(f64::from(n)),
                (kind, _) => {
                    return Err(Error::SchemaViolation(format!(
                        "variable {} cannot be encoded as {kind:?}",
                        var.name
                    )))
                }
            }
        }
        labels.push(derive_los_class(i64::from(record.los_days), psi)?);
        groups.push(record.ethnic_group.label().to_string());
    }

    let features = FeatureMatrix::new(records.len(), n_cols, data)?;
    EncodedDataset::new(features, labels, groups, schema)
}
