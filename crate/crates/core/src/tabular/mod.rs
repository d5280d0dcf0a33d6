//! Admission data model and preprocessing.

pub mod encode;
pub mod label;
pub mod normalize;
pub mod record;
pub mod split;

pub use encode::{
    column_schema, encode_one_hot, ColumnKind, ColumnSpec, DatasetSidecar, EncodedDataset, SchemaSpec, VariableKind,
    VariableSpec,
};
pub use label::{derive_los_class, long_stay_rate};
pub use normalize::{zscore_apply, zscore_fit, ColumnStats, NormalizationParams};
pub use record::{
    read_admissions_csv, write_admissions_csv, AdmissionRecord, AgeGroup, BmiCategory, EthnicGroup, PriorCounts, Sex,
    Tristate, Wimd, LTC_NAMES, N_CONDITIONS,
};
pub use split::{downsample_majority, stratified_split};
