//! Z-score normalization of numeric columns.

use serde::{Deserialize, Serialize};

use super::encode::EncodedDataset;
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Mean and population standard deviation of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
    /// Set when the fitted column had zero variance; such columns map to 0.
    pub degenerate: bool,
}

impl ColumnStats {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData(
                "cannot fit z-score parameters on an empty column".into(),
            ));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        let degenerate = std <= 1e-12 * mean.abs().max(1.0);
        Ok(ColumnStats { mean, std, degenerate })
    }

    #[inline]
    pub fn apply(&self, value: f64) -> f64 {
        if self.degenerate {
            0.0
        } else {
            (value - self.mean) / self.std
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnNormalization {
    pub column: usize,
    pub name: String,
    #[serde(flatten)]
    pub stats: ColumnStats,
}

/// Per-column parameters fitted on the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub columns: Vec<ColumnNormalization>,
}

impl NormalizationParams {
    pub fn degenerate_columns(&self) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|c| c.stats.degenerate)
            .map(|c| c.name.as_str())
            .collect()
    }
}

/// Fits parameters for the given columns of `matrix`.
pub fn zscore_fit_matrix(matrix: &FeatureMatrix, columns: &[usize], names: &[&str]) -> Result<NormalizationParams> {
    let mut out = Vec::with_capacity(columns.len());
    for &c in columns {
        if c >= matrix.n_cols() {
            return Err(Error::InvalidInput(format!("column {c} out of range")));
        }
        let stats = ColumnStats::fit(&matrix.column(c))?;
        let name = names.get(c).copied().unwrap_or("").to_string();
        if stats.degenerate {
            log::warn!("column {name} (#{c}) has zero variance; normalized to zeros");
        }
        out.push(ColumnNormalization { column: c, name, stats });
    }
    Ok(NormalizationParams { columns: out })
}

pub fn zscore_apply_matrix(matrix: &mut FeatureMatrix, params: &NormalizationParams) -> Result<()> {
    for col in &params.columns {
        if col.column >= matrix.n_cols() {
            return Err(Error::SchemaViolation(format!(
                "normalized column {} outside a {}-column matrix",
                col.column,
                matrix.n_cols()
            )));
        }
        for r in 0..matrix.n_rows() {
            let v = matrix.get(r, col.column);
            matrix.set(r, col.column, col.stats.apply(v));
        }
    }
    Ok(())
}

/// Fits on the numeric columns of a (training) dataset.
pub fn zscore_fit(train: &EncodedDataset) -> Result<NormalizationParams> {
    zscore_fit_matrix(&train.features, &train.numeric_columns(), &train.column_names())
}

/// Returns a copy of `data` with the fitted parameters applied and recorded.
pub fn zscore_apply(data: &EncodedDataset, params: &NormalizationParams) -> Result<EncodedDataset> {
    if data.normalization.is_some() {
        return Err(Error::InvalidInput("dataset is already normalized".into()));
    }
    for col in &params.columns {
        match data.schema.get(col.column) {
            Some(spec) if spec.name == col.name => {}
            _ => {
                return Err(Error::SchemaViolation(format!(
                    "normalization column {} ({}) not found in dataset schema",
                    col.column, col.name
                )))
            }
        }
    }
    let mut out = data.clone();
    zscore_apply_matrix(&mut out.features, params)?;
    out.normalization = Some(params.clone());
    Ok(out)
}
