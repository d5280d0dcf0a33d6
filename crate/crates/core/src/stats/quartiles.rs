//! Quartiles, Tukey whiskers and the LOS threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartileSummary {
    pub n: usize,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub iqr: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
    /// Smallest observation at or above the lower fence.
    pub lower_whisker: f64,
    /// Largest observation at or below the upper fence.
    pub upper_whisker: f64,
    pub outlier_indices: Vec<usize>,
}

/// Quantile of sorted data by linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quartile_summary(values: &[f64]) -> Result<QuartileSummary> {
    if values.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "quartile summary needs at least 4 values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("quartile summary of non-finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q2 = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let lower_fence = q1 - 1.5 * iqr;
    let upper_fence = q3 + 1.5 * iqr;
    let lower_whisker = *sorted.iter().find(|&&v| v >= lower_fence).unwrap_or(&sorted[0]);
    let upper_whisker = *sorted
        .iter()
        .rev()
        .find(|&&v| v <= upper_fence)
        .unwrap_or(&sorted[sorted.len() - 1]);
    let outlier_indices = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v < lower_whisker || v > upper_whisker)
        .map(|(i, _)| i)
        .collect();
    Ok(QuartileSummary {
        n: values.len(),
        q1,
        q2,
        q3,
        iqr,
        lower_fence,
        upper_fence,
        lower_whisker,
        upper_whisker,
        outlier_indices,
    })
}

impl QuartileSummary {
    /// The values of `values` lying between the whiskers.
    pub fn inliers(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .copied()
            .filter(|&v| v >= self.lower_whisker && v <= self.upper_whisker)
            .collect()
    }
}

/// LOS threshold: the ceiling of the mean stay.
pub fn los_threshold_psi(values: &[f64]) -> Result<u32> {
    if values.is_empty() {
        return Err(Error::InsufficientData("mean of zero stays".into()));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if !mean.is_finite() || mean < 0.0 {
        return Err(Error::InvalidInput(format!("mean stay {mean} is not a valid duration")));
    }
    Ok(mean.ceil() as u32)
}

/// Quartile summary of the stays and ψ computed after removing Tukey outliers.
pub fn psi_excluding_outliers(los_days: &[f64]) -> Result<(u32, QuartileSummary)> {
    let summary = quartile_summary(los_days)?;
    let psi = los_threshold_psi(&summary.inliers(los_days))?;
    Ok((psi, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whole_cohort_shape() {
        let v = [0.0, 0.0, 0.0, 1.0, 2.0, 5.0, 7.0, 17.0, 40.0];
        let s = quartile_summary(&v).unwrap();
        assert_eq!((s.q1, s.q2, s.q3, s.iqr), (0.0, 2.0, 7.0, 7.0));
        assert_eq!(s.upper_fence, 17.5);
        assert_eq!(s.upper_whisker, 17.0);
        assert_eq!(s.outlier_indices, vec![8]);
    }

    #[test]
    fn outlier_subset_whisker_on_fence() {
        let v = [18.0, 20.0, 24.0, 30.0, 36.0, 50.0, 66.0, 129.0, 400.0];
        let s = quartile_summary(&v).unwrap();
        assert_eq!((s.q1, s.q2, s.q3, s.iqr), (24.0, 36.0, 66.0, 42.0));
        assert_eq!(s.upper_fence, 129.0);
        assert_eq!(s.upper_whisker, 129.0);
        assert_eq!(s.outlier_indices, vec![8]);
    }

    #[test]
    fn small_sample() {
        let s = quartile_summary(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.q2, 2.5);
        assert_eq!((s.q1, s.q3), (1.75, 3.25));
        assert!(s.outlier_indices.is_empty());
        assert_eq!((s.lower_whisker, s.upper_whisker), (1.0, 4.0));
        assert!(quartile_summary(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn psi_is_ceiling_of_mean() {
        assert_eq!(los_threshold_psi(&[3.015]).unwrap(), 4);
        assert_eq!(los_threshold_psi(&[4.0, 4.0]).unwrap(), 4);
        assert_eq!(los_threshold_psi(&[1.0, 1.0, 2.0]).unwrap(), 2);
        assert!(los_threshold_psi(&[]).is_err());
    }

    #[test]
    fn psi_drops_outliers_first() {
        let v = [0.0, 0.0, 0.0, 1.0, 2.0, 5.0, 7.0, 17.0, 400.0];
        let (psi, s) = psi_excluding_outliers(&v).unwrap();
        assert_eq!(s.outlier_indices, vec![8]);
        assert_eq!(psi, 4);
    }
}
