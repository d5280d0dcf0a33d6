use crate::error::{Error, Result};

/// Binary length-of-stay class: 1 iff the stay lasted at least `psi` days.
pub fn derive_los_class(los_days: i64, psi: u32) -> Result<u8> {
    if los_days < 0 {
        return Err(Error::InvalidRecord(format!("negative length of stay {los_days}")));
    }
    if psi < 1 {
        return Err(Error::InvalidInput("LOS threshold must be at least 1 day".into()));
    }
    Ok(u8::from(los_days >= i64::from(psi)))
}

/// Fraction of admissions labelled long stay.
pub fn long_stay_rate(labels: &[u8]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::UndefinedRate("long-stay rate of zero admissions".into()));
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    Ok(ones as f64 / labels.len() as f64)
}
