use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMetric {
    #[default]
    FnrParity,
}

/// Bounds the spread of a per-group rate by `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessConstraint {
    pub metric: ConstraintMetric,
    pub epsilon: f64,
    pub groups: BTreeSet<String>,
}

pub const DEFAULT_EPSILON: f64 = 0.2;

impl FairnessConstraint {
    pub fn fnr_parity<S: AsRef<str>>(epsilon: f64, groups: &[S]) -> Result<Self> {
        let c = FairnessConstraint {
            metric: ConstraintMetric::FnrParity,
            epsilon,
            groups: groups.iter().map(|g| g.as_ref().to_string()).collect(),
        };
        c.validate()?;
        Ok(c)
    }

    /// Strict validation. A bound of 1 or more can never bind on a rate; the
    /// fitting code accepts such bounds through [`FairnessConstraint::unchecked`].
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!(
                "fairness bound epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Builds a constraint with any positive bound.
    pub fn unchecked<S: AsRef<str>>(epsilon: f64, groups: &[S]) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(FairnessConstraint {
            metric: ConstraintMetric::FnrParity,
            epsilon,
            groups: groups.iter().map(|g| g.as_ref().to_string()).collect(),
        })
    }

    /// Ordered pairs `(g, h)` of distinct groups; each carries the constraint
    /// `rate(g) - rate(h) <= epsilon`.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for g in &self.groups {
            for h in &self.groups {
                if g != h {
                    out.push((g.clone(), h.clone()));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        assert!(FairnessConstraint::fnr_parity(0.2, &["a", "b"]).is_ok());
        assert!(FairnessConstraint::fnr_parity(0.0, &["a"]).is_err());
        assert!(FairnessConstraint::fnr_parity(1.0, &["a"]).is_err());
        assert!(FairnessConstraint::unchecked(1.5, &["a"]).is_ok());
    }

    #[test]
    fn pairs_are_ordered_and_distinct() {
        let c = FairnessConstraint::fnr_parity(0.2, &["b", "a", "c", "a"]).unwrap();
        let p = c.pairs();
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], ("a".to_string(), "b".to_string()));
    }
}
