use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative thresholds used to turn floating point results into the exact
/// predicates "nonzero", "distinct", "rank" and "equal spectra".
///
/// Every threshold is multiplied by a scale chosen by the consumer
/// (largest eigenvalue modulus, largest singular value, ...).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    pub zero: f64,
    pub distinct: f64,
    pub rank: f64,
    #[serde(rename = "match")]
    pub match_radius: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self { zero: 1e-8, distinct: 1e-6, rank: 1e-9, match_radius: 1e-7 }
    }
}

impl ToleranceConfig {
    pub fn new(zero: f64, distinct: f64, rank: f64, match_radius: f64) -> Result<Self> {
        let t = Self { zero, distinct, rank, match_radius };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("zero", self.zero),
            ("distinct", self.distinct),
            ("rank", self.rank),
            ("match", self.match_radius),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidTolerance(format!("{name} must be positive, got {v}")));
            }
        }
        if self.distinct < self.match_radius {
            return Err(Error::InvalidTolerance(format!(
                "distinct ({}) must be at least match ({})",
                self.distinct, self.match_radius
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ToleranceConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_inverted_radii_and_nonpositive() {
        assert!(ToleranceConfig::new(1e-8, 1e-8, 1e-9, 1e-7).is_err());
        assert!(ToleranceConfig::new(0.0, 1e-6, 1e-9, 1e-7).is_err());
        assert!(ToleranceConfig::new(1e-8, 1e-6, f64::NAN, 1e-7).is_err());
    }

    #[test]
    fn serde_uses_short_names() {
        let s = serde_json::to_string(&ToleranceConfig::default()).unwrap();
        assert!(s.contains("\"match\""));
        let back: ToleranceConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, ToleranceConfig::default());
    }
}
