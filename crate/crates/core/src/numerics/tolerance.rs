use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thresholds used whenever a numerical predicate (Hermitian, PSD, rank,
/// equality) is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Entrywise equality threshold.
    pub abs_eq: f64,
    /// Most negative eigenvalue still accepted as positive semidefinite.
    pub psd_floor: f64,
    /// Relative eigenvalue / singular value cutoff for null-space truncation.
    pub rank_cut: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs_eq: 1e-9,
            psd_floor: 1e-9,
            rank_cut: 1e-10,
        }
    }
}

impl Tolerance {
    pub fn new(abs_eq: f64, psd_floor: f64, rank_cut: f64) -> Result<Self> {
        let tol = Self {
            abs_eq,
            psd_floor,
            rank_cut,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("abs_eq", self.abs_eq),
            ("psd_floor", self.psd_floor),
            ("rank_cut", self.rank_cut),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidTolerance(format!(
                    "{name} must be finite and strictly positive, got {value}"
                )));
            }
        }
        if self.psd_floor > self.abs_eq {
            return Err(Error::InvalidTolerance(format!(
                "psd_floor ({}) must not exceed abs_eq ({})",
                self.psd_floor, self.abs_eq
            )));
        }
        Ok(())
    }

    /// Same policy with `abs_eq` and `psd_floor` multiplied by `factor`.
    pub fn loosened(&self, factor: f64) -> Self {
        Self {
            abs_eq: self.abs_eq * factor,
            psd_floor: self.psd_floor * factor,
            rank_cut: self.rank_cut,
        }
    }
}
