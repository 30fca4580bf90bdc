use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing miscoverage levels in the open interval (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaGrid {
    values: Vec<f64>,
}

impl GammaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidGrid("grid must not be empty".into()));
        }
        if let Some(v) = values.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::InvalidGrid(format!("value {v} not in (0, 1)")));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(
                "values must be strictly increasing".into(),
            ));
        }
        Ok(Self { values })
    }

    /// `min, min + step, ...` up to `max` inclusive. Values are rounded to 12
    /// decimals so that e.g. `0.07` is the nearest double to 0.07.
    pub fn uniform(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(min <= max) {
            return Err(Error::InvalidGrid(format!(
                "need step > 0 and min <= max (min={min}, max={max}, step={step})"
            )));
        }
        let count = ((max - min) / step + 1e-9).floor() as usize + 1;
        let values = (0..count)
            .map(|i| ((min + i as f64 * step) * 1e12).round() / 1e12)
            .collect();
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

impl Default for GammaGrid {
    /// `{0.01, 0.02, ..., 0.99}`.
    fn default() -> Self {
        Self::uniform(0.01, 0.99, 0.01).expect("default grid is valid")
    }
}
