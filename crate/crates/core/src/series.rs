use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Normalized autocorrelation function on a uniform lag grid.
///
/// `values[j]` is C(j·step)/C(0); `variance` carries C(0) in squared
/// return-rate units.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfSeries {
    pub step: f64,
    pub values: Vec<f64>,
    pub variance: f64,
}

impl AcfSeries {
    pub fn new(step: f64, values: Vec<f64>, variance: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Input(alloc::format!(
                "lag step must be positive, got {step}"
            )));
        }
        if values.is_empty() {
            return Err(Error::Input("empty ACF series".into()));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::Input(alloc::format!(
                "variance must be positive, got {variance}"
            )));
        }
        Ok(Self {
            step,
            values,
            variance,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lag(&self, j: usize) -> f64 {
        j as f64 * self.step
    }

    /// Unnormalized covariance at lag index `j`.
    pub fn covariance(&self, j: usize) -> f64 {
        self.values[j] * self.variance
    }

    /// Iterator over (lag, normalized value).
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(j, &v)| (j as f64 * self.step, v))
    }
}
