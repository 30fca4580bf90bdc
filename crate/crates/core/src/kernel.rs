//! Localizer kernels `H(x, x')`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `exp(-‖x - x'‖ / h)`
    Exponential,
    /// `exp(-‖x - x'‖² / h²)`
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    bandwidth: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidKernel(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(Self { family, bandwidth })
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, bandwidth)
    }

    pub fn exponential(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Exponential, bandwidth)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Raw (unnormalized) localizer weight. Symmetric, equal to 1 at zero distance.
    pub fn weight(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let sq: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
        match self.family {
            KernelFamily::Exponential => (-sq.sqrt() / self.bandwidth).exp(),
            KernelFamily::Gaussian => (-sq / (self.bandwidth * self.bandwidth)).exp(),
        }
    }
}

/// Normalized localizer weights of `xs` (flat, row-major, dimension `x0.len()`)
/// around `x0`.
///
/// If every raw weight underflows to zero the weights fall back to uniform,
/// which is plain (non-localized) conformal weighting.
pub fn localizer_weights(xs: &[f64], x0: &[f64], kernel: &KernelSpec) -> Result<Vec<f64>> {
    let dim = x0.len();
    if dim == 0 || xs.is_empty() {
        return Err(Error::Empty("localizer covariates"));
    }
    if !xs.len().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: xs.len() % dim,
        });
    }
    let raw: Vec<f64> = xs.chunks_exact(dim).map(|x| kernel.weight(x, x0)).collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        Ok(raw.into_iter().map(|w| w / total).collect())
    } else {
        log::warn!("localizer weights underflowed at {x0:?}; using uniform weights");
        let n = raw.len() as f64;
        Ok(vec![1.0 / n; raw.len()])
    }
}
