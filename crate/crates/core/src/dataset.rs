use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pairs `(x, y)` with vector covariates of a common dimension, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from a flat row-major covariate buffer.
    pub fn new(dim: usize, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDataset(
                "covariate dimension must be positive".into(),
            ));
        }
        if ys.is_empty() {
            return Err(Error::InvalidDataset(
                "dataset must contain at least one point".into(),
            ));
        }
        if xs.len() != dim * ys.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * ys.len(),
                got: xs.len(),
            });
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite value".into()));
        }
        Ok(Self { dim, xs, ys })
    }

    /// One-dimensional covariates.
    pub fn from_scalar(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: ys.len(),
                got: xs.len(),
            });
        }
        Self::new(1, xs, ys)
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn xs_flat(&self) -> &[f64] {
        &self.xs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.xs.chunks_exact(self.dim).zip(self.ys.iter().copied())
    }

    /// Copy with one extra point appended.
    pub fn with_point(&self, x: &[f64], y: f64) -> Result<Self> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut xs = self.xs.clone();
        xs.extend_from_slice(x);
        let mut ys = self.ys.clone();
        ys.push(y);
        Ok(Self {
            dim: self.dim,
            xs,
            ys,
        })
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            })
        }
    }
}
