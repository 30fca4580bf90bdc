//! Localized conformal intervals for a single fixed model.
//!
//! The half-width is the smallest residual magnitude `v` whose normalized
//! localizer mass `Σ w_i 1{r_i <= v} / Σ w_i` reaches `1 - gamma`.
//!
//! Accumulation order is fixed so that every code path (profiles, the
//! leave-one-out scans in [`crate::selection`], and the brute-force reference
//! in [`crate::oracle`]) produces bit-identical masses: finite residuals are
//! ordered by `(magnitude, input position)`, raw weights are summed left to
//! right in that order, and an optional augmented point's weight is added
//! last, both to the prefix and to the normalizer.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::kernel::KernelSpec;
use crate::models::Regressor;

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidGamma(gamma))
    }
}

/// Indices of `values` sorted ascending by value, ties kept in input order.
pub(crate) fn stable_argsort(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

/// Sorted residual magnitudes with cumulative normalized weights.
///
/// Tied magnitudes are pooled into one step. Mass attached to infinite
/// residuals counts in the normalizer but never in `cumw`, so
/// `total_finite_mass` can be below 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualProfile {
    sorted_residuals: Vec<f64>,
    cumw: Vec<f64>,
    total_finite_mass: f64,
}

impl ResidualProfile {
    pub fn sorted_residuals(&self) -> &[f64] {
        &self.sorted_residuals
    }

    pub fn cumw(&self) -> &[f64] {
        &self.cumw
    }

    pub fn total_finite_mass(&self) -> f64 {
        self.total_finite_mass
    }

    /// Smallest residual with cumulative weight `>= 1 - gamma`, or `+inf`.
    pub fn quantile(&self, gamma: f64) -> Result<f64> {
        check_gamma(gamma)?;
        Ok(self.quantile_unchecked(gamma))
    }

    pub(crate) fn quantile_unchecked(&self, gamma: f64) -> f64 {
        let target = 1.0 - gamma;
        let m = self.cumw.partition_point(|&c| c < target);
        self.sorted_residuals
            .get(m)
            .copied()
            .unwrap_or(f64::INFINITY)
    }
}

/// Builds a profile from `(magnitude, raw_weight)` pairs.
///
/// Magnitudes must be nonnegative (`+inf` allowed); weights nonnegative and
/// finite. If every weight is zero the weights are treated as uniform.
pub fn build_profile(pairs: &[(f64, f64)]) -> Result<ResidualProfile> {
    if pairs.is_empty() {
        return Err(Error::Empty("residual/weight pairs"));
    }
    for &(r, w) in pairs {
        if !(r >= 0.0) {
            return Err(Error::InvalidDataset(format!(
                "residual magnitude {r} is not >= 0"
            )));
        }
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "weight {w} is not finite and >= 0"
            )));
        }
    }
    let uniform = pairs.iter().all(|&(_, w)| w == 0.0);
    if uniform {
        log::warn!("all localizer weights are zero; using uniform weights");
    }
    let weight = |w: f64| if uniform { 1.0 } else { w };

    let finite: Vec<f64> = pairs
        .iter()
        .filter(|(r, _)| r.is_finite())
        .map(|&(r, _)| r)
        .collect();
    let finite_w: Vec<f64> = pairs
        .iter()
        .filter(|(r, _)| r.is_finite())
        .map(|&(_, w)| weight(w))
        .collect();
    let order = stable_argsort(&finite);

    let mut sorted_residuals: Vec<f64> = Vec::with_capacity(order.len());
    let mut prefix: Vec<f64> = Vec::with_capacity(order.len());
    let mut acc = 0.0;
    for &j in &order {
        acc += finite_w[j];
        if sorted_residuals.last() == Some(&finite[j]) {
            *prefix.last_mut().unwrap() = acc;
        } else {
            sorted_residuals.push(finite[j]);
            prefix.push(acc);
        }
    }
    let mut total = acc;
    for &(r, w) in pairs {
        if r == f64::INFINITY {
            total += weight(w);
        }
    }
    let cumw: Vec<f64> = prefix.iter().map(|p| p / total).collect();
    let total_finite_mass = cumw.last().copied().unwrap_or(0.0);
    Ok(ResidualProfile {
        sorted_residuals,
        cumw,
        total_finite_mass,
    })
}

/// Functional form of [`ResidualProfile::quantile`].
pub fn weighted_quantile(profile: &ResidualProfile, gamma: f64) -> Result<f64> {
    profile.quantile(gamma)
}

/// Localized conformal interval of a single model at `x0`:
/// centered at `f(x0)` with the weighted residual quantile as half-width.
pub fn lcp_interval(
    calib: &Dataset,
    f: &dyn Regressor,
    x0: &[f64],
    gamma: f64,
    kernel: &KernelSpec,
) -> Result<Interval> {
    check_gamma(gamma)?;
    calib.check_dim(x0)?;
    let pairs: Vec<(f64, f64)> = calib
        .iter()
        .map(|(x, y)| ((y - f.predict(x)).abs(), kernel.weight(x, x0)))
        .collect();
    let q = build_profile(&pairs)?.quantile_unchecked(gamma);
    Ok(Interval::new(f.predict(x0), q))
}

/// Unweighted split-conformal half-width: the `ceil((n+1)(1-alpha))`-th
/// smallest residual magnitude, or `+inf` when that rank exceeds `n`.
pub fn split_conformal_half_width(residuals: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if residuals.is_empty() {
        return Err(Error::Empty("residuals"));
    }
    let mut r: Vec<f64> = residuals.iter().map(|v| v.abs()).collect();
    if r.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidDataset("NaN residual".into()));
    }
    r.sort_by(f64::total_cmp);
    let n = r.len();
    let rank = ((n + 1) as f64 * (1.0 - alpha)).ceil() as usize;
    Ok(if rank > n {
        f64::INFINITY
    } else {
        r[rank.max(1) - 1]
    })
}

/// Split-conformal interval of a single model at `x0`, no localization.
pub fn split_conformal_interval(
    calib: &Dataset,
    f: &dyn Regressor,
    x0: &[f64],
    alpha: f64,
) -> Result<Interval> {
    calib.check_dim(x0)?;
    let res: Vec<f64> = calib.iter().map(|(x, y)| y - f.predict(x)).collect();
    Ok(Interval::new(
        f.predict(x0),
        split_conformal_half_width(&res, alpha)?,
    ))
}
