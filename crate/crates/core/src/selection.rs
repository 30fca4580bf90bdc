//! Localized conformal model selection.
//!
//! For every calibration index `i` and level `gamma`, each model's
//! leave-one-out interval at `X_i` is bracketed by two surrogates that replace
//! the unknown test response with a perfectly conforming one (`C⁻`, residual 0)
//! or an infinitely nonconforming one (`C⁺`, residual +inf). The safe set
//! keeps every model whose `C⁻` is no longer than the shortest `C⁺`.
//! Coverage counts of `∩ C⁻` and `∪ C⁺` over the safe sets bound the admissible
//! levels `[gamma_lo, gamma_hi]`, and the prediction set is the union of the
//! shortest full-data interval at each admissible level.
//!
//! [`SelectionContext`] caches everything that does not depend on the test
//! covariate: per-model residuals, their sort order, and, for every
//! `(i, k)`, the prefix sums of localizer weights `H(X_j, X_i)` over the
//! leave-one-out residuals in sorted order. A test point then only
//! contributes the augmented weight `H(x_new, X_i)`, and each quantile is a
//! binary search.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::grid::GammaGrid;
use crate::interval::{Interval, IntervalUnion};
use crate::kernel::KernelSpec;
use crate::lcp::{check_gamma, stable_argsort};
use crate::models::Regressor;

/// Lower (`C⁻`) and upper (`C⁺`) surrogate intervals for leave-one-out index
/// `i` and model `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogatePair {
    pub lower: Interval,
    pub upper: Interval,
    pub i: usize,
    pub k: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeSet {
    pub i: usize,
    pub gamma: f64,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaBounds {
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub alpha: f64,
    /// No grid level met the lower condition; `gamma_lo` is the grid minimum.
    pub lo_fallback: bool,
    /// No grid level met the upper condition; `gamma_hi` is the grid minimum.
    pub hi_fallback: bool,
}

impl GammaBounds {
    pub fn flagged(&self) -> bool {
        self.lo_fallback || self.hi_fallback
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub gamma: f64,
    /// Index of the shortest interval at this level (lowest index on ties).
    pub model: usize,
    pub interval: Interval,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub steps: Vec<TraceStep>,
    pub fallback: bool,
}

impl SelectionTrace {
    /// Most frequently selected model, ties to the lowest index.
    pub fn modal_model(&self) -> Option<usize> {
        let max_k = self.steps.iter().map(|s| s.model).max()?;
        let mut counts = vec![0usize; max_k + 1];
        for s in &self.steps {
            counts[s.model] += 1;
        }
        let best = *counts.iter().max()?;
        counts.iter().position(|&c| c == best)
    }

    /// Model selected at the largest admissible level.
    pub fn model_at_gamma_hi(&self) -> Option<usize> {
        self.steps.last().map(|s| s.model)
    }
}

/// Output of one prediction: the interval union, the per-level trace, and
/// the admissible band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcpmsResult {
    pub union: IntervalUnion,
    pub trace: SelectionTrace,
    pub bounds: GammaBounds,
}

/// Admissible band from per-level coverage counts.
///
/// The lower condition is `count_lo / (n + 1) >= 1 - alpha`; the upper one is
/// `count_hi / (n + 1) >= 1 - alpha - 1 / (n + 1)`. Both are evaluated as
/// `count (+1) >= (n + 1)(1 - alpha)` so that they share one rounded threshold.
pub(crate) fn bounds_from_counts(
    count_lo: &[usize],
    count_hi: &[usize],
    n: usize,
    alpha: f64,
    grid: &GammaGrid,
) -> GammaBounds {
    let need = (n + 1) as f64 * (1.0 - alpha);
    let lo = (0..grid.len()).rev().find(|&g| count_lo[g] as f64 >= need);
    let hi = (0..grid.len())
        .rev()
        .find(|&g| (count_hi[g] + 1) as f64 >= need);
    GammaBounds {
        gamma_lo: grid.values()[lo.unwrap_or(0)],
        gamma_hi: grid.values()[hi.unwrap_or(0)],
        alpha,
        lo_fallback: lo.is_none(),
        hi_fallback: hi.is_none(),
    }
}

/// Argmin of interval length, lowest index on ties.
pub(crate) fn shortest(intervals: &[Interval]) -> usize {
    let mut best = 0;
    for (k, iv) in intervals.iter().enumerate().skip(1) {
        if iv.length() < intervals[best].length() {
            best = k;
        }
    }
    best
}

/// Union over admissible levels of the shortest candidate at each level.
pub(crate) fn assemble(
    bounds: GammaBounds,
    grid: &GammaGrid,
    mut candidates_at: impl FnMut(usize) -> Vec<Interval>,
) -> Result<LcpmsResult> {
    let mut union = IntervalUnion::new();
    let mut steps = Vec::new();
    for (g, &gamma) in grid.values().iter().enumerate() {
        if gamma < bounds.gamma_lo || gamma > bounds.gamma_hi {
            continue;
        }
        let ivs = candidates_at(g);
        let k = shortest(&ivs);
        union.insert_interval(&ivs[k])?;
        steps.push(TraceStep {
            gamma,
            model: k,
            interval: ivs[k],
        });
    }
    Ok(LcpmsResult {
        union,
        trace: SelectionTrace {
            steps,
            fallback: bounds.flagged(),
        },
        bounds,
    })
}

/// Safe set from one surrogate pair per model:
/// `{k : |C⁻_k| <= min_k' |C⁺_k'|}`.
pub fn safe_index_set(pairs: &[SurrogatePair]) -> Result<SafeSet> {
    let first = pairs.first().ok_or(Error::Empty("surrogate pairs"))?;
    let min_upper = pairs
        .iter()
        .map(|p| p.upper.length())
        .fold(f64::INFINITY, f64::min);
    let members: Vec<usize> = pairs
        .iter()
        .filter(|p| p.lower.length() <= min_upper)
        .map(|p| p.k)
        .collect();
    assert!(!members.is_empty(), "safe set is never empty");
    Ok(SafeSet {
        i: first.i,
        gamma: first.gamma,
        members,
    })
}

/// Quantile searches for one leave-one-out index `i` and model `k`, with the
/// augmented point's weight already fixed.
struct LooView<'a> {
    /// Prefix sums of `H(X_j, X_i)` over `j != i` in residual order.
    prefix: &'a [f64],
    /// Residuals of model `k` in sorted order over all `n` points.
    sorted: &'a [f64],
    /// Position of `i` inside `sorted`.
    skip: usize,
    aug_weight: f64,
    total: f64,
    uniform: bool,
}

impl LooView<'_> {
    fn residual(&self, m: usize) -> f64 {
        if m < self.skip {
            self.sorted[m]
        } else {
            self.sorted[m + 1]
        }
    }

    fn prefix_at(&self, m: usize) -> f64 {
        if self.uniform {
            (m + 1) as f64
        } else {
            self.prefix[m]
        }
    }

    /// Half-width of `C⁺`: the augmented residual is `+inf`.
    fn upper(&self, target: f64) -> f64 {
        let len = self.prefix.len();
        let m = partition(len, |m| self.prefix_at(m) / self.total < target);
        if m == len {
            f64::INFINITY
        } else {
            self.residual(m)
        }
    }

    /// Half-width of `C⁻`: the augmented residual is 0.
    fn lower(&self, target: f64) -> f64 {
        let len = self.prefix.len();
        if self.zero_mass() >= target {
            return 0.0;
        }
        let m = partition(len, |m| {
            (self.prefix_at(m) + self.aug_weight) / self.total < target
        });
        if m == len {
            f64::INFINITY
        } else {
            self.residual(m)
        }
    }

    /// Normalized mass at `v = 0` with the augmented zero residual included.
    fn zero_mass(&self) -> f64 {
        let zeros = partition(self.prefix.len(), |m| self.residual(m) <= 0.0);
        let base = if zeros == 0 {
            0.0
        } else {
            self.prefix_at(zeros - 1)
        };
        (base + self.aug_weight) / self.total
    }

    /// Both half-widths for every target, `targets` ascending. Equivalent to
    /// calling [`Self::lower`] and [`Self::upper`] per target, in one pass.
    fn sweep(&self, targets: impl Iterator<Item = f64>, mut emit: impl FnMut(f64, f64)) {
        let len = self.prefix.len();
        let zero_mass = self.zero_mass();
        let (mut mu, mut ml) = (0, 0);
        for target in targets {
            while mu < len && self.prefix_at(mu) / self.total < target {
                mu += 1;
            }
            while ml < len && (self.prefix_at(ml) + self.aug_weight) / self.total < target {
                ml += 1;
            }
            let at = |m: usize| {
                if m == len {
                    f64::INFINITY
                } else {
                    self.residual(m)
                }
            };
            let lower = if zero_mass >= target { 0.0 } else { at(ml) };
            emit(lower, at(mu));
        }
    }
}

/// First index in `0..len` where `pred` is false; `pred` must be monotone.
fn partition(len: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, len);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Test-point-independent state for one calibration set and model bank.
pub struct SelectionContext<'a> {
    calib: &'a Dataset,
    models: &'a [Box<dyn Regressor>],
    kernel: KernelSpec,
    n: usize,
    /// `residuals[k][j] = |Y_j - f_k(X_j)|`
    residuals: Vec<Vec<f64>>,
    /// `centers[k][j] = f_k(X_j)`
    centers: Vec<Vec<f64>>,
    order: Vec<Vec<usize>>,
    sorted: Vec<Vec<f64>>,
    /// `rank[k][j]`: position of `j` in `order[k]`.
    rank: Vec<Vec<usize>>,
    /// `(i * K + k) * (n - 1) ..` holds the leave-one-out prefix sums.
    loo_prefix: Vec<f64>,
    loo_total: Vec<f64>,
}

/// Per-test-point state: augmented weights and full-data profiles at `x_new`.
struct PointState {
    /// `H(x_new, X_i)` for each calibration point.
    aug: Vec<f64>,
    /// Full-data prefix sums per model, in `order[k]`.
    full_prefix: Vec<Vec<f64>>,
    full_uniform: bool,
    predictions: Vec<f64>,
}

impl<'a> SelectionContext<'a> {
    pub fn new(
        calib: &'a Dataset,
        models: &'a [Box<dyn Regressor>],
        kernel: KernelSpec,
    ) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Empty("model bank"));
        }
        let n = calib.len();
        let kk = models.len();
        let centers: Vec<Vec<f64>> = models
            .iter()
            .map(|f| calib.iter().map(|(x, _)| f.predict(x)).collect())
            .collect();
        let residuals: Vec<Vec<f64>> = centers
            .iter()
            .map(|c| {
                c.iter()
                    .zip(calib.ys())
                    .map(|(f, y)| (y - f).abs())
                    .collect()
            })
            .collect();
        let order: Vec<Vec<usize>> = residuals.iter().map(|r| stable_argsort(r)).collect();
        let sorted: Vec<Vec<f64>> = residuals
            .iter()
            .zip(&order)
            .map(|(r, o)| o.iter().map(|&j| r[j]).collect())
            .collect();
        let rank: Vec<Vec<usize>> = order
            .iter()
            .map(|o| {
                let mut r = vec![0; n];
                for (pos, &j) in o.iter().enumerate() {
                    r[j] = pos;
                }
                r
            })
            .collect();

        let w = n - 1;
        let mut loo_prefix = vec![0.0; n * kk * w];
        let mut loo_total = vec![0.0; n * kk];
        let mut row = vec![0.0; n];
        for i in 0..n {
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = kernel.weight(calib.x(j), calib.x(i));
            }
            for k in 0..kk {
                let base = (i * kk + k) * w;
                let mut acc = 0.0;
                let mut m = 0;
                for &j in &order[k] {
                    if j == i {
                        continue;
                    }
                    acc += row[j];
                    loo_prefix[base + m] = acc;
                    m += 1;
                }
                loo_total[i * kk + k] = acc;
            }
        }

        Ok(Self {
            calib,
            models,
            kernel,
            n,
            residuals,
            centers,
            order,
            sorted,
            rank,
            loo_prefix,
            loo_total,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_models(&self) -> usize {
        self.models.len()
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    fn point_state(&self, x_new: &[f64]) -> Result<PointState> {
        self.calib.check_dim(x_new)?;
        let aug: Vec<f64> = (0..self.n)
            .map(|i| self.kernel.weight(x_new, self.calib.x(i)))
            .collect();
        let full_prefix: Vec<Vec<f64>> = self
            .order
            .iter()
            .map(|o| {
                let mut acc = 0.0;
                o.iter()
                    .map(|&j| {
                        acc += aug[j];
                        acc
                    })
                    .collect()
            })
            .collect();
        let full_uniform = full_prefix[0][self.n - 1] == 0.0;
        if full_uniform {
            log::warn!("localizer weights underflowed at {x_new:?}; using uniform weights");
        }
        let predictions = self.models.iter().map(|f| f.predict(x_new)).collect();
        Ok(PointState {
            aug,
            full_prefix,
            full_uniform,
            predictions,
        })
    }

    fn loo_view(&self, ps: &PointState, i: usize, k: usize) -> LooView<'_> {
        let kk = self.models.len();
        let w = self.n - 1;
        let base = (i * kk + k) * w;
        let aug_weight = ps.aug[i];
        let total = self.loo_total[i * kk + k] + aug_weight;
        let uniform = total == 0.0;
        LooView {
            prefix: &self.loo_prefix[base..base + w],
            sorted: &self.sorted[k],
            skip: self.rank[k][i],
            aug_weight: if uniform { 1.0 } else { aug_weight },
            total: if uniform { self.n as f64 } else { total },
            uniform,
        }
    }

    /// Full-data interval `C_k(D, x_new, gamma)`.
    fn full_interval(&self, ps: &PointState, k: usize, gamma: f64) -> Interval {
        let prefix = &ps.full_prefix[k];
        let n = self.n;
        let (total, uniform) = if ps.full_uniform {
            (n as f64, true)
        } else {
            (prefix[n - 1], false)
        };
        let target = 1.0 - gamma;
        let at = |m: usize| if uniform { (m + 1) as f64 } else { prefix[m] };
        let m = partition(n, |m| at(m) / total < target);
        let q = if m == n {
            f64::INFINITY
        } else {
            self.sorted[k][m]
        };
        Interval::new(ps.predictions[k], q)
    }

    /// Localized conformal interval of model `k` alone at `x_new`.
    pub fn model_interval(&self, k: usize, x_new: &[f64], gamma: f64) -> Result<Interval> {
        check_gamma(gamma)?;
        self.check_model(k)?;
        let ps = self.point_state(x_new)?;
        Ok(self.full_interval(&ps, k, gamma))
    }

    fn check_model(&self, k: usize) -> Result<()> {
        if k < self.models.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: k,
                len: self.models.len(),
            })
        }
    }

    pub fn surrogate_pair(
        &self,
        i: usize,
        k: usize,
        x_new: &[f64],
        gamma: f64,
    ) -> Result<SurrogatePair> {
        check_gamma(gamma)?;
        self.check_model(k)?;
        if i >= self.n {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.n,
            });
        }
        let ps = self.point_state(x_new)?;
        let view = self.loo_view(&ps, i, k);
        let target = 1.0 - gamma;
        let center = self.centers[k][i];
        Ok(SurrogatePair {
            lower: Interval::new(center, view.lower(target)),
            upper: Interval::new(center, view.upper(target)),
            i,
            k,
            gamma,
        })
    }

    /// Runs the grid scan for the full bank and returns the prediction set.
    pub fn predict(&self, x_new: &[f64], alpha: f64, grid: &GammaGrid) -> Result<LcpmsResult> {
        let all: Vec<usize> = (0..self.models.len()).collect();
        Ok(self
            .predict_subsets(x_new, alpha, grid, &[all])?
            .pop()
            .expect("one subset"))
    }

    /// Runs the procedure independently for each model subset, sharing the
    /// quantile computations. Model indices in the results refer to the full
    /// bank.
    pub fn predict_subsets(
        &self,
        x_new: &[f64],
        alpha: f64,
        grid: &GammaGrid,
        subsets: &[Vec<usize>],
    ) -> Result<Vec<LcpmsResult>> {
        Ok(self.scan(x_new, alpha, grid, subsets, false)?.0)
    }

    /// Safe sets of the full bank for every grid level and calibration index,
    /// indexed `[gamma_index][i]`.
    pub fn safe_sets(&self, x_new: &[f64], grid: &GammaGrid) -> Result<Vec<Vec<SafeSet>>> {
        let all: Vec<usize> = (0..self.models.len()).collect();
        Ok(self.scan(x_new, 0.5, grid, &[all], true)?.1)
    }

    fn scan(
        &self,
        x_new: &[f64],
        alpha: f64,
        grid: &GammaGrid,
        subsets: &[Vec<usize>],
        record_safe_sets: bool,
    ) -> Result<(Vec<LcpmsResult>, Vec<Vec<SafeSet>>)> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidAlpha(alpha));
        }
        for s in subsets {
            if s.is_empty() {
                return Err(Error::Empty("model subset"));
            }
            for &k in s {
                self.check_model(k)?;
            }
        }
        let ps = self.point_state(x_new)?;
        let kk = self.models.len();
        let g_len = grid.len();
        let mut count_lo = vec![vec![0usize; g_len]; subsets.len()];
        let mut count_hi = vec![vec![0usize; g_len]; subsets.len()];
        let mut safe_sets: Vec<Vec<SafeSet>> = if record_safe_sets {
            (0..g_len).map(|_| Vec::with_capacity(self.n)).collect()
        } else {
            Vec::new()
        };

        // half-widths indexed [g * kk + k] for the current i
        let mut lower = vec![0.0; g_len * kk];
        let mut upper = vec![0.0; g_len * kk];
        let mut member = vec![false; kk];
        for i in 0..self.n {
            for k in 0..kk {
                // largest gamma first, so targets 1 - gamma ascend
                let mut g = g_len;
                self.loo_view(&ps, i, k).sweep(
                    grid.values().iter().rev().map(|gamma| 1.0 - gamma),
                    |lo, hi| {
                        g -= 1;
                        lower[g * kk + k] = lo;
                        upper[g * kk + k] = hi;
                    },
                );
            }
            for (g, &gamma) in grid.values().iter().enumerate() {
                let lower = &lower[g * kk..(g + 1) * kk];
                let upper = &upper[g * kk..(g + 1) * kk];
                for (s, subset) in subsets.iter().enumerate() {
                    let min_upper = subset
                        .iter()
                        .map(|&k| Interval::new(0.0, upper[k]).length())
                        .fold(f64::INFINITY, f64::min);
                    let mut all_lower = true;
                    let mut any_upper = false;
                    let mut nonempty = false;
                    for &k in subset {
                        member[k] = Interval::new(0.0, lower[k]).length() <= min_upper;
                        if !member[k] {
                            continue;
                        }
                        nonempty = true;
                        let r = self.residuals[k][i];
                        all_lower &= r <= lower[k];
                        any_upper |= r <= upper[k];
                    }
                    assert!(nonempty, "safe set is never empty");
                    count_lo[s][g] += all_lower as usize;
                    count_hi[s][g] += any_upper as usize;
                    if record_safe_sets && s == 0 {
                        safe_sets[g].push(SafeSet {
                            i,
                            gamma,
                            members: subset.iter().copied().filter(|&k| member[k]).collect(),
                        });
                    }
                }
            }
        }

        let mut results = Vec::with_capacity(subsets.len());
        for (s, subset) in subsets.iter().enumerate() {
            let bounds = bounds_from_counts(&count_lo[s], &count_hi[s], self.n, alpha, grid);
            if bounds.flagged() {
                log::debug!("gamma band fallback at {x_new:?}: {bounds:?}");
            }
            let mut res = assemble(bounds, grid, |g| {
                subset
                    .iter()
                    .map(|&k| self.full_interval(&ps, k, grid.values()[g]))
                    .collect()
            })?;
            for step in &mut res.trace.steps {
                step.model = subset[step.model];
            }
            results.push(res);
        }
        Ok((results, safe_sets))
    }

    /// Admissible band `[gamma_lo, gamma_hi]` for the full bank.
    pub fn gamma_bounds(&self, x_new: &[f64], alpha: f64, grid: &GammaGrid) -> Result<GammaBounds> {
        Ok(self.predict(x_new, alpha, grid)?.bounds)
    }
}

/// Surrogate pair for one `(i, k, gamma)`; builds a throwaway context.
pub fn surrogate_pair(
    calib: &Dataset,
    i: usize,
    k: usize,
    x_new: &[f64],
    gamma: f64,
    models: &[Box<dyn Regressor>],
    kernel: &KernelSpec,
) -> Result<SurrogatePair> {
    SelectionContext::new(calib, models, *kernel)?.surrogate_pair(i, k, x_new, gamma)
}

pub fn gamma_bounds(
    calib: &Dataset,
    x_new: &[f64],
    alpha: f64,
    grid: &GammaGrid,
    models: &[Box<dyn Regressor>],
    kernel: &KernelSpec,
) -> Result<GammaBounds> {
    SelectionContext::new(calib, models, *kernel)?.gamma_bounds(x_new, alpha, grid)
}

/// Prediction set at `x_new` with its selection trace and admissible band.
pub fn lcpms_interval(
    calib: &Dataset,
    x_new: &[f64],
    alpha: f64,
    grid: &GammaGrid,
    models: &[Box<dyn Regressor>],
    kernel: &KernelSpec,
) -> Result<LcpmsResult> {
    SelectionContext::new(calib, models, *kernel)?.predict(x_new, alpha, grid)
}
