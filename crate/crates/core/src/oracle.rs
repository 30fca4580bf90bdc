//! Brute-force reference implementations.
//!
//! Everything here recomputes each quantity from scratch by scanning every
//! candidate residual, with no caching across levels, indices or test points.
//! It is the ground truth for the optimized scan in [`crate::selection`] and
//! the only place where the test response `y_new` is visible: the oracle
//! interval swaps the held-out test pair into each leave-one-out set.
//!
//! Masses use the accumulation order documented in [`crate::lcp`], so the
//! inclusions `C⁻ ⊆ oracle ⊆ C⁺` hold exactly in floating point.

use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::grid::GammaGrid;
use crate::interval::{Interval, IntervalUnion};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::models::Regressor;
use crate::selection::{
    GammaBounds, LcpmsResult, SafeSet, SelectionTrace, SurrogatePair, TraceStep,
};

/// Calibration data together with the true test pair.
pub struct OracleInstance {
    pub calib: Dataset,
    pub x_new: Vec<f64>,
    pub y_new: f64,
    pub models: Vec<Box<dyn Regressor>>,
    pub kernel: KernelSpec,
    pub grid: GammaGrid,
    pub alpha: f64,
}

/// `min{v : mass(v) >= 1 - gamma}` over every candidate `v`, where
/// `mass(v) = (Σ_{base, r <= v} w + [extra_r <= v] extra_w) / (Σ_base w + extra_w)`.
///
/// Base weights are summed in `(residual, position)` order. All-zero weights
/// are replaced by ones.
pub fn eq1_half_width(base: &[(f64, f64)], extra: Option<(f64, f64)>, gamma: f64) -> f64 {
    let all_zero = base.iter().all(|p| p.1 == 0.0) && extra.is_none_or(|e| e.1 == 0.0);
    let wt = |w: f64| if all_zero { 1.0 } else { w };

    let mut sorted: Vec<(usize, f64, f64)> = base
        .iter()
        .enumerate()
        .map(|(j, &(r, w))| (j, r, wt(w)))
        .collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let base_total = sorted.iter().fold(0.0, |acc, p| acc + p.2);
    let total = match extra {
        Some((_, w)) => base_total + wt(w),
        None => base_total,
    };

    let mut candidates: Vec<f64> = sorted.iter().map(|p| p.1).collect();
    if let Some((r, _)) = extra {
        candidates.push(r);
    }
    candidates.retain(|v| v.is_finite());
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    for v in candidates {
        let mut mass = sorted
            .iter()
            .filter(|p| p.1 <= v)
            .fold(0.0, |acc, p| acc + p.2);
        if let Some((r, w)) = extra {
            if r <= v {
                mass += wt(w);
            }
        }
        if mass / total >= 1.0 - gamma {
            return v;
        }
    }
    f64::INFINITY
}

fn loo_base(calib: &Dataset, f: &dyn Regressor, kernel: &KernelSpec, i: usize) -> Vec<(f64, f64)> {
    (0..calib.len())
        .filter(|&j| j != i)
        .map(|j| {
            let (x, y) = (calib.x(j), calib.y(j));
            ((y - f.predict(x)).abs(), kernel.weight(x, calib.x(i)))
        })
        .collect()
}

/// Eq. (1) at `x0` over the full calibration set.
pub fn naive_model_interval(
    calib: &Dataset,
    f: &dyn Regressor,
    x0: &[f64],
    gamma: f64,
    kernel: &KernelSpec,
) -> Interval {
    let base: Vec<(f64, f64)> = calib
        .iter()
        .map(|(x, y)| ((y - f.predict(x)).abs(), kernel.weight(x, x0)))
        .collect();
    Interval::new(f.predict(x0), eq1_half_width(&base, None, gamma))
}

/// Surrogate pair recomputed from scratch.
pub fn naive_surrogate_pair(
    calib: &Dataset,
    models: &[Box<dyn Regressor>],
    kernel: &KernelSpec,
    i: usize,
    k: usize,
    x_new: &[f64],
    gamma: f64,
) -> SurrogatePair {
    let f = models[k].as_ref();
    let base = loo_base(calib, f, kernel, i);
    let w = kernel.weight(x_new, calib.x(i));
    let center = f.predict(calib.x(i));
    SurrogatePair {
        lower: Interval::new(center, eq1_half_width(&base, Some((0.0, w)), gamma)),
        upper: Interval::new(
            center,
            eq1_half_width(&base, Some((f64::INFINITY, w)), gamma),
        ),
        i,
        k,
        gamma,
    }
}

/// `C_k(D_{-i} ∪ {(x_new, y_new)}, X_i, gamma)` for `i < n`; for `i == n`
/// the roles are already in place and this is `C_k(D, x_new, gamma)`.
pub fn oracle_interval(inst: &OracleInstance, i: usize, k: usize, gamma: f64) -> Result<Interval> {
    let n = inst.calib.len();
    if i > n {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: n + 1,
        });
    }
    let f = inst.models[k].as_ref();
    if i == n {
        return Ok(naive_model_interval(
            &inst.calib,
            f,
            &inst.x_new,
            gamma,
            &inst.kernel,
        ));
    }
    let base = loo_base(&inst.calib, f, &inst.kernel, i);
    let extra = (
        (inst.y_new - f.predict(&inst.x_new)).abs(),
        inst.kernel.weight(&inst.x_new, inst.calib.x(i)),
    );
    Ok(Interval::new(
        f.predict(inst.calib.x(i)),
        eq1_half_width(&base, Some(extra), gamma),
    ))
}

/// Indices of every model whose interval has minimal length.
pub fn minimizers(intervals: &[Interval]) -> Vec<usize> {
    let best = intervals
        .iter()
        .map(Interval::length)
        .fold(f64::INFINITY, f64::min);
    (0..intervals.len())
        .filter(|&k| intervals[k].length() == best)
        .collect()
}

fn first_minimizer(intervals: &[Interval]) -> usize {
    minimizers(intervals).first().copied().unwrap_or(0)
}

fn response(inst: &OracleInstance, i: usize) -> f64 {
    if i == inst.calib.len() {
        inst.y_new
    } else {
        inst.calib.y(i)
    }
}

/// Number of `i in 0..=n` with `Y_i ∈ C_min(D̃_{-i}, X_i, gamma)`.
pub fn oracle_coverage_count(inst: &OracleInstance, gamma: f64) -> usize {
    let n = inst.calib.len();
    (0..=n)
        .filter(|&i| {
            let ivs: Vec<Interval> = (0..inst.models.len())
                .map(|k| oracle_interval(inst, i, k, gamma).expect("index in range"))
                .collect();
            ivs[first_minimizer(&ivs)].contains(response(inst, i))
        })
        .count()
}

/// The largest grid level at which the oracle leave-one-out coverage reaches
/// `1 - alpha`, and whether the grid-minimum fallback was used.
pub fn oracle_gamma_hat(inst: &OracleInstance) -> (f64, bool) {
    let n = inst.calib.len();
    let need = (n + 1) as f64 * (1.0 - inst.alpha);
    let mut hat = None;
    for &gamma in inst.grid.values() {
        if oracle_coverage_count(inst, gamma) as f64 >= need {
            hat = Some(gamma);
        }
    }
    match hat {
        Some(g) => (g, false),
        None => (inst.grid.min(), true),
    }
}

/// Symmetric version of the oracle coverage count: every one of the `n + 1`
/// points (calibration plus test) is held out in turn from `full`, with no
/// distinguished augmented point. Invariant under permutations of `full`.
pub fn exchangeable_coverage_count(
    full: &Dataset,
    models: &[Box<dyn Regressor>],
    kernel: &KernelSpec,
    gamma: f64,
) -> usize {
    (0..full.len())
        .filter(|&i| {
            let ivs: Vec<Interval> = models
                .iter()
                .map(|f| {
                    let base = loo_base(full, f.as_ref(), kernel, i);
                    Interval::new(f.predict(full.x(i)), eq1_half_width(&base, None, gamma))
                })
                .collect();
            ivs[first_minimizer(&ivs)].contains(full.y(i))
        })
        .count()
}

/// Output of [`naive_lcpms`], including the safe sets `[gamma_index][i]`.
pub struct NaiveOutput {
    pub result: LcpmsResult,
    pub safe_sets: Vec<Vec<SafeSet>>,
}

/// End-to-end reference for the selection procedure.
pub fn naive_lcpms(
    calib: &Dataset,
    x_new: &[f64],
    alpha: f64,
    grid: &GammaGrid,
    models: &[Box<dyn Regressor>],
    kernel: &KernelSpec,
) -> Result<NaiveOutput> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if models.is_empty() {
        return Err(Error::Empty("model bank"));
    }
    calib.check_dim(x_new)?;
    let n = calib.len();
    let need = (n + 1) as f64 * (1.0 - alpha);
    let mut gamma_lo = None;
    let mut gamma_hi = None;
    let mut safe_sets = Vec::with_capacity(grid.len());

    for &gamma in grid.values() {
        let mut in_lower = 0usize;
        let mut in_upper = 0usize;
        let mut sets = Vec::with_capacity(n);
        for i in 0..n {
            let pairs: Vec<SurrogatePair> = (0..models.len())
                .map(|k| naive_surrogate_pair(calib, models, kernel, i, k, x_new, gamma))
                .collect();
            let shortest_upper = pairs
                .iter()
                .map(|p| p.upper.length())
                .fold(f64::INFINITY, f64::min);
            let members: Vec<usize> = pairs
                .iter()
                .filter(|p| p.lower.length() <= shortest_upper)
                .map(|p| p.k)
                .collect();
            let y = calib.y(i);
            if members.iter().all(|&k| pairs[k].lower.contains(y)) {
                in_lower += 1;
            }
            if members.iter().any(|&k| pairs[k].upper.contains(y)) {
                in_upper += 1;
            }
            sets.push(SafeSet { i, gamma, members });
        }
        safe_sets.push(sets);
        if in_lower as f64 >= need {
            gamma_lo = Some(gamma);
        }
        if (in_upper + 1) as f64 >= need {
            gamma_hi = Some(gamma);
        }
    }

    let bounds = GammaBounds {
        gamma_lo: gamma_lo.unwrap_or(grid.min()),
        gamma_hi: gamma_hi.unwrap_or(grid.min()),
        alpha,
        lo_fallback: gamma_lo.is_none(),
        hi_fallback: gamma_hi.is_none(),
    };
    let mut union = IntervalUnion::new();
    let mut steps = Vec::new();
    for &gamma in grid.values() {
        if gamma < bounds.gamma_lo || gamma > bounds.gamma_hi {
            continue;
        }
        let ivs: Vec<Interval> = models
            .iter()
            .map(|f| naive_model_interval(calib, f.as_ref(), x_new, gamma, kernel))
            .collect();
        let k = first_minimizer(&ivs);
        union.insert(ivs[k].lower(), ivs[k].upper())?;
        steps.push(TraceStep {
            gamma,
            model: k,
            interval: ivs[k],
        });
    }
    Ok(NaiveOutput {
        result: LcpmsResult {
            union,
            trace: SelectionTrace {
                steps,
                fallback: bounds.lo_fallback || bounds.hi_fallback,
            },
            bounds,
        },
        safe_sets,
    })
}

/// Random instance for property checks: `n ∈ [5, 30]`, `K ∈ [1, 4]`,
/// covariates uniform on `[-2, 2]`, responses a smooth mean plus noise,
/// localizer bandwidth in `[0.2, 2]`. Some instances quantize responses and
/// use constant or duplicated models so that residual and length ties occur.
pub fn random_instance<R: Rng>(rng: &mut R, grid: GammaGrid) -> OracleInstance {
    use rand_distr::{Distribution, StandardNormal};
    let n = rng.random_range(5..=30);
    let kk = rng.random_range(1..=4);
    let (a, b, c) = (
        rng.random_range(-2.0..2.0),
        rng.random_range(0.2..3.0),
        rng.random_range(-1.0..1.0),
    );
    let mean = move |x: f64| a * (b * x).sin() + c * x;
    let quantize = rng.random_bool(0.2);
    let draw = |rng: &mut R| {
        let x: f64 = rng.random_range(-2.0..2.0);
        let noise: f64 = StandardNormal.sample(rng);
        let mut y = mean(x) + noise;
        if quantize {
            y = (y * 4.0).round() / 4.0;
        }
        (x, y)
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..n).map(|_| draw(rng)).unzip();
    let (x_new, y_new) = draw(rng);

    let mut models: Vec<Box<dyn Regressor>> = Vec::with_capacity(kk);
    let mut params: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(kk);
    for k in 0..kk {
        let p = if k > 0 && rng.random_bool(0.15) {
            params[rng.random_range(0..k)]
        } else if quantize && rng.random_bool(0.5) {
            (0.0, 1.0, 0.0, (rng.random_range(-4..4) as f64) / 4.0)
        } else {
            (
                rng.random_range(-2.0..2.0),
                rng.random_range(0.2..3.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-0.5..0.5),
            )
        };
        params.push(p);
        let (pa, pb, pc, pd) = p;
        models.push(Box::new(move |x: &[f64]| {
            pa * (pb * x[0]).sin() + pc * x[0] + pd
        }));
    }
    let family = if rng.random_bool(0.5) {
        KernelFamily::Gaussian
    } else {
        KernelFamily::Exponential
    };
    let kernel = KernelSpec::new(family, rng.random_range(0.2..2.0)).expect("valid bandwidth");
    let alpha = rng.random_range(0.05..0.5);
    OracleInstance {
        calib: Dataset::from_scalar(xs, ys).expect("finite data"),
        x_new: vec![x_new],
        y_new,
        models,
        kernel,
        grid,
        alpha,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::SelectionContext;

    fn tiny(models: Vec<Box<dyn Regressor>>, y_new: f64) -> OracleInstance {
        OracleInstance {
            calib: Dataset::from_scalar(
                vec![-1.0, -0.4, 0.1, 0.5, 1.2],
                vec![0.3, -0.2, 0.9, 0.4, -0.6],
            )
            .unwrap(),
            x_new: vec![0.2],
            y_new,
            models,
            kernel: KernelSpec::gaussian(0.8).unwrap(),
            grid: GammaGrid::default(),
            alpha: 0.2,
        }
    }

    #[test]
    fn surrogate_hand_instance() {
        // constant localizer: all covariates coincide
        let calib = Dataset::from_scalar(vec![0.0, 0.0], vec![1.0, 3.0]).unwrap();
        let models: Vec<Box<dyn Regressor>> = vec![Box::new(|_: &[f64]| 1.0)];
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let p = naive_surrogate_pair(&calib, &models, &kernel, 0, 0, &[0.0], 0.4);
        // D_{-0} = {residual 2}; zero residual mass 0.5 < 0.6
        assert_eq!(p.lower.half_width, 2.0);
        assert_eq!(p.upper.half_width, f64::INFINITY);
        let ctx = SelectionContext::new(&calib, &models, kernel).unwrap();
        assert_eq!(ctx.surrogate_pair(0, 0, &[0.0], 0.4).unwrap(), p);
    }

    #[test]
    fn perfect_conformity_matches_lower_surrogate() {
        let f = |x: &[f64]| 0.5 * x[0];
        let inst = tiny(vec![Box::new(f)], f(&[0.2]));
        for i in 0..5 {
            for &g in &[0.05, 0.3, 0.7] {
                let o = oracle_interval(&inst, i, 0, g).unwrap();
                let s = naive_surrogate_pair(
                    &inst.calib,
                    &inst.models,
                    &inst.kernel,
                    i,
                    0,
                    &inst.x_new,
                    g,
                );
                assert_eq!(o, s.lower);
            }
        }
    }

    #[test]
    fn extreme_response_matches_upper_when_full_mass_needed() {
        let f = |x: &[f64]| 0.5 * x[0];
        let inst = tiny(vec![Box::new(f)], 1e6);
        for i in 0..5 {
            let o = oracle_interval(&inst, i, 0, 0.01).unwrap();
            let s = naive_surrogate_pair(
                &inst.calib,
                &inst.models,
                &inst.kernel,
                i,
                0,
                &inst.x_new,
                0.01,
            );
            assert!(o.half_width >= s.lower.half_width);
            assert!(o.half_width >= inst.calib.ys().iter().map(|y| y.abs()).fold(0.0, f64::max));
        }
    }

    #[test]
    fn gamma_hat_edge_cases() {
        let mut inst = tiny(vec![Box::new(|x: &[f64]| 0.5 * x[0])], 0.0);
        inst.grid = GammaGrid::new(vec![0.05]).unwrap();
        inst.alpha = 0.5;
        assert_eq!(oracle_gamma_hat(&inst), (0.05, false));

        inst.grid = GammaGrid::default();
        inst.alpha = 0.999;
        assert_eq!(oracle_gamma_hat(&inst), (0.99, false));
    }

    #[test]
    fn eq1_examples() {
        assert_eq!(
            eq1_half_width(&[(1.0, 1.0)], Some((f64::INFINITY, 1.0)), 0.4),
            f64::INFINITY
        );
        assert_eq!(eq1_half_width(&[(1.0, 1.0)], Some((0.0, 1.0)), 0.4), 1.0);
        assert_eq!(eq1_half_width(&[(1.0, 1.0)], Some((0.0, 1.0)), 0.5), 0.0);
        assert_eq!(eq1_half_width(&[(2.0, 0.0), (1.0, 0.0)], None, 0.5), 1.0);
    }
}
