use lcpms::oracle::{
    exchangeable_coverage_count, minimizers, naive_lcpms, naive_surrogate_pair, oracle_gamma_hat,
    oracle_interval, random_instance, OracleInstance,
};
use lcpms::{
    gamma_bounds, lcpms_interval, safe_index_set, surrogate_pair, Dataset, GammaGrid, Interval,
    KernelSpec, Regressor, SelectionContext, SurrogatePair,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn boxed<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(f: F) -> Box<dyn Regressor> {
    Box::new(f)
}

fn instance(seed: u64) -> OracleInstance {
    random_instance(&mut ChaCha8Rng::seed_from_u64(seed), GammaGrid::default())
}

fn pair(k: usize, lower_hw: f64, upper_hw: f64) -> SurrogatePair {
    SurrogatePair {
        lower: Interval::new(0.0, lower_hw),
        upper: Interval::new(0.0, upper_hw),
        i: 0,
        k,
        gamma: 0.1,
    }
}

/// A localizer bandwidth so wide that every weight is 1 to machine precision.
fn flat_kernel() -> KernelSpec {
    KernelSpec::gaussian(1e12).unwrap()
}

#[test]
fn surrogate_pair_two_points_constant_localizer() {
    // D_{-i} holds one residual r = 0.7; the augmented point carries equal mass.
    let calib = Dataset::from_scalar(vec![0.0, 1.0], vec![0.3, 0.7]).unwrap();
    let models = vec![boxed(|_| 0.0)];
    let p = surrogate_pair(&calib, 0, 0, &[0.5], 0.4, &models, &flat_kernel()).unwrap();
    assert_eq!(p.lower.center, 0.0);
    assert_eq!(p.lower.half_width, 0.7);
    assert!(p.upper.half_width.is_infinite());
}

#[test]
fn surrogate_lower_is_degenerate_near_one() {
    let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x * 3.0 + 1.0).collect();
    let calib = Dataset::from_scalar(xs, ys).unwrap();
    let models = vec![boxed(|x| x[0])];
    for i in 0..10 {
        let p = surrogate_pair(&calib, i, 0, &[0.45], 0.99, &models, &flat_kernel()).unwrap();
        assert_eq!(p.lower.half_width, 0.0);
        assert!(p.lower.is_subset_of(&p.upper));
    }
    assert!(surrogate_pair(&calib, 10, 0, &[0.45], 0.5, &models, &flat_kernel()).is_err());
    assert!(surrogate_pair(&calib, 0, 1, &[0.45], 0.5, &models, &flat_kernel()).is_err());
}

#[test]
fn safe_set_examples() {
    assert_eq!(
        safe_index_set(&[pair(0, 1.0, 2.0)]).unwrap().members,
        vec![0]
    );
    // |C1+| = 5 (hw 2.5), |C2-| = 7 (hw 3.5), |C1-| <= 5.
    let s = safe_index_set(&[pair(0, 2.0, 2.5), pair(1, 3.5, 4.0)]).unwrap();
    assert_eq!(s.members, vec![0]);
    let inf = f64::INFINITY;
    let s = safe_index_set(&[pair(0, 1.0, inf), pair(1, inf, inf), pair(2, 0.0, inf)]).unwrap();
    assert_eq!(s.members, vec![0, 1, 2]);
    assert!(safe_index_set(&[]).is_err());
}

#[test]
fn perfect_model_admits_every_level() {
    let xs: Vec<f64> = (0..20).map(|i| i as f64 / 10.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
    let calib = Dataset::from_scalar(xs, ys).unwrap();
    // Every C⁻ contains its held-out response, so the intersection holds at
    // every level.
    let models = vec![boxed(|x| x[0].sin()), boxed(|x| x[0].sin())];
    let grid = GammaGrid::default();
    let kernel = KernelSpec::gaussian(0.5).unwrap();
    let b = gamma_bounds(&calib, &[0.7], 0.1, &grid, &models, &kernel).unwrap();
    assert_eq!(b.gamma_lo, grid.max());
    assert_eq!(b.gamma_hi, grid.max());
    assert!(!b.flagged());
}

#[test]
fn single_level_band_gives_one_interval() {
    let inst = instance(11);
    let grid = GammaGrid::new(vec![0.3]).unwrap();
    let ctx = SelectionContext::new(&inst.calib, &inst.models, inst.kernel).unwrap();
    let r = ctx.predict(&inst.x_new, inst.alpha, &grid).unwrap();
    assert_eq!(r.bounds.gamma_lo, 0.3);
    assert_eq!(r.bounds.gamma_hi, 0.3);
    assert_eq!(r.trace.steps.len(), 1);
    let ivs: Vec<Interval> = (0..inst.models.len())
        .map(|k| ctx.model_interval(k, &inst.x_new, 0.3).unwrap())
        .collect();
    let best = minimizers(&ivs)[0];
    assert_eq!(r.trace.steps[0].model, best);
    if ivs[best].half_width.is_finite() {
        assert_eq!(r.union.parts(), &[(ivs[best].lower(), ivs[best].upper())]);
    }
}

#[test]
fn one_model_union_collapses_to_lower_level() {
    for seed in 0..40 {
        let mut inst = instance(seed);
        inst.models.truncate(1);
        let r = lcpms_interval(
            &inst.calib,
            &inst.x_new,
            inst.alpha,
            &inst.grid,
            &inst.models,
            &inst.kernel,
        )
        .unwrap();
        let first = r.trace.steps.first().unwrap();
        assert_eq!(first.gamma, r.bounds.gamma_lo);
        for w in r.trace.steps.windows(2) {
            assert!(w[1].interval.is_subset_of(&w[0].interval));
        }
        let iv = first.interval;
        if iv.half_width.is_finite() {
            assert_eq!(r.union.parts(), &[(iv.lower(), iv.upper())]);
        } else {
            assert!(r.union.measure().is_infinite());
        }
        let ctx = SelectionContext::new(&inst.calib, &inst.models, inst.kernel).unwrap();
        for sets in ctx.safe_sets(&inst.x_new, &inst.grid).unwrap() {
            assert!(sets.iter().all(|s| s.members == vec![0]));
        }
    }
}

#[test]
fn fallback_is_flagged_identically() {
    // alpha so small that (n + 1)(1 - alpha) exceeds n: the lower condition
    // can never hold.
    let inst = instance(3);
    let alpha = 0.5 / (inst.calib.len() + 1) as f64;
    let ctx = SelectionContext::new(&inst.calib, &inst.models, inst.kernel).unwrap();
    let fast = ctx.predict(&inst.x_new, alpha, &inst.grid).unwrap();
    let naive = naive_lcpms(
        &inst.calib,
        &inst.x_new,
        alpha,
        &inst.grid,
        &inst.models,
        &inst.kernel,
    )
    .unwrap();
    assert!(fast.bounds.lo_fallback);
    assert_eq!(fast.bounds.gamma_lo, inst.grid.min());
    assert!(fast.trace.fallback);
    assert_eq!(fast, naive.result);
}

#[test]
fn context_rejects_bad_input() {
    let inst = instance(5);
    let ctx = SelectionContext::new(&inst.calib, &inst.models, inst.kernel).unwrap();
    assert!(ctx.predict(&inst.x_new, 0.0, &inst.grid).is_err());
    assert!(ctx.predict(&inst.x_new, 1.0, &inst.grid).is_err());
    assert!(ctx.predict(&[0.0, 1.0], 0.1, &inst.grid).is_err());
    assert!(ctx
        .model_interval(inst.models.len(), &inst.x_new, 0.1)
        .is_err());
    assert!(SelectionContext::new(&inst.calib, &[], inst.kernel).is_err());
}

#[test]
fn repeated_predictions_are_identical() {
    let inst = instance(8);
    let a = SelectionContext::new(&inst.calib, &inst.models, inst.kernel).unwrap();
    let b = SelectionContext::new(&inst.calib, &inst.models, inst.kernel).unwrap();
    let ra = a.predict(&inst.x_new, inst.alpha, &inst.grid).unwrap();
    assert_eq!(ra, b.predict(&inst.x_new, inst.alpha, &inst.grid).unwrap());
    assert_eq!(ra, a.predict(&inst.x_new, inst.alpha, &inst.grid).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_naive_reference(seed in any::<u64>()) {
        let inst = instance(seed);
        let ctx = SelectionContext::new(&inst.calib, &inst.models, inst.kernel).unwrap();
        let fast = ctx.predict(&inst.x_new, inst.alpha, &inst.grid).unwrap();
        let naive = naive_lcpms(
            &inst.calib, &inst.x_new, inst.alpha, &inst.grid, &inst.models, &inst.kernel,
        ).unwrap();
        prop_assert_eq!(&fast, &naive.result);
        prop_assert_eq!(ctx.safe_sets(&inst.x_new, &inst.grid).unwrap(), naive.safe_sets);
    }

    #[test]
    fn surrogates_bracket_the_oracle(seed in any::<u64>(), g in 0usize..99) {
        let inst = instance(seed);
        let gamma = inst.grid.values()[g];
        let ctx = SelectionContext::new(&inst.calib, &inst.models, inst.kernel).unwrap();
        for i in 0..inst.calib.len() {
            let pairs: Vec<SurrogatePair> = (0..inst.models.len())
                .map(|k| ctx.surrogate_pair(i, k, &inst.x_new, gamma).unwrap())
                .collect();
            let oracle: Vec<Interval> = (0..inst.models.len())
                .map(|k| oracle_interval(&inst, i, k, gamma).unwrap())
                .collect();
            for k in 0..inst.models.len() {
                let naive = naive_surrogate_pair(
                    &inst.calib, &inst.models, &inst.kernel, i, k, &inst.x_new, gamma,
                );
                prop_assert_eq!(pairs[k], naive);
                prop_assert!(pairs[k].lower.is_subset_of(&oracle[k]));
                prop_assert!(oracle[k].is_subset_of(&pairs[k].upper));
            }
            let safe = safe_index_set(&pairs).unwrap();
            for k in minimizers(&oracle) {
                prop_assert!(safe.members.contains(&k));
            }
        }
    }

    #[test]
    fn oracle_level_is_sandwiched(seed in any::<u64>()) {
        let inst = instance(seed);
        let b = gamma_bounds(
            &inst.calib, &inst.x_new, inst.alpha, &inst.grid, &inst.models, &inst.kernel,
        ).unwrap();
        let (hat, hat_fallback) = oracle_gamma_hat(&inst);
        if !b.lo_fallback {
            prop_assert!(!hat_fallback);
            prop_assert!(b.gamma_lo <= hat);
            prop_assert!(hat <= b.gamma_hi);
        }
        if !b.hi_fallback && !b.lo_fallback {
            prop_assert!(b.gamma_lo <= b.gamma_hi);
        }
    }

    #[test]
    fn coverage_average_is_permutation_invariant(seed in any::<u64>(), shift in 1usize..30, g in 0usize..99) {
        let inst = instance(seed);
        let gamma = inst.grid.values()[g];
        let n = inst.calib.len();
        let mut pts: Vec<(f64, f64)> = inst.calib.iter().map(|(x, y)| (x[0], y)).collect();
        pts.push((inst.x_new[0], inst.y_new));
        let full = |p: &[(f64, f64)]| {
            Dataset::from_scalar(p.iter().map(|v| v.0).collect(), p.iter().map(|v| v.1).collect())
                .unwrap()
        };
        let base = exchangeable_coverage_count(&full(&pts), &inst.models, &inst.kernel, gamma);
        pts.rotate_left(shift % (n + 1));
        pts.swap(0, n / 2);
        let permuted = exchangeable_coverage_count(&full(&pts), &inst.models, &inst.kernel, gamma);
        prop_assert_eq!(base, permuted);
    }
}
