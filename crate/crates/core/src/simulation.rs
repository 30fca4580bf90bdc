//! Data generators for the two synthetic studies and the replication runner.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::grid::GammaGrid;
use crate::interval::{Interval, IntervalUnion};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::lcp::split_conformal_half_width;
use crate::models::{build_model_bank, ModelSpec, Regressor};
use crate::oracle;
use crate::selection::{LcpmsResult, SelectionContext, SelectionTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpFamily {
    /// `sin(5x)` on `[-5, 0)`, `2 sin(3x)` on `[0, 5]`.
    PiecewiseSine,
    /// `sin(x³)` on `[0, 3]`.
    SineCubed,
}

impl DgpFamily {
    pub fn domain(&self) -> (f64, f64) {
        match self {
            DgpFamily::PiecewiseSine => (-5.0, 5.0),
            DgpFamily::SineCubed => (0.0, 3.0),
        }
    }

    pub fn mean(&self, x: f64) -> f64 {
        match self {
            DgpFamily::PiecewiseSine => piecewise_sine_mean(x),
            DgpFamily::SineCubed => sine_cubed_mean(x),
        }
    }
}

pub fn piecewise_sine_mean(x: f64) -> f64 {
    if x < 0.0 {
        (5.0 * x).sin()
    } else {
        2.0 * (3.0 * x).sin()
    }
}

pub fn sine_cubed_mean(x: f64) -> f64 {
    (x * x * x).sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub family: DgpFamily,
    /// Noise standard deviation.
    pub sigma: f64,
    pub n_train: usize,
    pub n_calib: usize,
    pub n_test: usize,
    pub seed: u64,
}

/// Training, calibration and test samples drawn in that order from one stream.
#[derive(Debug, Clone)]
pub struct Samples {
    pub train: Dataset,
    pub calib: Dataset,
    pub test: Dataset,
}

fn draw(family: DgpFamily, sigma: f64, n: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let (lo, hi) = family.domain();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.random_range(lo..=hi);
        let eps: f64 = StandardNormal.sample(rng);
        xs.push(x);
        ys.push(family.mean(x) + sigma * eps);
    }
    Dataset::from_scalar(xs, ys)
}

/// Covariates uniform on the family's domain, `Y = mean(X) + sigma * N(0, 1)`.
pub fn generate(spec: &DgpSpec) -> Result<Samples> {
    if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
        return Err(Error::InvalidDataset(format!(
            "sigma must be >= 0, got {}",
            spec.sigma
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(Samples {
        train: draw(spec.family, spec.sigma, spec.n_train, &mut rng)?,
        calib: draw(spec.family, spec.sigma, spec.n_calib, &mut rng)?,
        test: draw(spec.family, spec.sigma, spec.n_test, &mut rng)?,
    })
}

fn generate_family(spec: &DgpSpec, family: DgpFamily) -> Result<Samples> {
    if spec.family != family {
        return Err(Error::InvalidDataset(format!(
            "expected {family:?} spec, got {:?}",
            spec.family
        )));
    }
    generate(spec)
}

pub fn gen_piecewise_sine(spec: &DgpSpec) -> Result<Samples> {
    generate_family(spec, DgpFamily::PiecewiseSine)
}

pub fn gen_sine_cubed(spec: &DgpSpec) -> Result<Samples> {
    generate_family(spec, DgpFamily::SineCubed)
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic seed for a cell coordinate tuple.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(mix(master ^ 0x9E37_79B9_7F4A_7C15), |acc, &p| {
            mix(acc.wrapping_add(0x9E37_79B9_7F4A_7C15) ^ mix(p))
        })
}

/// Which pipeline computes the prediction sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Cached profiles with binary-search quantiles.
    #[default]
    Fast,
    /// Brute-force recomputation; for cross-checks at small scale.
    Naive,
}

/// Everything except the data-generating process.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub bank: Vec<ModelSpec>,
    pub kernel: KernelSpec,
    pub alpha: f64,
    pub grid: GammaGrid,
    pub engine: Engine,
}

/// One test point of one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRecord {
    pub x: f64,
    pub y: f64,
    pub true_mean: f64,
    pub union: IntervalUnion,
    /// Model selected at the largest admissible level.
    pub selected_model: usize,
    pub modal_model: usize,
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub fallback: bool,
    pub trace: SelectionTrace,
}

/// Per-replication averages over test points.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationMetrics {
    pub ensemble_len: f64,
    pub ensemble_coverage: f64,
    /// Calibrated single-model intervals (the procedure run with one model).
    pub single_len: Vec<f64>,
    pub single_coverage: Vec<f64>,
    /// Plain localized interval at level alpha, no calibration.
    pub uncalibrated_len: Vec<f64>,
    pub uncalibrated_coverage: Vec<f64>,
    /// Unweighted split-conformal interval at level alpha.
    pub split_len: Vec<f64>,
    pub split_coverage: Vec<f64>,
    pub fallback_count: usize,
    pub points: Vec<PointRecord>,
}

struct PointOutcome {
    ensemble: LcpmsResult,
    singles: Vec<IntervalUnion>,
    uncalibrated: Vec<(f64, bool)>,
}

fn evaluate_point(
    ctx: &SelectionContext<'_>,
    calib: &Dataset,
    models: &[Box<dyn Regressor>],
    method: &MethodSpec,
    x: &[f64],
    y: f64,
) -> Result<PointOutcome> {
    let kk = models.len();
    let (ensemble, singles) = match method.engine {
        Engine::Fast => {
            let mut subsets = vec![(0..kk).collect::<Vec<_>>()];
            subsets.extend((0..kk).map(|k| vec![k]));
            let mut res = ctx.predict_subsets(x, method.alpha, &method.grid, &subsets)?;
            let singles = res.drain(1..).map(|r| r.union).collect();
            (res.pop().expect("ensemble result"), singles)
        }
        Engine::Naive => {
            let run = |ms: &[Box<dyn Regressor>]| {
                oracle::naive_lcpms(calib, x, method.alpha, &method.grid, ms, &method.kernel)
            };
            let ensemble = run(models)?.result;
            let singles = (0..kk)
                .map(|k| run(&models[k..k + 1]).map(|o| o.result.union))
                .collect::<Result<Vec<_>>>()?;
            (ensemble, singles)
        }
    };
    let uncalibrated = (0..kk)
        .map(|k| {
            let iv = ctx.model_interval(k, x, method.alpha)?;
            Ok((iv.length(), iv.contains(y)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PointOutcome {
        ensemble,
        singles,
        uncalibrated,
    })
}

/// Fits the bank on the training sample and evaluates every test point.
/// Test points run in parallel; results are reduced in test order.
pub fn run_replication(
    dgp: &DgpSpec,
    method: &MethodSpec,
    keep_points: bool,
) -> Result<ReplicationMetrics> {
    let samples = generate(dgp)?;
    let models = build_model_bank(&method.bank, &samples.train)?;
    let ctx = SelectionContext::new(&samples.calib, &models, method.kernel)?;
    let kk = models.len();
    let split_hw = models
        .iter()
        .map(|f| {
            let res: Vec<f64> = samples
                .calib
                .iter()
                .map(|(x, y)| y - f.predict(x))
                .collect();
            split_conformal_half_width(&res, method.alpha)
        })
        .collect::<Result<Vec<_>>>()?;

    let outcomes: Vec<PointOutcome> = (0..samples.test.len())
        .into_par_iter()
        .map(|t| {
            evaluate_point(
                &ctx,
                &samples.calib,
                &models,
                method,
                samples.test.x(t),
                samples.test.y(t),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let m = outcomes.len() as f64;
    let mut metrics = ReplicationMetrics {
        ensemble_len: 0.0,
        ensemble_coverage: 0.0,
        single_len: vec![0.0; kk],
        single_coverage: vec![0.0; kk],
        uncalibrated_len: vec![0.0; kk],
        uncalibrated_coverage: vec![0.0; kk],
        split_len: vec![0.0; kk],
        split_coverage: vec![0.0; kk],
        fallback_count: 0,
        points: Vec::new(),
    };
    for (t, out) in outcomes.into_iter().enumerate() {
        let (x, y) = (samples.test.x(t), samples.test.y(t));
        metrics.ensemble_len += out.ensemble.union.measure();
        metrics.ensemble_coverage += out.ensemble.union.contains(y) as u8 as f64;
        metrics.fallback_count += out.ensemble.bounds.flagged() as usize;
        for k in 0..kk {
            metrics.single_len[k] += out.singles[k].measure();
            metrics.single_coverage[k] += out.singles[k].contains(y) as u8 as f64;
            metrics.uncalibrated_len[k] += out.uncalibrated[k].0;
            metrics.uncalibrated_coverage[k] += out.uncalibrated[k].1 as u8 as f64;
            let split = Interval::new(models[k].predict(x), split_hw[k]);
            metrics.split_len[k] += split.length();
            metrics.split_coverage[k] += split.contains(y) as u8 as f64;
        }
        if keep_points {
            let r = out.ensemble;
            metrics.points.push(PointRecord {
                x: x[0],
                y,
                true_mean: dgp.family.mean(x[0]),
                selected_model: r.trace.model_at_gamma_hi().unwrap_or(0),
                modal_model: r.trace.modal_model().unwrap_or(0),
                gamma_lo: r.bounds.gamma_lo,
                gamma_hi: r.bounds.gamma_hi,
                fallback: r.bounds.flagged(),
                union: r.union,
                trace: r.trace,
            });
        }
    }
    metrics.ensemble_len /= m;
    metrics.ensemble_coverage /= m;
    for v in metrics
        .single_len
        .iter_mut()
        .chain(&mut metrics.single_coverage)
        .chain(&mut metrics.uncalibrated_len)
        .chain(&mut metrics.uncalibrated_coverage)
        .chain(&mut metrics.split_len)
        .chain(&mut metrics.split_coverage)
    {
        *v /= m;
    }
    Ok(metrics)
}

/// Baseline flavour reported as `best_single`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Single-model run of the full calibration procedure.
    Calibrated,
    /// Plain localized interval at level alpha.
    Uncalibrated,
    /// Unweighted split-conformal interval at level alpha.
    #[default]
    Split,
}

impl ReplicationMetrics {
    /// Per-model `(lengths, coverages)` of the given baseline flavour.
    pub fn baseline(&self, which: Baseline) -> (&[f64], &[f64]) {
        match which {
            Baseline::Calibrated => (&self.single_len, &self.single_coverage),
            Baseline::Uncalibrated => (&self.uncalibrated_len, &self.uncalibrated_coverage),
            Baseline::Split => (&self.split_len, &self.split_coverage),
        }
    }
}

/// Index of the shortest mean length (lowest index on ties) and that length.
fn argmin(lens: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for k in 1..lens.len() {
        if lens[k] < lens[best] {
            best = k;
        }
    }
    (best, lens[best])
}

/// Replication seeds for `dgp.seed` as master seed.
fn replication_spec(dgp: &DgpSpec, rep: usize) -> DgpSpec {
    DgpSpec {
        seed: derive_seed(dgp.seed, &[rep as u64]),
        ..*dgp
    }
}

/// The single model with the shortest mean interval of the given flavour
/// across `n_reps` replications, chosen in hindsight. Returns
/// `(index, mean length)`.
pub fn best_single_baseline(
    dgp: &DgpSpec,
    method: &MethodSpec,
    baseline: Baseline,
    n_reps: usize,
) -> Result<(usize, f64)> {
    if n_reps == 0 {
        return Err(Error::Empty("replications"));
    }
    let mut sums = vec![0.0; method.bank.len()];
    for rep in 0..n_reps {
        let m = run_replication(&replication_spec(dgp, rep), method, false)?;
        for (s, l) in sums.iter_mut().zip(m.baseline(baseline).0) {
            *s += l;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / n_reps as f64).collect();
    Ok(argmin(&means))
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub n: usize,
    pub sigma: f64,
    pub localizer_bw: f64,
    pub ensemble_len: f64,
    pub best_single_len: f64,
    pub ensemble_coverage: f64,
    /// 1-based index into the bank.
    pub best_single_index: usize,
    pub n_reps: usize,
}

/// A matrix of `(n, sigma, localizer bandwidth)` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSpec {
    pub family: DgpFamily,
    pub ns: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub bws: Vec<f64>,
    pub kernel_family: KernelFamily,
    pub bank: Vec<ModelSpec>,
    pub alpha: f64,
    pub grid: GammaGrid,
    pub n_reps: usize,
    pub n_test: usize,
    /// Training size; `None` means equal to the calibration size.
    pub n_train: Option<usize>,
    pub master_seed: u64,
    pub baseline: Baseline,
    pub engine: Engine,
}

impl TableSpec {
    /// Cells sorted by `(n, sigma, localizer_bw)`.
    pub fn cells(&self) -> Vec<(usize, f64, f64)> {
        let mut cells: Vec<(usize, f64, f64)> = self
            .ns
            .iter()
            .flat_map(|&n| {
                self.sigmas
                    .iter()
                    .flat_map(move |&s| self.bws.iter().map(move |&b| (n, s, b)))
            })
            .collect();
        cells.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.total_cmp(&b.2))
        });
        cells.dedup();
        cells
    }

    pub fn method(&self, bw: f64) -> Result<MethodSpec> {
        Ok(MethodSpec {
            bank: self.bank.clone(),
            kernel: KernelSpec::new(self.kernel_family, bw)?,
            alpha: self.alpha,
            grid: self.grid.clone(),
            engine: self.engine,
        })
    }

    /// Data-generating process of one cell; `seed` is the cell's master seed.
    pub fn dgp(&self, n: usize, sigma: f64, bw: f64) -> DgpSpec {
        DgpSpec {
            family: self.family,
            sigma,
            n_train: self.n_train.unwrap_or(n),
            n_calib: n,
            n_test: self.n_test,
            seed: derive_seed(self.master_seed, &[n as u64, sigma.to_bits(), bw.to_bits()]),
        }
    }
}

/// Aggregated results of one cell, plus the first replication's point records
/// when requested.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub row: ResultRow,
    pub single_len: Vec<f64>,
    pub single_coverage: Vec<f64>,
    pub rep_coverage: Vec<f64>,
    pub fallback_count: usize,
    pub first_points: Vec<PointRecord>,
}

pub fn run_cell(
    table: &TableSpec,
    n: usize,
    sigma: f64,
    bw: f64,
    keep_first_points: bool,
) -> Result<CellOutcome> {
    if table.n_reps == 0 {
        return Err(Error::Empty("replications"));
    }
    let method = table.method(bw)?;
    let dgp = table.dgp(n, sigma, bw);
    let kk = table.bank.len();
    let mut ens_len = 0.0;
    let mut ens_cov = 0.0;
    let mut single_len = vec![0.0; kk];
    let mut single_cov = vec![0.0; kk];
    let mut rep_coverage = Vec::with_capacity(table.n_reps);
    let mut fallback_count = 0;
    let mut first_points = Vec::new();
    for rep in 0..table.n_reps {
        let keep = keep_first_points && rep == 0;
        let mut m = run_replication(&replication_spec(&dgp, rep), &method, keep)?;
        ens_len += m.ensemble_len;
        ens_cov += m.ensemble_coverage;
        rep_coverage.push(m.ensemble_coverage);
        fallback_count += m.fallback_count;
        let (lens, covs) = m.baseline(table.baseline);
        for k in 0..kk {
            single_len[k] += lens[k];
            single_cov[k] += covs[k];
        }
        if keep {
            first_points = std::mem::take(&mut m.points);
        }
    }
    let r = table.n_reps as f64;
    single_len.iter_mut().for_each(|v| *v /= r);
    single_cov.iter_mut().for_each(|v| *v /= r);
    let (best, best_len) = argmin(&single_len);
    Ok(CellOutcome {
        row: ResultRow {
            n,
            sigma,
            localizer_bw: bw,
            ensemble_len: ens_len / r,
            best_single_len: best_len,
            ensemble_coverage: ens_cov / r,
            best_single_index: best + 1,
            n_reps: table.n_reps,
        },
        single_len,
        single_coverage: single_cov,
        rep_coverage,
        fallback_count,
        first_points,
    })
}

/// Runs every cell; rows come back sorted by `(n, sigma, localizer_bw)`.
pub fn run_table(table: &TableSpec) -> Result<Vec<ResultRow>> {
    let cells = table.cells();
    if cells.is_empty() {
        return Err(Error::Empty("experiment matrix"));
    }
    cells
        .into_iter()
        .map(|(n, sigma, bw)| {
            log::info!("cell n={n} sigma={sigma} bw={bw}");
            run_cell(table, n, sigma, bw, false)
                .map(|c| c.row)
                .map_err(|e| Error::Cell {
                    n,
                    sigma,
                    bw,
                    source: Box::new(e),
                })
        })
        .collect()
}
