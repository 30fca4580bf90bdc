//! JSON run configuration for the command-line tool.

use std::path::PathBuf;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::GammaGrid;
use crate::kernel::KernelFamily;
use crate::models::{nw5, parametric10, ModelSpec};
use crate::simulation::{Baseline, DgpFamily, Engine, TableSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Table,
    Predict,
    Figure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankName {
    Parametric10,
    Nw5,
    Custom,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    min: f64,
    max: f64,
    step: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrix {
    n: Option<Vec<usize>>,
    sigma: Option<Vec<f64>>,
    localizer_bw: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Mode,
    bank: BankName,
    models: Option<Vec<ModelSpec>>,
    dgp: Option<DgpFamily>,
    matrix: Option<RawMatrix>,
    alpha: Option<f64>,
    grid: Option<RawGrid>,
    kernel: Option<KernelFamily>,
    n_reps: Option<usize>,
    n_test: Option<usize>,
    n_train: Option<usize>,
    master_seed: Option<u64>,
    baseline: Option<Baseline>,
    output: Option<PathBuf>,
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub bank_name: BankName,
    pub table: TableSpec,
    pub output: Option<PathBuf>,
}

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_REPS: usize = 100;
pub const DEFAULT_TEST: usize = 200;
pub const DEFAULT_KERNEL: KernelFamily = KernelFamily::Gaussian;

fn positive_list<T: Copy + PartialOrd + Default>(
    field: &str,
    values: Vec<T>,
    finite: impl Fn(T) -> bool,
) -> Result<Vec<T>> {
    if values.is_empty() {
        return Err(Error::config(field, "must not be empty"));
    }
    if values.iter().any(|&v| !(v > T::default()) || !finite(v)) {
        return Err(Error::config(field, "all entries must be positive"));
    }
    Ok(values)
}

/// Parses and validates a JSON configuration, filling defaults.
///
/// Defaults: `alpha` 0.1, grid `0.01..=0.99` step 0.01, Gaussian localizer,
/// 100 replications, 200 test points, training size equal to the
/// calibration size. Without an explicit matrix the `nw5` bank runs the
/// `sin(x³)` study over `n ∈ {200, 500, 1000, 2000}`, `sigma ∈ {0.1, 0.3}`,
/// bandwidth 0.3; `parametric10` runs the piecewise sine study over
/// `n ∈ {200, 500, 1000}`, `sigma ∈ {0.1, 0.3}`, bandwidths `{0.1, 0.3}`.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        let field = msg
            .split('`')
            .nth(1)
            .map(str::to_string)
            .unwrap_or_else(|| "<document>".to_string());
        Error::config(field, msg)
    })?;

    let (bank, default_dgp, default_matrix): (Vec<ModelSpec>, Option<DgpFamily>, RawMatrix) =
        match raw.bank {
            BankName::Nw5 => (
                nw5(),
                Some(DgpFamily::SineCubed),
                RawMatrix {
                    n: Some(vec![200, 500, 1000, 2000]),
                    sigma: Some(vec![0.1, 0.3]),
                    localizer_bw: Some(vec![0.3]),
                },
            ),
            BankName::Parametric10 => (
                parametric10(),
                Some(DgpFamily::PiecewiseSine),
                RawMatrix {
                    n: Some(vec![200, 500, 1000]),
                    sigma: Some(vec![0.1, 0.3]),
                    localizer_bw: Some(vec![0.1, 0.3]),
                },
            ),
            BankName::Custom => {
                let models = raw
                    .models
                    .clone()
                    .ok_or_else(|| Error::config("models", "required when bank is custom"))?;
                if models.is_empty() {
                    return Err(Error::config("models", "must not be empty"));
                }
                (models, None, RawMatrix::default())
            }
        };
    if raw.bank != BankName::Custom && raw.models.is_some() {
        return Err(Error::config("models", "only allowed when bank is custom"));
    }
    let family = raw
        .dgp
        .or(default_dgp)
        .ok_or_else(|| Error::config("dgp", "required when bank is custom"))?;

    let matrix = raw.matrix.unwrap_or_default();
    let ns = matrix
        .n
        .or(default_matrix.n)
        .ok_or_else(|| Error::config("matrix.n", "required when bank is custom"))?;
    let sigmas = matrix
        .sigma
        .or(default_matrix.sigma)
        .ok_or_else(|| Error::config("matrix.sigma", "required when bank is custom"))?;
    let bws = matrix
        .localizer_bw
        .or(default_matrix.localizer_bw)
        .ok_or_else(|| Error::config("matrix.localizer_bw", "required when bank is custom"))?;
    let ns = positive_list("matrix.n", ns, |_| true)?;
    let sigmas = positive_list("matrix.sigma", sigmas, f64::is_finite)?;
    let bws = positive_list("matrix.localizer_bw", bws, f64::is_finite)?;

    let alpha = raw.alpha.unwrap_or(DEFAULT_ALPHA);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config("alpha", format!("{alpha} is outside (0, 1)")));
    }
    let grid = match raw.grid {
        None => GammaGrid::default(),
        Some(g) => {
            if !(g.step > 0.0) {
                return Err(Error::config("grid.step", "must be positive"));
            }
            GammaGrid::uniform(g.min, g.max, g.step)
                .map_err(|e| Error::config("grid", e.to_string()))?
        }
    };
    let n_reps = raw.n_reps.unwrap_or(DEFAULT_REPS);
    if n_reps == 0 {
        return Err(Error::config("n_reps", "must be positive"));
    }
    let n_test = raw.n_test.unwrap_or(DEFAULT_TEST);
    if n_test == 0 {
        return Err(Error::config("n_test", "must be positive"));
    }
    if raw.n_train == Some(0) {
        return Err(Error::config("n_train", "must be positive"));
    }

    Ok(RunConfig {
        mode: raw.mode,
        bank_name: raw.bank,
        table: TableSpec {
            family,
            ns,
            sigmas,
            bws,
            kernel_family: raw.kernel.unwrap_or(DEFAULT_KERNEL),
            bank,
            alpha,
            grid,
            n_reps,
            n_test,
            n_train: raw.n_train,
            master_seed: raw.master_seed.unwrap_or(0),
            baseline: raw.baseline.unwrap_or_default(),
            engine: Engine::Fast,
        },
        output: raw.output,
    })
}
