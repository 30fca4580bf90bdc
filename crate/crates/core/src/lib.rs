//! Localized conformal prediction with per-point model selection.
//!
//! Given a bank of fixed regression functions and a calibration sample, the
//! procedure produces a prediction set for a new covariate that adapts both
//! to local residual behaviour (through a localizer kernel) and to which model
//! fits best nearby, while keeping finite-sample marginal coverage
//! `P(Y ∈ C(X)) >= 1 - alpha` under exchangeability.
//!
//! ```
//! use lcpms::{Dataset, GammaGrid, KernelSpec, Regressor, SelectionContext};
//!
//! let xs: Vec<f64> = (0..40).map(|i| i as f64 / 10.0).collect();
//! let ys: Vec<f64> = xs.iter().map(|x| x.sin() + 0.1 * (7.0 * x).cos()).collect();
//! let calib = Dataset::from_scalar(xs, ys).unwrap();
//! let models: Vec<Box<dyn Regressor>> = vec![
//!     Box::new(|x: &[f64]| x[0].sin()),
//!     Box::new(|x: &[f64]| 0.5 * x[0]),
//! ];
//! let ctx = SelectionContext::new(&calib, &models, KernelSpec::gaussian(0.5).unwrap()).unwrap();
//! let out = ctx.predict(&[1.3], 0.1, &GammaGrid::default()).unwrap();
//! assert!(out.union.measure() > 0.0);
//! ```

// `!(a > b)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod error;
pub mod grid;
pub mod interval;
pub mod kernel;
pub mod lcp;
pub mod models;
pub mod oracle;
pub mod output;
pub mod selection;
pub mod simulation;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use grid::GammaGrid;
pub use interval::{interval_length, union_insert, Interval, IntervalUnion};
pub use kernel::{localizer_weights, KernelFamily, KernelSpec};
pub use lcp::{build_profile, lcp_interval, weighted_quantile, ResidualProfile};
pub use models::{build_model_bank, LocalSinusoidModel, ModelSpec, NwModel, Regressor};
pub use selection::{
    gamma_bounds, lcpms_interval, safe_index_set, surrogate_pair, GammaBounds, LcpmsResult,
    SafeSet, SelectionContext, SelectionTrace, SurrogatePair, TraceStep,
};
