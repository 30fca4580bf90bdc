//! C ABI for `lcpms`.
//!
//! Every fallible function returns an [`LcpmsStatus`]; on failure a
//! description is available from [`lcpms_last_error_message`] on the same
//! thread. Handles are opaque and must be released with their matching
//! `*_free` function. Panics never cross the boundary; they surface as
//! `LCPMS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::mem::ManuallyDrop;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lcpms::config::parse_config;
use lcpms::models::{build_model_bank, nw5, parametric10, ModelSpec};
use lcpms::output::format_results;
use lcpms::simulation::run_table;
use lcpms::{
    Dataset, Error, GammaGrid, KernelFamily, KernelSpec, LcpmsResult, Regressor, SelectionContext,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcpmsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcpmsKernel {
    Gaussian = 0,
    Exponential = 1,
}

/// A model supplied by the caller: returns `f(x)` for a covariate of length
/// `dim`. Must be safe to call from any thread while the predictor lives.
pub type LcpmsModelFn =
    Option<unsafe extern "C" fn(x: *const f64, dim: usize, user_data: *mut c_void) -> f64>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> LcpmsStatus {
    match err {
        Error::Config { .. } | Error::Json(_) => LcpmsStatus::Config,
        Error::Io { .. } => LcpmsStatus::Io,
        _ => LcpmsStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LcpmsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LcpmsStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            LcpmsStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            LcpmsStatus::InvalidArgument
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            LcpmsStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn dataset(
    xs: *const f64,
    ys: *const f64,
    n: usize,
    dim: usize,
    what: &'static str,
) -> Result<Dataset, Failure> {
    let xs = slice(xs, n * dim, what)?;
    let ys = slice(ys, n, what)?;
    Ok(Dataset::new(dim, xs.to_vec(), ys.to_vec())?)
}

unsafe fn c_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Arg(format!("{what} is not valid UTF-8")))
}

fn kernel(family: LcpmsKernel, bandwidth: f64) -> Result<KernelSpec, Failure> {
    let family = match family {
        LcpmsKernel::Gaussian => KernelFamily::Gaussian,
        LcpmsKernel::Exponential => KernelFamily::Exponential,
    };
    Ok(KernelSpec::new(family, bandwidth)?)
}

/// Fitted bank plus calibration data with every covariate-independent
/// quantity precomputed.
pub struct LcpmsPredictor {
    // Borrows from `calib` and `models`, which are heap allocations owned by
    // this struct; dropped first in `Drop`.
    ctx: ManuallyDrop<SelectionContext<'static>>,
    calib: *mut Dataset,
    models: *mut [Box<dyn Regressor>],
    labels: Vec<CString>,
}

impl LcpmsPredictor {
    fn new(
        calib: Dataset,
        models: Vec<Box<dyn Regressor>>,
        kernel: KernelSpec,
    ) -> Result<Self, Failure> {
        let labels = models
            .iter()
            .map(|m| CString::new(m.label().replace('\0', " ")).unwrap_or_default())
            .collect();
        let calib = Box::into_raw(Box::new(calib));
        let models = Box::into_raw(models.into_boxed_slice());
        // SAFETY: both pointers come from `Box::into_raw` above and stay
        // valid until `Drop`, which releases the context before them.
        let ctx = unsafe { SelectionContext::new(&*calib, &*models, kernel) };
        match ctx {
            Ok(ctx) => Ok(Self {
                ctx: ManuallyDrop::new(ctx),
                calib,
                models,
                labels,
            }),
            Err(e) => {
                // SAFETY: nothing borrows the allocations any more.
                unsafe {
                    drop(Box::from_raw(models));
                    drop(Box::from_raw(calib));
                }
                Err(e.into())
            }
        }
    }
}

impl Drop for LcpmsPredictor {
    fn drop(&mut self) {
        // SAFETY: the context is dropped before the data it borrows, and the
        // raw pointers were produced by `Box::into_raw` in `new`.
        unsafe {
            ManuallyDrop::drop(&mut self.ctx);
            drop(Box::from_raw(self.models));
            drop(Box::from_raw(self.calib));
        }
    }
}

/// Result of one prediction.
pub struct LcpmsPrediction {
    result: LcpmsResult,
}

struct CallbackModel {
    f: unsafe extern "C" fn(*const f64, usize, *mut c_void) -> f64,
    user_data: *mut c_void,
    index: usize,
}

// SAFETY: the caller promises thread-safe callbacks (see `LcpmsModelFn`).
unsafe impl Send for CallbackModel {}
unsafe impl Sync for CallbackModel {}

impl Regressor for CallbackModel {
    fn predict(&self, x: &[f64]) -> f64 {
        unsafe { (self.f)(x.as_ptr(), x.len(), self.user_data) }
    }

    fn label(&self) -> String {
        format!("callback[{}]", self.index)
    }
}

fn bank_from_spec(spec: &str) -> Result<Vec<ModelSpec>, Failure> {
    match spec.trim() {
        "nw5" => Ok(nw5()),
        "parametric10" => Ok(parametric10()),
        json => serde_json::from_str(json).map_err(|e| Failure::Core(Error::Json(e))),
    }
}

/// Builds a predictor whose models are fitted on the training sample.
///
/// `bank` is `"nw5"`, `"parametric10"`, or a JSON array of model specs such as
/// `[{"type": "nadaraya_watson", "bandwidth": 0.2}]`. Covariates are row-major
/// with `dim` columns; the built-in model families require `dim == 1`.
///
/// # Safety
/// Array arguments must point to at least the stated number of elements and
/// `bank` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lcpms_predictor_new(
    train_x: *const f64,
    train_y: *const f64,
    n_train: usize,
    calib_x: *const f64,
    calib_y: *const f64,
    n_calib: usize,
    dim: usize,
    bank: *const c_char,
    kernel_family: LcpmsKernel,
    kernel_bandwidth: f64,
    out: *mut *mut LcpmsPredictor,
) -> LcpmsStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = ptr::null_mut();
        let train = dataset(train_x, train_y, n_train, dim, "training data")?;
        let calib = dataset(calib_x, calib_y, n_calib, dim, "calibration data")?;
        let specs = bank_from_spec(c_str(bank, "bank")?)?;
        let models = build_model_bank(&specs, &train)?;
        let p = LcpmsPredictor::new(calib, models, kernel(kernel_family, kernel_bandwidth)?)?;
        *out = Box::into_raw(Box::new(p));
        Ok(())
    })
}

/// Builds a predictor from caller-supplied model callbacks; `user_data` may be
/// null or point to `n_models` opaque pointers passed back to each callback.
///
/// # Safety
/// `models` must hold `n_models` non-null function pointers that remain
/// callable, from any thread, until the predictor is freed.
#[no_mangle]
pub unsafe extern "C" fn lcpms_predictor_new_callbacks(
    calib_x: *const f64,
    calib_y: *const f64,
    n_calib: usize,
    dim: usize,
    models: *const LcpmsModelFn,
    user_data: *const *mut c_void,
    n_models: usize,
    kernel_family: LcpmsKernel,
    kernel_bandwidth: f64,
    out: *mut *mut LcpmsPredictor,
) -> LcpmsStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = ptr::null_mut();
        let calib = dataset(calib_x, calib_y, n_calib, dim, "calibration data")?;
        if n_models == 0 {
            return Err(Failure::Arg("at least one model is required".into()));
        }
        if models.is_null() {
            return Err(Failure::Null("models"));
        }
        let fns = std::slice::from_raw_parts(models, n_models);
        let bank = fns
            .iter()
            .enumerate()
            .map(|(index, f)| {
                let f = f.ok_or(Failure::Null("model callback"))?;
                let data = if user_data.is_null() {
                    ptr::null_mut()
                } else {
                    *user_data.add(index)
                };
                Ok(Box::new(CallbackModel {
                    f,
                    user_data: data,
                    index,
                }) as Box<dyn Regressor>)
            })
            .collect::<Result<Vec<_>, Failure>>()?;
        let p = LcpmsPredictor::new(calib, bank, kernel(kernel_family, kernel_bandwidth)?)?;
        *out = Box::into_raw(Box::new(p));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from a `lcpms_predictor_new*` call that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn lcpms_predictor_free(p: *mut LcpmsPredictor) {
    if !p.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(p))));
    }
}

/// Number of models in the bank, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live predictor handle.
#[no_mangle]
pub unsafe extern "C" fn lcpms_predictor_n_models(p: *const LcpmsPredictor) -> usize {
    p.as_ref().map_or(0, |p| p.labels.len())
}

/// Label of model `k`, owned by the predictor; null when out of range.
///
/// # Safety
/// `p` must be null or a live predictor handle.
#[no_mangle]
pub unsafe extern "C" fn lcpms_predictor_model_label(
    p: *const LcpmsPredictor,
    k: usize,
) -> *const c_char {
    p.as_ref()
        .and_then(|p| p.labels.get(k))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// Prediction set at `x` (length `dim`). Pass `grid_len == 0` for the default
/// level grid 0.01, 0.02, ..., 0.99.
///
/// # Safety
/// `p` must be a live predictor handle; `x` and `grid` must point to the
/// stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn lcpms_predict(
    p: *const LcpmsPredictor,
    x: *const f64,
    dim: usize,
    alpha: f64,
    grid: *const f64,
    grid_len: usize,
    out: *mut *mut LcpmsPrediction,
) -> LcpmsStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = ptr::null_mut();
        let p = p.as_ref().ok_or(Failure::Null("predictor"))?;
        let x = slice(x, dim, "x")?;
        let grid = if grid_len == 0 {
            GammaGrid::default()
        } else {
            GammaGrid::new(slice(grid, grid_len, "grid")?.to_vec())?
        };
        let result = p.ctx.predict(x, alpha, &grid)?;
        *out = Box::into_raw(Box::new(LcpmsPrediction { result }));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or an unfreed handle from [`lcpms_predict`].
#[no_mangle]
pub unsafe extern "C" fn lcpms_prediction_free(p: *mut LcpmsPrediction) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of disjoint intervals in the prediction set.
///
/// # Safety
/// `p` must be null or a live prediction handle.
#[no_mangle]
pub unsafe extern "C" fn lcpms_prediction_n_parts(p: *const LcpmsPrediction) -> usize {
    p.as_ref().map_or(0, |p| p.result.union.parts().len())
}

/// Endpoints of interval `index`, ascending. Endpoints may be infinite.
///
/// # Safety
/// `p` must be a live prediction handle; `lo` and `hi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lcpms_prediction_part(
    p: *const LcpmsPrediction,
    index: usize,
    lo: *mut f64,
    hi: *mut f64,
) -> LcpmsStatus {
    guard(|| {
        let p = p.as_ref().ok_or(Failure::Null("prediction"))?;
        if lo.is_null() || hi.is_null() {
            return Err(Failure::Null("lo/hi"));
        }
        let parts = p.result.union.parts();
        let &(a, b) = parts
            .get(index)
            .ok_or(Failure::Core(Error::IndexOutOfRange {
                index,
                len: parts.len(),
            }))?;
        *lo = a;
        *hi = b;
        Ok(())
    })
}

/// Total length of the prediction set (NaN for a null handle).
///
/// # Safety
/// `p` must be null or a live prediction handle.
#[no_mangle]
pub unsafe extern "C" fn lcpms_prediction_measure(p: *const LcpmsPrediction) -> f64 {
    p.as_ref().map_or(f64::NAN, |p| p.result.union.measure())
}

/// Admissible level band; `flagged` is set to 1 when a grid-minimum fallback
/// was used.
///
/// # Safety
/// `p` must be a live prediction handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lcpms_prediction_bounds(
    p: *const LcpmsPrediction,
    gamma_lo: *mut f64,
    gamma_hi: *mut f64,
    flagged: *mut i32,
) -> LcpmsStatus {
    guard(|| {
        let p = p.as_ref().ok_or(Failure::Null("prediction"))?;
        if gamma_lo.is_null() || gamma_hi.is_null() || flagged.is_null() {
            return Err(Failure::Null("bounds output"));
        }
        let b = p.result.bounds;
        *gamma_lo = b.gamma_lo;
        *gamma_hi = b.gamma_hi;
        *flagged = b.flagged() as i32;
        Ok(())
    })
}

/// Number of admissible levels recorded in the selection trace.
///
/// # Safety
/// `p` must be null or a live prediction handle.
#[no_mangle]
pub unsafe extern "C" fn lcpms_prediction_n_steps(p: *const LcpmsPrediction) -> usize {
    p.as_ref().map_or(0, |p| p.result.trace.steps.len())
}

/// Trace step `index`: level, selected model (0-based) and its interval.
///
/// # Safety
/// `p` must be a live prediction handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lcpms_prediction_step(
    p: *const LcpmsPrediction,
    index: usize,
    gamma: *mut f64,
    model: *mut usize,
    lo: *mut f64,
    hi: *mut f64,
) -> LcpmsStatus {
    guard(|| {
        let p = p.as_ref().ok_or(Failure::Null("prediction"))?;
        if gamma.is_null() || model.is_null() || lo.is_null() || hi.is_null() {
            return Err(Failure::Null("step output"));
        }
        let steps = &p.result.trace.steps;
        let s = steps
            .get(index)
            .ok_or(Failure::Core(Error::IndexOutOfRange {
                index,
                len: steps.len(),
            }))?;
        *gamma = s.gamma;
        *model = s.model;
        *lo = s.interval.lower();
        *hi = s.interval.upper();
        Ok(())
    })
}

/// Runs the experiment matrix described by a JSON run configuration and
/// returns the results table as CSV in `*csv_out` (free with
/// [`lcpms_string_free`]).
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `csv_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lcpms_run_table(
    config_json: *const c_char,
    csv_out: *mut *mut c_char,
) -> LcpmsStatus {
    guard(|| {
        if csv_out.is_null() {
            return Err(Failure::Null("csv_out"));
        }
        *csv_out = ptr::null_mut();
        let cfg = parse_config(c_str(config_json, "config_json")?)?;
        let csv = format_results(&run_table(&cfg.table)?)?;
        let csv = CString::new(csv).map_err(|_| Failure::Arg("CSV contains NUL".into()))?;
        *csv_out = csv.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lcpms_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lcpms_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lcpms_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
