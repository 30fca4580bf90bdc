//! Candidate regression functions: windowed sinusoid least squares and
//! Nadaraya–Watson smoothers. Models are fit once on a training sample and
//! then treated as fixed functions.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// A fixed regression function of a covariate vector.
pub trait Regressor: Send + Sync {
    fn predict(&self, x: &[f64]) -> f64;

    fn label(&self) -> String {
        "model".to_string()
    }
}

impl<F> Regressor for F
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn predict(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

const SINGULAR_RTOL: f64 = 1e-10;

/// `A sin(λx + φ)` fitted by least squares on training points in `[x - h, x + h]`,
/// refitted at every query.
///
/// Uses the linear reparameterization `a sin(λx) + b cos(λx)`. When the window
/// holds fewer than two points or its normal equations are singular the fit
/// uses all training points; if that is singular too, the training mean.
#[derive(Debug, Clone)]
pub struct LocalSinusoidModel {
    lambda: f64,
    window: f64,
    xs: Vec<f64>,
    ys: Vec<f64>,
    global: Option<(f64, f64)>,
    mean: f64,
}

impl LocalSinusoidModel {
    pub fn new(lambda: f64, window: f64, train: &Dataset) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) || !(window > 0.0 && window.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "sinusoid needs positive lambda and window, got ({lambda}, {window})"
            )));
        }
        if train.dim() != 1 {
            return Err(Error::InvalidModel(
                "sinusoid model requires 1-d covariates".into(),
            ));
        }
        let order = crate::lcp::stable_argsort(train.xs_flat());
        let xs: Vec<f64> = order.iter().map(|&i| train.x(i)[0]).collect();
        let ys: Vec<f64> = order.iter().map(|&i| train.y(i)).collect();
        let global = fit_sinusoid(lambda, xs.iter().copied().zip(ys.iter().copied()));
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        Ok(Self {
            lambda,
            window,
            xs,
            ys,
            global,
            mean,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    /// Indices of training points with `|x_i - x| <= window`.
    fn window_range(&self, x: f64) -> std::ops::Range<usize> {
        let inside = |v: f64| (v - x).abs() <= self.window;
        let mut start = self.xs.partition_point(|&v| v < x - self.window);
        while start > 0 && inside(self.xs[start - 1]) {
            start -= 1;
        }
        while start < self.xs.len() && !inside(self.xs[start]) && self.xs[start] < x {
            start += 1;
        }
        let mut end = start;
        while end < self.xs.len() && inside(self.xs[end]) {
            end += 1;
        }
        start..end
    }

    /// Window coefficients `(a, b)`, or `None` when the fallback applies.
    pub fn window_coefficients(&self, x: f64) -> Option<(f64, f64)> {
        let r = self.window_range(x);
        if r.len() < 2 {
            return None;
        }
        fit_sinusoid(
            self.lambda,
            self.xs[r.clone()]
                .iter()
                .copied()
                .zip(self.ys[r].iter().copied()),
        )
    }

    pub fn predict_scalar(&self, x: f64) -> f64 {
        match self.window_coefficients(x).or(self.global) {
            Some((a, b)) => {
                let t = self.lambda * x;
                a * t.sin() + b * t.cos()
            }
            None => self.mean,
        }
    }
}

/// Solves the 2x2 normal equations for `y ≈ a sin(λx) + b cos(λx)`.
fn fit_sinusoid(lambda: f64, points: impl Iterator<Item = (f64, f64)>) -> Option<(f64, f64)> {
    let (mut ss, mut sc, mut cc, mut sy, mut cy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut count = 0usize;
    for (x, y) in points {
        let (s, c) = (lambda * x).sin_cos();
        ss += s * s;
        sc += s * c;
        cc += c * c;
        sy += s * y;
        cy += c * y;
        count += 1;
    }
    let det = ss * cc - sc * sc;
    let scale = ss * cc;
    if count < 2 || !(scale > 0.0) || det / scale < SINGULAR_RTOL {
        return None;
    }
    Some(((cc * sy - sc * cy) / det, (ss * cy - sc * sy) / det))
}

impl Regressor for LocalSinusoidModel {
    fn predict(&self, x: &[f64]) -> f64 {
        self.predict_scalar(x[0])
    }

    fn label(&self) -> String {
        format!("sinusoid(lambda={}, h={})", self.lambda, self.window)
    }
}

/// Nadaraya–Watson smoother with Gaussian kernel `exp(-u²/2)`, `u = ‖x - x_i‖ / h`.
#[derive(Debug, Clone)]
pub struct NwModel {
    bandwidth: f64,
    train: Dataset,
}

impl NwModel {
    pub fn new(bandwidth: f64, train: &Dataset) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "Nadaraya-Watson bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(Self {
            bandwidth,
            train: train.clone(),
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

impl Regressor for NwModel {
    fn predict(&self, x: &[f64]) -> f64 {
        let inv = 1.0 / (2.0 * self.bandwidth * self.bandwidth);
        let (mut num, mut den) = (0.0, 0.0);
        for (xi, yi) in self.train.iter() {
            let w = (-sq_dist(xi, x) * inv).exp();
            num += w * yi;
            den += w;
        }
        if den > 0.0 {
            return num / den;
        }
        // every weight underflowed: nearest neighbour
        let mut best = (f64::INFINITY, self.train.y(0));
        for (xi, yi) in self.train.iter() {
            let d = sq_dist(xi, x);
            if d < best.0 {
                best = (d, yi);
            }
        }
        best.1
    }

    fn label(&self) -> String {
        format!("nadaraya_watson(h={})", self.bandwidth)
    }
}

/// Descriptor of one candidate model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Sinusoid { lambda: f64, window: f64 },
    NadarayaWatson { bandwidth: f64 },
}

impl ModelSpec {
    pub fn build(&self, train: &Dataset) -> Result<Box<dyn Regressor>> {
        Ok(match *self {
            ModelSpec::Sinusoid { lambda, window } => {
                Box::new(LocalSinusoidModel::new(lambda, window, train)?)
            }
            ModelSpec::NadarayaWatson { bandwidth } => Box::new(NwModel::new(bandwidth, train)?),
        })
    }
}

/// Frequencies `{1, ..., 5}` × windows `{0.5, 1}`, frequency-major: 10 models.
pub fn parametric10() -> Vec<ModelSpec> {
    (1..=5)
        .flat_map(|l| {
            [0.5, 1.0].map(|w| ModelSpec::Sinusoid {
                lambda: l as f64,
                window: w,
            })
        })
        .collect()
}

/// Nadaraya–Watson bandwidths `{0.1, 0.2, 0.4, 0.8, 1.6}`.
pub fn nw5() -> Vec<ModelSpec> {
    [0.1, 0.2, 0.4, 0.8, 1.6]
        .map(|h| ModelSpec::NadarayaWatson { bandwidth: h })
        .to_vec()
}

/// Fits every model in `specs` on `train`. Bank order is spec order, which
/// matters: ties in interval length resolve to the lowest index.
pub fn build_model_bank(specs: &[ModelSpec], train: &Dataset) -> Result<Vec<Box<dyn Regressor>>> {
    if specs.is_empty() {
        return Err(Error::Empty("model bank specification"));
    }
    specs.iter().map(|s| s.build(train)).collect()
}
