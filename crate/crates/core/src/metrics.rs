//! Forecast-quality metrics and replication-level aggregation.
//!
//! SSIM here is the single-window (global statistics) form: means, variances
//! and covariance are taken over the whole frame. The stabilizing constants
//! are `c1 = (0.01·R)²`, `c2 = (0.03·R)²` with `R` the pixel range of the
//! *target* frame by default — symmetry is intentionally not guaranteed
//! unless the caller supplies a joint range through [`ssim_with_range`].

use crate::{Error, Mat, Result};

/// `‖estimate − target‖_F / ‖target‖_F`.
pub fn nrmse(estimate: &Mat, target_mean: &Mat) -> Result<f64> {
    if estimate.shape() != target_mean.shape() {
        return Err(Error::shape(
            format!("{:?}", target_mean.shape()),
            format!("{:?}", estimate.shape()),
        ));
    }
    let denom = target_mean.norm();
    if denom <= 1e-12 {
        return Err(Error::Domain("target mean has (near-)zero Frobenius norm".into()));
    }
    Ok((estimate - target_mean).norm() / denom)
}

/// Mean squared error over all pixels.
pub fn mse(x: &Mat, y: &Mat) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(Error::shape(format!("{:?}", y.shape()), format!("{:?}", x.shape())));
    }
    Ok((x - y).norm_squared() / (x.nrows() * x.ncols()) as f64)
}

/// Peak signal-to-noise ratio in dB: `10·log10(c² / MSE)` with `c` the
/// maximum pixel value over both frames. Identical frames give `+∞`.
pub fn psnr(x: &Mat, y: &Mat) -> Result<f64> {
    let err = mse(x, y)?;
    let c = x.iter().chain(y.iter()).copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(psnr_from_mse(err, c))
}

/// The PSNR formula on precomputed pieces; `mse = 0` maps to `+∞`.
pub fn psnr_from_mse(mse: f64, c: f64) -> f64 {
    if mse == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (c * c / mse).log10()
}

/// Global-statistics SSIM with `R` taken from the target frame `y`.
///
/// Errors when the target is constant (`R = 0`); supply an explicit range
/// through [`ssim_with_range`] in that situation.
pub fn ssim(x: &Mat, y: &Mat) -> Result<f64> {
    let r = y.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - y.iter().copied().fold(f64::INFINITY, f64::min);
    if r == 0.0 {
        return Err(Error::Domain(
            "target frame is constant (pixel range 0); pass an explicit range".into(),
        ));
    }
    ssim_with_range(x, y, r)
}

/// Global-statistics SSIM with an explicit pixel range `r > 0`.
pub fn ssim_with_range(x: &Mat, y: &Mat, r: f64) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(Error::shape(format!("{:?}", y.shape()), format!("{:?}", x.shape())));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("pixel range must be positive and finite, got {r}")));
    }
    let n = (x.nrows() * x.ncols()) as f64;
    let mu_x = x.iter().sum::<f64>() / n;
    let mu_y = y.iter().sum::<f64>() / n;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    let mut cov = 0.0;
    for (&a, &b) in x.iter().zip(y.iter()) {
        var_x += (a - mu_x) * (a - mu_x);
        var_y += (b - mu_y) * (b - mu_y);
        cov += (a - mu_x) * (b - mu_y);
    }
    var_x /= n;
    var_y /= n;
    cov /= n;
    let c1 = (0.01 * r) * (0.01 * r);
    let c2 = (0.03 * r) * (0.03 * r);
    Ok(((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2))
        / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)))
}

/// One metric observation from one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSample {
    pub method: String,
    pub s: usize,
    pub value: f64,
}

impl MetricSample {
    pub fn new(method: impl Into<String>, s: usize, value: f64) -> Self {
        MetricSample { method: method.into(), s, value }
    }
}

/// Aggregated statistics for one `(method, s)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricCell {
    pub method: String,
    pub s: usize,
    pub mean: f64,
    /// Sample (n−1) standard deviation; 0 when `count == 1`.
    pub sd: f64,
    pub count: usize,
}

/// Per-(method, s) aggregates across replications.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub cells: Vec<MetricCell>,
}

impl MetricsReport {
    pub fn cell(&self, method: &str, s: usize) -> Option<&MetricCell> {
        self.cells.iter().find(|c| c.method == method && c.s == s)
    }
}

/// Aggregate replication scores into per-(method, s) mean / sd / count.
///
/// Cells appear in first-appearance order of the method, then ascending `s`.
pub fn aggregate(per_replication: &[Vec<MetricSample>]) -> MetricsReport {
    let mut order: Vec<(String, usize)> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for replication in per_replication {
        for sample in replication {
            let key = (sample.method.clone(), sample.s);
            match order.iter().position(|k| *k == key) {
                Some(i) => values[i].push(sample.value),
                None => {
                    order.push(key);
                    values.push(vec![sample.value]);
                }
            }
        }
    }
    let mut keyed: Vec<(usize, (String, usize), Vec<f64>)> = order
        .into_iter()
        .zip(values)
        .enumerate()
        .map(|(i, (k, v))| (i, k, v))
        .collect();
    // stable per-method block order, s ascending inside a method
    let method_rank = |m: &str, keyed: &[(usize, (String, usize), Vec<f64>)]| {
        keyed.iter().find(|(_, (name, _), _)| name == m).map(|(i, _, _)| *i).unwrap_or(usize::MAX)
    };
    let snapshot = keyed.clone();
    keyed.sort_by_key(|(_, (m, s), _)| (method_rank(m, &snapshot), *s));

    let cells = keyed
        .into_iter()
        .map(|(_, (method, s), vals)| {
            let count = vals.len();
            let mean = vals.iter().sum::<f64>() / count as f64;
            let sd = if count > 1 {
                (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            MetricCell { method, s, mean, sd, count }
        })
        .collect();
    MetricsReport { cells }
}
