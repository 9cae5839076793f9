//! Python bindings for the gents library.
//!
//! Frames cross the boundary as nested lists (rows of floats). The surface
//! mirrors the Rust API: divergences, the synthetic data models with their
//! conditional-mean oracles, adversarial training, generation, baselines,
//! and the forecast metrics.

use gents_core::baselines;
use gents_core::fdiv::FDivergence;
use gents_core::forecast::{self, GenerationMode};
use gents_core::gan::{self, TrainConfig, TrainData};
use gents_core::metrics;
use gents_core::series::{import_series, CaseId, MatrixSeries};
use gents_core::simgen::{self, CoefficientSet};
use gents_core::Mat;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use std::path::PathBuf;

fn err_to_py(e: gents_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn mat_to_py(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn py_to_mat(rows: &[Vec<f64>]) -> PyResult<Mat> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(PyValueError::new_err("frame must be a non-empty list of rows"));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("frame rows have unequal lengths"));
    }
    let mut m = Mat::zeros(rows.len(), cols);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

fn py_to_history(frames: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<Mat>> {
    frames.iter().map(|f| py_to_mat(f)).collect()
}

/// An f-divergence with its convex conjugate and curvature constants.
#[pyclass(name = "FDivergence")]
struct PyFDivergence {
    inner: FDivergence,
}

#[pymethods]
impl PyFDivergence {
    /// `name` is "kl" or "chi2".
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        Ok(PyFDivergence { inner: FDivergence::from_name(name).map_err(err_to_py)? })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a()
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b()
    }

    fn f(&self, x: f64) -> PyResult<f64> {
        self.inner.eval_f(x).map_err(err_to_py)
    }

    fn conjugate(&self, y: f64) -> f64 {
        self.inner.conjugate(y)
    }

    /// Discrete divergence of `q` from `p` (base distribution first).
    fn divergence(&self, p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
        self.inner.divergence_discrete(&p, &q).map_err(err_to_py)
    }

    /// Returns `(lhs, rhs, holds)` of `D_f(p‖q) >= (a/2)·‖p−q‖₁²`.
    fn lower_bound(&self, p: Vec<f64>, q: Vec<f64>) -> PyResult<(f64, f64, bool)> {
        let check = self.inner.check_lower_bound(&p, &q).map_err(err_to_py)?;
        Ok((check.lhs, check.rhs, check.holds))
    }
}

/// A simulated matrix time series with its provenance.
#[pyclass(name = "Series")]
struct PySeries {
    inner: MatrixSeries,
    case: CaseId,
    seed: u64,
}

#[pymethods]
impl PySeries {
    #[getter]
    fn case(&self) -> &'static str {
        self.case.name()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.seed
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn shape(&self) -> (usize, usize) {
        (self.inner.p1(), self.inner.p2())
    }

    fn lag(&self) -> usize {
        self.inner.lag()
    }

    fn frame(&self, t: usize) -> PyResult<Vec<Vec<f64>>> {
        if t >= self.inner.len() {
            return Err(PyValueError::new_err(format!("frame {t} out of range")));
        }
        Ok(mat_to_py(self.inner.frame(t)))
    }

    /// The lag-k window ending at `t`, oldest first.
    fn history(&self, t: usize) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let h = self.inner.history_ending_at(t).map_err(err_to_py)?;
        Ok(h.iter().map(mat_to_py).collect())
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        gents_core::series::export_series(&path, &self.inner, self.case, self.seed)
            .map_err(err_to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<PySeries> {
        let (inner, case, seed) = import_series(&path).map_err(err_to_py)?;
        Ok(PySeries { inner, case, seed })
    }
}

/// The true data model behind a simulated series: simulation and
/// conditional-mean targets.
#[pyclass(name = "TrueModel")]
struct PyTrueModel {
    coeffs: CoefficientSet,
    seed: u64,
}

#[pymethods]
impl PyTrueModel {
    #[new]
    #[pyo3(signature = (case, p, seed, radius=0.9))]
    fn new(case: &str, p: usize, seed: u64, radius: f64) -> PyResult<Self> {
        let case = CaseId::from_name(case).map_err(err_to_py)?;
        let coeffs = simgen::make_coefficients(case, p, seed, radius).map_err(err_to_py)?;
        Ok(PyTrueModel { coeffs, seed })
    }

    #[getter]
    fn case(&self) -> &'static str {
        self.coeffs.case_id.name()
    }

    fn lag(&self) -> usize {
        self.coeffs.lag()
    }

    #[pyo3(signature = (t_len, seed=None))]
    fn simulate(&self, t_len: usize, seed: Option<u64>) -> PyResult<PySeries> {
        let seed = seed.unwrap_or(self.seed);
        let inner = simgen::simulate(&self.coeffs, t_len, seed).map_err(err_to_py)?;
        Ok(PySeries { inner, case: self.coeffs.case_id, seed })
    }

    /// Conditional mean of the frame `s` steps past `history` (closed form
    /// where available, Monte Carlo otherwise).
    #[pyo3(signature = (history, s, draws=1000, seed=0))]
    fn conditional_mean(
        &self,
        history: Vec<Vec<Vec<f64>>>,
        s: usize,
        draws: usize,
        seed: u64,
    ) -> PyResult<Vec<Vec<f64>>> {
        let history = py_to_history(history)?;
        if let Some(exact) = simgen::conditional_mean_exact(&self.coeffs, &history, s) {
            return Ok(mat_to_py(&exact));
        }
        let mean = simgen::conditional_mean_oracle(&self.coeffs, &history, s, draws, seed)
            .map_err(err_to_py)?;
        Ok(mat_to_py(&mean))
    }
}

/// A trained multi-horizon generator.
#[pyclass(name = "Generator")]
struct PyGenerator {
    inner: gan::TrainedGenerator,
}

#[pymethods]
impl PyGenerator {
    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    fn frame_shape(&self) -> (usize, usize) {
        self.inner.frame_shape()
    }

    #[pyo3(signature = (history, s, draws, seed=0))]
    fn generate_iterative(
        &self,
        history: Vec<Vec<Vec<f64>>>,
        s: usize,
        draws: usize,
        seed: u64,
    ) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let history = py_to_history(history)?;
        let frames =
            forecast::generate_iterative(&self.inner, &history, s, draws, seed).map_err(err_to_py)?;
        Ok(frames.iter().map(mat_to_py).collect())
    }

    #[pyo3(signature = (history, s, draws, seed=0))]
    fn generate_sstep(
        &self,
        history: Vec<Vec<Vec<f64>>>,
        s: usize,
        draws: usize,
        seed: u64,
    ) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let history = py_to_history(history)?;
        let frames =
            forecast::generate_sstep(&self.inner, &history, s, draws, seed).map_err(err_to_py)?;
        Ok(frames.iter().map(mat_to_py).collect())
    }

    /// Mean forecast at each rolling origin over the series tail.
    #[pyo3(signature = (series, t_new, s, mode="iter", draws=100, seed=0))]
    fn rolling_forecast(
        &self,
        series: &PySeries,
        t_new: usize,
        s: usize,
        mode: &str,
        draws: usize,
        seed: u64,
    ) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let mode = GenerationMode::from_name(mode).map_err(err_to_py)?;
        let means = forecast::rolling_forecast(&self.inner, &series.inner, t_new, s, mode, draws, seed)
            .map_err(err_to_py)?;
        Ok(means.iter().map(mat_to_py).collect())
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err_to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<PyGenerator> {
        Ok(PyGenerator { inner: gan::TrainedGenerator::load(&path).map_err(err_to_py)? })
    }
}

/// Train generator heads on a series by adversarial min-max optimization.
#[pyfunction]
#[pyo3(signature = (series, divergence="kl", horizon=3, epochs=100, batch_size=64,
                    noise_dim=20, pair_budget=10_000, gen_lr=1e-3, disc_lr=1e-3,
                    gen_wd=1e-5, disc_wd=1e-5, disc_steps=1,
                    gen_hidden=vec![256, 128], disc_hidden=vec![256, 64],
                    shared_head=false, seed=None))]
#[allow(clippy::too_many_arguments)]
fn train(
    series: &PySeries,
    divergence: &str,
    horizon: usize,
    epochs: usize,
    batch_size: usize,
    noise_dim: usize,
    pair_budget: usize,
    gen_lr: f64,
    disc_lr: f64,
    gen_wd: f64,
    disc_wd: f64,
    disc_steps: usize,
    gen_hidden: Vec<usize>,
    disc_hidden: Vec<usize>,
    shared_head: bool,
    seed: Option<u64>,
) -> PyResult<PyGenerator> {
    let config = TrainConfig {
        divergence: divergence.to_string(),
        noise_dim,
        horizon,
        lag: series.inner.lag(),
        epochs,
        batch_size,
        disc_steps_per_gen_step: disc_steps,
        pair_budget,
        gen_learning_rate: gen_lr,
        gen_weight_decay: gen_wd,
        disc_learning_rate: disc_lr,
        disc_weight_decay: disc_wd,
        gen_hidden,
        disc_hidden,
        shared_head,
        seed: seed.unwrap_or(series.seed),
        ..TrainConfig::default()
    };
    let inner = gan::train(TrainData::Single(&series.inner), &config).map_err(err_to_py)?;
    Ok(PyGenerator { inner })
}

/// Fit the OLS matrix autoregression; returns the coefficient matrices,
/// most recent lag first.
#[pyfunction]
#[pyo3(signature = (series, lag, ridge=None))]
fn ols_fit(series: &PySeries, lag: usize, ridge: Option<f64>) -> PyResult<Vec<Vec<Vec<f64>>>> {
    let fit = baselines::ols_fit(&series.inner, lag, ridge).map_err(err_to_py)?;
    Ok(fit.lags.iter().map(mat_to_py).collect())
}

/// Iterate fitted OLS coefficients `s` steps from a history (oldest first).
#[pyfunction]
fn ols_predict(
    lags: Vec<Vec<Vec<f64>>>,
    history: Vec<Vec<Vec<f64>>>,
    s: usize,
) -> PyResult<Vec<Vec<f64>>> {
    let coeffs = baselines::OlsCoefficients { lags: py_to_history(lags)? };
    let history = py_to_history(history)?;
    Ok(mat_to_py(&baselines::ols_predict(&coeffs, &history, s).map_err(err_to_py)?))
}

/// The observation `s` steps before `t_target`.
#[pyfunction]
fn naive_predict(series: &PySeries, t_target: usize, s: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(mat_to_py(&baselines::naive_predict(&series.inner, t_target, s).map_err(err_to_py)?))
}

#[pyfunction]
fn nrmse(estimate: Vec<Vec<f64>>, target: Vec<Vec<f64>>) -> PyResult<f64> {
    metrics::nrmse(&py_to_mat(&estimate)?, &py_to_mat(&target)?).map_err(err_to_py)
}

#[pyfunction]
#[pyo3(signature = (x, y, pixel_range=None))]
fn ssim(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, pixel_range: Option<f64>) -> PyResult<f64> {
    let (x, y) = (py_to_mat(&x)?, py_to_mat(&y)?);
    match pixel_range {
        Some(r) => metrics::ssim_with_range(&x, &y, r).map_err(err_to_py),
        None => metrics::ssim(&x, &y).map_err(err_to_py),
    }
}

#[pyfunction]
fn psnr(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> PyResult<f64> {
    metrics::psnr(&py_to_mat(&x)?, &py_to_mat(&y)?).map_err(err_to_py)
}

/// Solve the stationary covariance fixed point `Σ = AΣAᵀ + BBᵀ`.
#[pyfunction]
#[pyo3(signature = (transition, noise_coef, tol=1e-12))]
fn stationary_covariance(
    transition: Vec<Vec<f64>>,
    noise_coef: Vec<Vec<f64>>,
    tol: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let sigma = simgen::stationary_covariance(&py_to_mat(&transition)?, &py_to_mat(&noise_coef)?, tol)
        .map_err(err_to_py)?;
    Ok(mat_to_py(&sigma))
}

#[pymodule]
fn gents_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFDivergence>()?;
    m.add_class::<PySeries>()?;
    m.add_class::<PyTrueModel>()?;
    m.add_class::<PyGenerator>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(ols_fit, m)?)?;
    m.add_function(wrap_pyfunction!(ols_predict, m)?)?;
    m.add_function(wrap_pyfunction!(naive_predict, m)?)?;
    m.add_function(wrap_pyfunction!(nrmse, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_covariance, m)?)?;
    Ok(())
}
