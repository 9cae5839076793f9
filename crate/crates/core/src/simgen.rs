//! Synthetic matrix time series and their ground-truth statistics.
//!
//! Three data models are built in, selected by [`CaseId`]:
//!
//! - `Linear1`:    `X_{t+1} = phi1 · X_t + phi_noise · E_{t+1}`
//! - `Nonlinear1`: `X_{t+1} = phi1 · sin(X_tᵀ) + phi_noise · E_{t+1}`
//! - `Nonlinear3`: `X_{t+1} = phi1 · cos(X_tᵀ X_{t−2} X_tᵀ)
//!                  + phi2 · sqrt(max(0, X_{t−1}ᵀ)) + phi_noise · E_{t+1}`
//!
//! `sin`, `cos`, `sqrt` and `max{0,·}` act elementwise; the products inside
//! `cos` are matrix products. Noise frames and initial frames have i.i.d.
//! standard-normal entries.
//!
//! For the linear case the per-column stationary covariance solves the
//! discrete fixed point `Σ = phi1 Σ phi1ᵀ + phi_noise phi_noiseᵀ`;
//! [`stationary_covariance`] iterates it and
//! [`covariance_convergence_profile`] tracks the geometric decay
//! `Σ_t − Σ = A^t (Σ_0 − Σ) (Aᵀ)^t` of a symmetric transition `A`.

use crate::linalg::{matrix_power, spectral_radius};
use crate::rng::{stream, tags};
use crate::series::{CaseId, MatrixSeries, PanelDataset};
use crate::{Error, Mat, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// Transition and noise-loading matrices of one data model.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub phi1: Mat,
    /// Present exactly for [`CaseId::Nonlinear3`].
    pub phi2: Option<Mat>,
    pub phi_noise: Mat,
    pub case_id: CaseId,
}

impl CoefficientSet {
    pub fn dim(&self) -> usize {
        self.phi1.nrows()
    }

    pub fn lag(&self) -> usize {
        self.case_id.lag()
    }
}

/// Draw `phi1` (and `phi2` for the lag-3 case) with i.i.d. standard-normal
/// entries, rescaled to the target spectral radius; `phi_noise` is a fixed
/// block-diagonal pattern (4 blocks of `p/4`, value 0.5).
pub fn make_coefficients(
    case_id: CaseId,
    p: usize,
    seed: u64,
    target_spectral_radius: f64,
) -> Result<CoefficientSet> {
    if !(target_spectral_radius > 0.0 && target_spectral_radius < 1.0) {
        return Err(Error::Domain(format!(
            "target spectral radius must be in (0, 1), got {target_spectral_radius}"
        )));
    }
    if p == 0 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    let mut rng = stream(seed, &[tags::COEFFICIENTS]);
    let phi1 = scaled_gaussian(p, target_spectral_radius, &mut rng)?;
    let phi2 = match case_id {
        CaseId::Nonlinear3 => Some(scaled_gaussian(p, target_spectral_radius, &mut rng)?),
        _ => None,
    };
    Ok(CoefficientSet { phi1, phi2, phi_noise: block_pattern(p), case_id })
}

fn scaled_gaussian(p: usize, target: f64, rng: &mut impl Rng) -> Result<Mat> {
    let mut m = Mat::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let radius = spectral_radius(&m);
    if radius < 1e-12 {
        return Err(Error::Domain("drawn matrix is numerically nilpotent".into()));
    }
    Ok(m * (target / radius))
}

/// Block-diagonal noise loading: 4 equal blocks along the diagonal filled
/// with 0.5, zero elsewhere.
fn block_pattern(p: usize) -> Mat {
    let mut m = Mat::zeros(p, p);
    let blocks = 4.min(p);
    for b in 0..blocks {
        let start = b * p / blocks;
        let end = (b + 1) * p / blocks;
        for i in start..end {
            for j in start..end {
                m[(i, j)] = 0.5;
            }
        }
    }
    m
}

/// Deterministic part of one recursion step given the last `lag` frames
/// (oldest first).
fn deterministic_step(coeffs: &CoefficientSet, window: &[Mat]) -> Mat {
    match coeffs.case_id {
        CaseId::Linear1 => &coeffs.phi1 * window.last().unwrap(),
        CaseId::Nonlinear1 => &coeffs.phi1 * window.last().unwrap().transpose().map(f64::sin),
        CaseId::Nonlinear3 => {
            let (x_m2, x_m1, x) = (&window[0], &window[1], &window[2]);
            let cos_arg = (x.transpose() * x_m2 * x.transpose()).map(f64::cos);
            let sqrt_arg = x_m1.transpose().map(|v| v.max(0.0).sqrt());
            &coeffs.phi1 * cos_arg + coeffs.phi2.as_ref().unwrap() * sqrt_arg
        }
    }
}

fn standard_normal_frame(p1: usize, p2: usize, rng: &mut impl Rng) -> Mat {
    let mut m = Mat::zeros(p1, p2);
    for i in 0..p1 {
        for j in 0..p2 {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Simulate frames `X_0 … X_{t_max}` of the model. Initial frames (one for
/// lag-1 cases, three for the lag-3 case) have i.i.d. standard-normal
/// entries.
pub fn simulate(coeffs: &CoefficientSet, t_max: usize, seed: u64) -> Result<MatrixSeries> {
    simulate_with_stream(coeffs, t_max, &mut stream(seed, &[tags::SERIES]))
}

fn simulate_with_stream(
    coeffs: &CoefficientSet,
    t_max: usize,
    rng: &mut impl Rng,
) -> Result<MatrixSeries> {
    let lag = coeffs.lag();
    if t_max < lag {
        return Err(Error::Domain(format!("t_max {t_max} below lag {lag}")));
    }
    let p = coeffs.dim();
    let mut frames: Vec<Mat> = Vec::with_capacity(t_max + 1);
    for _ in 0..lag {
        frames.push(standard_normal_frame(p, p, rng));
    }
    for t in lag..=t_max {
        let noise = standard_normal_frame(p, p, rng);
        let window = &frames[t - lag..t];
        let next = deterministic_step(coeffs, window) + &coeffs.phi_noise * noise;
        frames.push(next);
    }
    MatrixSeries::new(frames, lag)
}

/// Simulate `n` independent subjects sharing `coeffs`; subject `i` uses the
/// stream derived from `(seed, i)`.
pub fn simulate_panel(
    coeffs: &CoefficientSet,
    n: usize,
    t_max: usize,
    seed: u64,
) -> Result<PanelDataset> {
    if n == 0 {
        return Err(Error::Domain("panel needs at least one subject".into()));
    }
    let subjects = (0..n)
        .map(|i| {
            let mut rng = stream(seed, &[tags::SUBJECT, i as u64]);
            simulate_with_stream(coeffs, t_max, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    PanelDataset::new(subjects)
}

/// Solve `Σ = A Σ Aᵀ + B Bᵀ` by fixed-point iteration from `Σ_0 = 0`,
/// stopping when the Frobenius change drops to `tol`.
///
/// Requires the spectral radius of `transition` to be below 1; the returned
/// matrix is exactly symmetric and its residual
/// `‖Σ − AΣAᵀ − BBᵀ‖_F` is at most `10·tol`.
pub fn stationary_covariance(transition: &Mat, noise_coef: &Mat, tol: f64) -> Result<Mat> {
    if !transition.is_square() || transition.shape() != noise_coef.shape() {
        return Err(Error::shape(
            "square matrices of equal dims",
            format!("{:?} vs {:?}", transition.shape(), noise_coef.shape()),
        ));
    }
    let radius = spectral_radius(transition);
    if radius >= 1.0 {
        return Err(Error::Domain(format!(
            "spectral radius {radius:.6} >= 1: fixed point does not converge"
        )));
    }
    let innovation = noise_coef * noise_coef.transpose();
    let mut sigma = Mat::zeros(transition.nrows(), transition.ncols());
    // With radius rho the error contracts like rho^2 per step; cap generously.
    let max_iters = 200_000;
    for _ in 0..max_iters {
        let next = transition * &sigma * transition.transpose() + &innovation;
        let change = (&next - &sigma).norm();
        sigma = next;
        if change <= tol {
            let symmetrized = (&sigma + sigma.transpose()) * 0.5;
            return Ok(symmetrized);
        }
    }
    Err(Error::Domain(format!(
        "fixed point did not reach tol {tol:e} within {max_iters} iterations"
    )))
}

/// Track `‖Σ_t − Σ‖_F` for the covariance recurrence
/// `Σ_{t+1} = A Σ_t Aᵀ + B Bᵀ` started at `sigma0`, for `t = 0 … t_max`.
///
/// The transition must be symmetric with `σ_max < 1`; then the deviations
/// decay like `σ_max^{2t}` and are monotone nonincreasing.
pub fn covariance_convergence_profile(
    transition: &Mat,
    sigma0: &Mat,
    noise_coef: &Mat,
    t_max: usize,
) -> Result<Vec<f64>> {
    let asym = (transition - transition.transpose()).norm();
    if asym > 1e-12 * transition.norm().max(1.0) {
        return Err(Error::Domain(format!(
            "transition must be symmetric (asymmetry {asym:.3e})"
        )));
    }
    let limit = stationary_covariance(transition, noise_coef, 1e-14)?;
    let innovation = noise_coef * noise_coef.transpose();
    let mut sigma = sigma0.clone();
    let mut deviations = Vec::with_capacity(t_max + 1);
    deviations.push((&sigma - &limit).norm());
    for _ in 0..t_max {
        sigma = transition * &sigma * transition.transpose() + &innovation;
        deviations.push((&sigma - &limit).norm());
    }
    Ok(deviations)
}

/// Monte-Carlo conditional mean of `X_{t+s}` given the last `lag` frames.
///
/// Each draw propagates `s − 1` stochastic steps and finishes with the
/// deterministic part of the final step — the noise is additive with zero
/// mean, so this is exact in expectation and exact outright for `s = 1`
/// (any number of draws) and for noise-free models.
pub fn conditional_mean_oracle(
    coeffs: &CoefficientSet,
    history: &[Mat],
    s: usize,
    draws: usize,
    seed: u64,
) -> Result<Mat> {
    check_history(coeffs, history)?;
    if s == 0 || draws == 0 {
        return Err(Error::Domain("horizon and draw count must be positive".into()));
    }
    if s == 1 {
        return Ok(deterministic_step(coeffs, history));
    }
    let p = coeffs.dim();
    let mut rng = stream(seed, &[tags::ORACLE]);
    let mut total = Mat::zeros(p, p);
    for _ in 0..draws {
        let mut window: Vec<Mat> = history.to_vec();
        for _ in 0..s - 1 {
            let noise = standard_normal_frame(p, p, &mut rng);
            let next = deterministic_step(coeffs, &window) + &coeffs.phi_noise * noise;
            window.remove(0);
            window.push(next);
        }
        total += deterministic_step(coeffs, &window);
    }
    Ok(total / draws as f64)
}

/// Closed-form conditional mean where one exists: the linear case at any
/// horizon (`phi1^s · X`) and every case at `s = 1`.
pub fn conditional_mean_exact(coeffs: &CoefficientSet, history: &[Mat], s: usize) -> Option<Mat> {
    if check_history(coeffs, history).is_err() || s == 0 {
        return None;
    }
    match (coeffs.case_id, s) {
        (CaseId::Linear1, _) => Some(matrix_power(&coeffs.phi1, s) * history.last().unwrap()),
        (_, 1) => Some(deterministic_step(coeffs, history)),
        _ => None,
    }
}

fn check_history(coeffs: &CoefficientSet, history: &[Mat]) -> Result<()> {
    if history.len() != coeffs.lag() {
        return Err(Error::shape(
            format!("history of {} frames", coeffs.lag()),
            format!("{}", history.len()),
        ));
    }
    let p = coeffs.dim();
    if history.iter().any(|f| f.shape() != (p, p)) {
        return Err(Error::shape(format!("{p}x{p} frames"), "other"));
    }
    Ok(())
}
