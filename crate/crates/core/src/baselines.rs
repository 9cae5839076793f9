//! OLS matrix autoregression and the naive lag-s predictor.
//!
//! The OLS fit minimizes `Σ_t ‖X_{t+1} − Σ_j φ_j X_{t+1−j}‖_F²` through the
//! stacked normal equations: with `Z_t` the vertical stack of the last `lag`
//! frames, `Φ̂ = (Σ X_{t+1} Z_tᵀ)(Σ Z_t Z_tᵀ)⁻¹`, solved by column-pivoted
//! QR with residual verification. A singular Gram matrix is an explicit
//! error; passing a ridge lambda shifts the Gram diagonal instead.

use crate::linalg::solve;
use crate::series::{MatrixSeries, PanelDataset};
use crate::{Error, Mat, Result};

/// Fitted autoregression coefficients, most recent lag first:
/// `lags[j]` multiplies `X_{t-j}` when predicting `X_{t+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsCoefficients {
    pub lags: Vec<Mat>,
}

impl OlsCoefficients {
    pub fn lag(&self) -> usize {
        self.lags.len()
    }

    pub fn dim(&self) -> usize {
        self.lags[0].nrows()
    }
}

/// Fit with a correctly specified order for the case at hand (1 or 3).
pub fn ols_fit(series: &MatrixSeries, lag: usize, ridge: Option<f64>) -> Result<OlsCoefficients> {
    if lag != 1 && lag != 3 {
        return Err(Error::Config(format!("supported OLS lag orders are 1 and 3, got {lag}")));
    }
    ols_fit_with_lag(series, lag, ridge)
}

/// General-order fit behind [`ols_fit`]; also used by diagnostics that probe
/// deliberately mis-specified orders.
pub fn ols_fit_with_lag(
    series: &MatrixSeries,
    lag: usize,
    ridge: Option<f64>,
) -> Result<OlsCoefficients> {
    accumulate_and_solve(std::iter::once(series), lag, ridge)
}

/// Pooled fit across the subjects of a panel.
pub fn ols_fit_panel(
    panel: &PanelDataset,
    lag: usize,
    ridge: Option<f64>,
) -> Result<OlsCoefficients> {
    accumulate_and_solve(panel.subjects().iter(), lag, ridge)
}

fn accumulate_and_solve<'a>(
    series_iter: impl Iterator<Item = &'a MatrixSeries>,
    lag: usize,
    ridge: Option<f64>,
) -> Result<OlsCoefficients> {
    let mut gram: Option<Mat> = None;
    let mut cross: Option<Mat> = None;
    let mut p = 0usize;
    for series in series_iter {
        if series.p1() != series.p2() {
            return Err(Error::shape(
                "square frames for the stacked regression",
                format!("{}x{}", series.p1(), series.p2()),
            ));
        }
        p = series.p1();
        let t_max = series.last_index();
        if t_max < lag + p {
            return Err(Error::Domain(format!(
                "series of length {} too short for lag {lag} with p={p}",
                series.len()
            )));
        }
        let g = gram.get_or_insert_with(|| Mat::zeros(lag * p, lag * p));
        let c = cross.get_or_insert_with(|| Mat::zeros(p, lag * p));
        let mut stacked = Mat::zeros(lag * p, p);
        for t in (lag - 1)..t_max {
            for j in 0..lag {
                stacked.rows_mut(j * p, p).copy_from(series.frame(t - j));
            }
            g.gemm(1.0, &stacked, &stacked.transpose(), 1.0);
            c.gemm(1.0, series.frame(t + 1), &stacked.transpose(), 1.0);
        }
    }
    let mut gram = gram.ok_or_else(|| Error::Domain("no series to fit".into()))?;
    let cross = cross.unwrap();
    if let Some(lambda) = ridge {
        for i in 0..gram.nrows() {
            gram[(i, i)] += lambda;
        }
    }
    // Gram is symmetric, so Φ G = C solves as G Φᵀ = Cᵀ.
    let phi_t = solve(&gram, &cross.transpose()).map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!(
            "OLS Gram matrix is singular ({msg}); consider the ridge fallback"
        )),
        other => other,
    })?;
    let phi = phi_t.transpose();
    let lags = (0..lag).map(|j| phi.columns(j * p, p).into_owned()).collect();
    Ok(OlsCoefficients { lags })
}

/// Iterate the fitted recursion `s` times with zero noise
/// (the conditional-mean predictor). `history` is oldest-first with exactly
/// `lag` frames.
pub fn ols_predict(coeffs: &OlsCoefficients, history: &[Mat], s: usize) -> Result<Mat> {
    let lag = coeffs.lag();
    if history.len() != lag {
        return Err(Error::shape(format!("{lag} history frames"), format!("{}", history.len())));
    }
    if s == 0 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let mut window: Vec<Mat> = history.to_vec();
    let mut next = Mat::zeros(history[0].nrows(), history[0].ncols());
    for _ in 0..s {
        next.fill(0.0);
        for j in 0..lag {
            next.gemm(1.0, &coeffs.lags[j], &window[lag - 1 - j], 1.0);
        }
        window.remove(0);
        window.push(next.clone());
    }
    Ok(next)
}

/// The frame observed `s` steps before `t_target`, unchanged.
pub fn naive_predict(series: &MatrixSeries, t_target: usize, s: usize) -> Result<Mat> {
    if s == 0 {
        return Err(Error::Domain("naive prediction needs s >= 1".into()));
    }
    if t_target < s || t_target - s >= series.len() {
        return Err(Error::Domain(format!(
            "source index {} - {s} outside series of {} frames",
            t_target,
            series.len()
        )));
    }
    Ok(series.frame(t_target - s).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::CaseId;
    use crate::simgen::{make_coefficients, simulate};
    use rand::Rng;

    fn noiseless_case1(p: usize, seed: u64, t_max: usize) -> (crate::simgen::CoefficientSet, MatrixSeries) {
        let mut coeffs = make_coefficients(CaseId::Linear1, p, seed, 0.9).unwrap();
        coeffs.phi_noise.fill(0.0);
        let series = simulate(&coeffs, t_max, seed + 1).unwrap();
        (coeffs, series)
    }

    #[test]
    fn noiseless_fit_recovers_truth() {
        let (coeffs, series) = noiseless_case1(6, 31, 40);
        let fit = ols_fit(&series, 1, None).unwrap();
        assert!((&fit.lags[0] - &coeffs.phi1).norm() < 1e-8);
    }

    #[test]
    fn residual_orthogonality() {
        let coeffs = make_coefficients(CaseId::Linear1, 8, 33, 0.9).unwrap();
        let series = simulate(&coeffs, 300, 5).unwrap();
        let fit = ols_fit(&series, 1, None).unwrap();
        let mut orth = Mat::zeros(8, 8);
        for t in 0..series.last_index() {
            let resid = series.frame(t + 1) - &fit.lags[0] * series.frame(t);
            orth.gemm(1.0, &resid, &series.frame(t).transpose(), 1.0);
        }
        assert!(orth.norm() < 1e-8, "orthogonality residual {}", orth.norm());
    }

    #[test]
    fn fitted_objective_beats_random_perturbations() {
        let coeffs = make_coefficients(CaseId::Linear1, 6, 37, 0.9).unwrap();
        let series = simulate(&coeffs, 200, 7).unwrap();
        let fit = ols_fit(&series, 1, None).unwrap();
        let objective = |phi: &Mat| -> f64 {
            (0..series.last_index())
                .map(|t| (series.frame(t + 1) - phi * series.frame(t)).norm_squared())
                .sum()
        };
        let base = objective(&fit.lags[0]);
        let mut rng = crate::rng::stream(9, &[]);
        for _ in 0..100 {
            let delta = Mat::from_fn(6, 6, |_, _| 0.01 * (rng.random::<f64>() - 0.5));
            assert!(objective(&(&fit.lags[0] + delta)) >= base);
        }
    }

    #[test]
    fn constant_frames_hit_singular_gram_and_ridge_rescues() {
        let frames = vec![Mat::from_element(4, 4, 1.0); 30];
        let series = MatrixSeries::new(frames, 1).unwrap();
        let err = ols_fit(&series, 1, None).unwrap_err();
        assert!(matches!(err, Error::Singular(_)), "{err}");
        assert!(ols_fit(&series, 1, Some(1e-8)).is_ok());
    }

    #[test]
    fn lag3_fit_recovers_separable_truth() {
        // Build a lag-3 linear model by hand and check exact recovery.
        let p = 4;
        let mut rng = crate::rng::stream(77, &[]);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            Mat::from_fn(p, p, |_, _| 0.2 * (rng.random::<f64>() - 0.5))
        };
        let (a1, a2, a3) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let mut frames = vec![
            Mat::from_fn(p, p, |_, _| rng.random::<f64>() - 0.5),
            Mat::from_fn(p, p, |_, _| rng.random::<f64>() - 0.5),
            Mat::from_fn(p, p, |_, _| rng.random::<f64>() - 0.5),
        ];
        for t in 2..60 {
            let next = &a1 * &frames[t] + &a2 * &frames[t - 1] + &a3 * &frames[t - 2];
            frames.push(next);
        }
        let series = MatrixSeries::new(frames, 3).unwrap();
        let fit = ols_fit(&series, 3, None).unwrap();
        assert!((&fit.lags[0] - &a1).norm() < 1e-8);
        assert!((&fit.lags[1] - &a2).norm() < 1e-8);
        assert!((&fit.lags[2] - &a3).norm() < 1e-8);
    }

    #[test]
    fn predict_iterates_the_linear_recursion() {
        let (coeffs, series) = noiseless_case1(5, 41, 30);
        let fit = ols_fit(&series, 1, None).unwrap();
        let x = series.frame(10).clone();
        let one = ols_predict(&fit, &[x.clone()], 1).unwrap();
        assert!((&one - &coeffs.phi1 * &x).norm() < 1e-7);
        let two = ols_predict(&fit, &[x.clone()], 2).unwrap();
        assert!((&two - &coeffs.phi1 * &coeffs.phi1 * &x).norm() < 1e-6);
    }

    #[test]
    fn lag3_one_step_prediction_is_weighted_sum() {
        let p = 3;
        let lags = vec![
            Mat::identity(p, p) * 0.5,
            Mat::identity(p, p) * 0.25,
            Mat::identity(p, p) * 0.125,
        ];
        let coeffs = OlsCoefficients { lags };
        let h = [
            Mat::from_element(p, p, 1.0),
            Mat::from_element(p, p, 2.0),
            Mat::from_element(p, p, 4.0),
        ];
        // oldest-first history: X_{t-2}=1, X_{t-1}=2, X_t=4
        let got = ols_predict(&coeffs, &h, 1).unwrap();
        let expect = 0.5 * 4.0 + 0.25 * 2.0 + 0.125 * 1.0;
        assert!((got - Mat::from_element(p, p, expect)).norm() < 1e-14);
    }

    #[test]
    fn naive_is_the_identity_on_its_source_frame() {
        let coeffs = make_coefficients(CaseId::Linear1, 4, 51, 0.9).unwrap();
        let series = simulate(&coeffs, 20, 3).unwrap();
        let got = naive_predict(&series, 15, 4).unwrap();
        for (a, b) in got.iter().zip(series.frame(11).iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn naive_rejects_zero_horizon_and_out_of_range() {
        let coeffs = make_coefficients(CaseId::Linear1, 4, 53, 0.9).unwrap();
        let series = simulate(&coeffs, 10, 3).unwrap();
        assert!(naive_predict(&series, 5, 0).is_err());
        assert!(naive_predict(&series, 3, 4).is_err());
    }

    #[test]
    fn ols_rejects_unsupported_order() {
        let coeffs = make_coefficients(CaseId::Linear1, 4, 55, 0.9).unwrap();
        let series = simulate(&coeffs, 30, 3).unwrap();
        assert!(ols_fit(&series, 2, None).is_err());
    }
}
