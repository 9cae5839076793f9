//! Numeric property suites behind `gents selftest`.
//!
//! Three fast checks: the closed-form convex conjugates against a grid
//! maximization, the quadratic divergence lower bound on random
//! distribution pairs, the covariance fixed point's residual, and analytic
//! network gradients against central finite differences.

use gents_core::fdiv::FDivergence;
use gents_core::gan::sample_noise;
use gents_core::neural::{Mlp, MlpGrads, MlpSpec};
use gents_core::series::CaseId;
use gents_core::simgen::{make_coefficients, stationary_covariance};
use gents_core::{Error, Mat, Result};
use rand::Rng;

pub fn run() -> Result<()> {
    let mut all_ok = true;
    for (name, outcome) in [
        ("conjugate-grid", check_conjugates()),
        ("divergence-lower-bound", check_lower_bound()),
        ("covariance-fixed-point", check_fixed_point()),
        ("gradient-check", check_gradients()),
    ] {
        match outcome {
            Ok(()) => println!("[PASS] {name}"),
            Err(e) => {
                all_ok = false;
                println!("[FAIL] {name}: {e}");
            }
        }
    }
    if all_ok {
        Ok(())
    } else {
        Err(Error::Domain("selftest failed".into()))
    }
}

fn check_conjugates() -> Result<()> {
    for div in [FDivergence::kl(), FDivergence::chi_squared()] {
        for i in 0..50 {
            let y = -2.0 + 7.0 * i as f64 / 49.0;
            let oracle = grid_conjugate(&div, y);
            let got = div.conjugate(y);
            if (got - oracle).abs() > 1e-6 {
                return Err(Error::Domain(format!(
                    "{} f*({y}) = {got}, grid oracle {oracle}",
                    div.name()
                )));
            }
        }
    }
    Ok(())
}

/// Two-stage grid maximization of x·y − f(x) over x in [0, 60]; the inner
/// objective is concave in x, so refining around the coarse argmax is exact
/// to the fine step.
fn grid_conjugate(div: &FDivergence, y: f64) -> f64 {
    let coarse = 1e-2;
    let mut best_x = 0.0;
    let mut best = f64::NEG_INFINITY;
    let mut x = 0.0;
    while x <= 60.0 {
        let v = x * y - div.eval_f(x).unwrap();
        if v > best {
            best = v;
            best_x = x;
        }
        x += coarse;
    }
    let mut x = (best_x - 2.0 * coarse).max(0.0);
    let stop = best_x + 2.0 * coarse;
    while x <= stop {
        let v = x * y - div.eval_f(x).unwrap();
        if v > best {
            best = v;
        }
        x += 1e-4;
    }
    best
}

fn check_lower_bound() -> Result<()> {
    let mut rng = gents_core::rng::stream(0xfeed, &[]);
    for trial in 0..2000 {
        let n = rng.random_range(2..=64);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(1e-6..1.0)).collect();
            let sum: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / sum).collect::<Vec<_>>()
        };
        let p = draw(&mut rng);
        let q = draw(&mut rng);
        for div in [FDivergence::kl(), FDivergence::chi_squared()] {
            let check = div.check_lower_bound(&p, &q)?;
            if !check.holds {
                return Err(Error::Domain(format!(
                    "trial {trial} {}: {} < {}",
                    div.name(),
                    check.lhs,
                    check.rhs
                )));
            }
        }
    }
    Ok(())
}

fn check_fixed_point() -> Result<()> {
    for seed in 0..10 {
        let coeffs = make_coefficients(CaseId::Linear1, 16, 9000 + seed, 0.9)?;
        let sigma = stationary_covariance(&coeffs.phi1, &coeffs.phi_noise, 1e-12)?;
        let residual = (&sigma
            - &coeffs.phi1 * &sigma * coeffs.phi1.transpose()
            - &coeffs.phi_noise * coeffs.phi_noise.transpose())
            .norm();
        if residual > 1e-10 {
            return Err(Error::Domain(format!("seed {seed}: residual {residual:.3e}")));
        }
    }
    let sigma = stationary_covariance(&(Mat::identity(2, 2) * 0.5), &Mat::identity(2, 2), 1e-12)?;
    let gap = (sigma - Mat::identity(2, 2) * (4.0 / 3.0)).norm();
    if gap > 1e-10 {
        return Err(Error::Domain(format!("closed-form case off by {gap:.3e}")));
    }
    Ok(())
}

fn check_gradients() -> Result<()> {
    let mut rng = gents_core::rng::stream(0xbeef, &[]);
    for trial in 0..5u64 {
        let spec = MlpSpec::new(vec![5, 9, 4]).with_noise(1, 3);
        let mut mlp = Mlp::init(spec, 400 + trial)?;
        let x = Mat::from_fn(5, 3, |_, _| rng.random::<f64>() - 0.5);
        let noise = sample_noise(3, 3, &mut rng);
        let loss = |mlp: &Mlp| -> f64 {
            let y = mlp.forward(&x, Some(&noise), None).unwrap();
            y.iter().map(|v| v * v).sum::<f64>() / y.ncols() as f64
        };
        let (y, cache) = mlp.forward_cached(&x, Some(&noise), None)?;
        let d_out = y.map(|v| 2.0 * v / y.ncols() as f64);
        let mut grads = MlpGrads::zeros_like(&mlp);
        mlp.backward(&cache, &d_out, &mut grads);

        let h = 1e-5;
        for layer in 0..mlp.layers().len() {
            let len = mlp.layers()[layer].weights.len();
            for idx in [0, len / 2, len - 1] {
                let orig = mlp.layers()[layer].weights.as_slice()[idx];
                mlp.layers_mut()[layer].weights.as_mut_slice()[idx] = orig + h;
                let up = loss(&mlp);
                mlp.layers_mut()[layer].weights.as_mut_slice()[idx] = orig - h;
                let down = loss(&mlp);
                mlp.layers_mut()[layer].weights.as_mut_slice()[idx] = orig;
                let numeric = (up - down) / (2.0 * h);
                let exact = grads.d_weights[layer].as_slice()[idx];
                let err = if exact.abs() < 1e-8 {
                    (numeric - exact).abs()
                } else {
                    (numeric - exact).abs() / exact.abs()
                };
                if err > 1e-4 {
                    return Err(Error::Domain(format!(
                        "trial {trial} layer {layer} idx {idx}: gradient error {err:.3e}"
                    )));
                }
            }
        }
    }
    Ok(())
}
