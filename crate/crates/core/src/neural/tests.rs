use super::*;
use rand::Rng;

fn hand_net() -> Mlp {
    // dims [2, 2, 1]; frozen hand-computed forward below.
    let mut mlp = Mlp::zeros(MlpSpec::new(vec![2, 2, 1])).unwrap();
    mlp.layers_mut()[0].weights = Mat::from_row_slice(2, 2, &[1.0, -1.0, 0.5, 2.0]);
    mlp.layers_mut()[0].bias = Vecf::from_vec(vec![0.1, -0.2]);
    mlp.layers_mut()[1].weights = Mat::from_row_slice(1, 2, &[2.0, -0.5]);
    mlp.layers_mut()[1].bias = Vecf::from_vec(vec![0.3]);
    mlp
}

#[test]
fn zero_network_maps_to_zero() {
    let mlp = Mlp::zeros(MlpSpec::new(vec![3, 4, 2])).unwrap();
    let x = Mat::from_row_slice(3, 2, &[1.0, -2.0, 3.5, 0.0, -1.0, 9.0]);
    let y = mlp.forward(&x, None, None).unwrap();
    assert_eq!(y, Mat::zeros(2, 2));
}

#[test]
fn identity_layer_is_identity() {
    let mut mlp = Mlp::zeros(MlpSpec::new(vec![3, 3])).unwrap();
    mlp.layers_mut()[0].weights = Mat::identity(3, 3);
    let x = Mat::from_column_slice(3, 1, &[0.4, -2.0, 7.0]);
    let y = mlp.forward(&x, None, None).unwrap();
    assert_eq!(y, x);
}

#[test]
fn two_layer_forward_matches_hand_computation() {
    // x = (1, 2): z0 = (1-2+0.1, 0.5+4-0.2) = (-0.9, 4.3), relu = (0, 4.3),
    // out = 2*0 - 0.5*4.3 + 0.3 = -1.85.
    let mlp = hand_net();
    let x = Mat::from_column_slice(2, 1, &[1.0, 2.0]);
    let y = mlp.forward(&x, None, None).unwrap();
    assert!((y[(0, 0)] - (-1.85)).abs() < 1e-15, "got {}", y[(0, 0)]);
}

#[test]
fn forward_rejects_shape_mismatch() {
    let mlp = Mlp::zeros(MlpSpec::new(vec![3, 2])).unwrap();
    let x = Mat::zeros(4, 1);
    let err = mlp.forward(&x, None, None).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains('3') && msg.contains('4'), "{msg}");
}

#[test]
fn noise_concat_shapes_and_usage() {
    let spec = MlpSpec::new(vec![3, 4, 2]).with_noise(1, 5);
    assert_eq!(spec.layer_input_dim(0), 3);
    assert_eq!(spec.layer_input_dim(1), 9);
    let mlp = Mlp::init(spec, 11).unwrap();
    let x = Mat::zeros(3, 2);
    assert!(mlp.forward(&x, None, None).is_err());
    let noise = Mat::zeros(5, 2);
    assert!(mlp.forward(&x, Some(&noise), None).is_ok());
}

#[test]
fn bias_gradient_of_summed_identity_layer_is_ones() {
    let mut mlp = Mlp::zeros(MlpSpec::new(vec![3, 3])).unwrap();
    mlp.layers_mut()[0].weights = Mat::identity(3, 3);
    let x = Mat::from_column_slice(3, 1, &[0.2, 0.4, -0.8]);
    let (_, cache) = mlp.forward_cached(&x, None, None).unwrap();
    let mut grads = MlpGrads::zeros_like(&mlp);
    // loss = sum of outputs -> d_out = 1.
    mlp.backward(&cache, &Mat::from_element(3, 1, 1.0), &mut grads);
    assert_eq!(grads.d_bias[0], Vecf::from_element(3, 1.0));
}

#[test]
fn relu_at_exactly_zero_passes_no_gradient() {
    let mut mlp = Mlp::zeros(MlpSpec::new(vec![1, 1, 1])).unwrap();
    mlp.layers_mut()[0].weights[(0, 0)] = 1.0;
    mlp.layers_mut()[1].weights[(0, 0)] = 1.0;
    let x = Mat::zeros(1, 1); // pre-activation exactly 0
    let (_, cache) = mlp.forward_cached(&x, None, None).unwrap();
    let mut grads = MlpGrads::zeros_like(&mlp);
    let input_grads = mlp.backward(&cache, &Mat::from_element(1, 1, 1.0), &mut grads);
    assert_eq!(input_grads.d_input[(0, 0)], 0.0);
    assert_eq!(grads.d_weights[0][(0, 0)], 0.0);
}

/// Mean-of-squares loss and its analytic input gradient.
fn loss_and_grad(mlp: &Mlp, x: &Mat, noise: Option<&Mat>) -> (f64, MlpGrads) {
    let (y, cache) = mlp.forward_cached(x, noise, None).unwrap();
    let batch = y.ncols() as f64;
    let loss = y.iter().map(|v| v * v).sum::<f64>() / batch;
    let d_out = y.map(|v| 2.0 * v / batch);
    let mut grads = MlpGrads::zeros_like(mlp);
    mlp.backward(&cache, &d_out, &mut grads);
    (loss, grads)
}

/// Max relative gradient error against central finite differences
/// (h = 1e-5; entries with |grad| < 1e-8 compared absolutely).
fn gradcheck(mlp: &mut Mlp, x: &Mat, noise: Option<&Mat>) -> f64 {
    let (_, analytic) = loss_and_grad(mlp, x, noise);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for j in 0..mlp.layers().len() {
        for idx in 0..mlp.layers()[j].weights.len() {
            let orig = mlp.layers()[j].weights.as_slice()[idx];
            mlp.layers_mut()[j].weights.as_mut_slice()[idx] = orig + h;
            let up = loss_and_grad(mlp, x, noise).0;
            mlp.layers_mut()[j].weights.as_mut_slice()[idx] = orig - h;
            let down = loss_and_grad(mlp, x, noise).0;
            mlp.layers_mut()[j].weights.as_mut_slice()[idx] = orig;
            let numeric = (up - down) / (2.0 * h);
            let exact = analytic.d_weights[j].as_slice()[idx];
            let err = if exact.abs() < 1e-8 {
                (numeric - exact).abs()
            } else {
                (numeric - exact).abs() / exact.abs()
            };
            worst = worst.max(err);
        }
        for idx in 0..mlp.layers()[j].bias.len() {
            let orig = mlp.layers()[j].bias[idx];
            mlp.layers_mut()[j].bias[idx] = orig + h;
            let up = loss_and_grad(mlp, x, noise).0;
            mlp.layers_mut()[j].bias[idx] = orig - h;
            let down = loss_and_grad(mlp, x, noise).0;
            mlp.layers_mut()[j].bias[idx] = orig;
            let numeric = (up - down) / (2.0 * h);
            let exact = analytic.d_bias[j][idx];
            let err = if exact.abs() < 1e-8 {
                (numeric - exact).abs()
            } else {
                (numeric - exact).abs() / exact.abs()
            };
            worst = worst.max(err);
        }
    }
    worst
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut rng = crate::rng::stream(0xabcd, &[]);
    for trial in 0..6 {
        let spec = if trial % 2 == 0 {
            MlpSpec::new(vec![4, 7, 3])
        } else {
            MlpSpec::new(vec![4, 6, 5, 2]).with_noise(1, 3)
        };
        let noise_dim = spec.noise_dim;
        let mut mlp = Mlp::init(spec, 100 + trial).unwrap();
        let x = Mat::from_fn(4, 3, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let noise = if noise_dim > 0 {
            Some(Mat::from_fn(noise_dim, 3, |_, _| rng.random::<f64>() * 2.0 - 1.0))
        } else {
            None
        };
        let worst = gradcheck(&mut mlp, &x, noise.as_ref());
        assert!(worst <= 1e-4, "trial {trial}: max rel err {worst}");
    }
}

#[test]
fn last_layer_weights_are_degree_one_homogeneous() {
    let mut mlp = Mlp::init(MlpSpec::new(vec![3, 5, 2]), 4).unwrap();
    let x = Mat::from_row_slice(3, 2, &[0.3, -0.2, 1.1, 0.7, -0.9, 0.25]);
    let base = mlp.forward(&x, None, None).unwrap();
    let last = mlp.layers().len() - 1;
    mlp.layers_mut()[last].weights *= 3.0;
    let scaled = mlp.forward(&x, None, None).unwrap();
    assert!((scaled - base * 3.0).norm() < 1e-12);
}

#[test]
fn init_is_reproducible_and_seed_sensitive() {
    let spec = MlpSpec::new(vec![8, 16, 4]);
    let a = Mlp::init(spec.clone(), 9).unwrap();
    let b = Mlp::init(spec.clone(), 9).unwrap();
    let c = Mlp::init(spec, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn init_respects_fan_in_bound() {
    let spec = MlpSpec::new(vec![50, 20, 1]);
    let mlp = Mlp::init(spec, 3).unwrap();
    let bound0 = (6.0 / 50.0f64).sqrt();
    assert!(mlp.layers()[0].weights.iter().all(|w| w.abs() <= bound0));
    assert!(mlp.layers()[0].weights.iter().any(|w| w.abs() > 0.5 * bound0));
    let bound1 = (1.0 / 20.0f64).sqrt();
    assert!(mlp.layers()[1].weights.iter().all(|w| w.abs() <= bound1));
}

#[test]
fn save_load_forward_is_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mlp.ckpt");
    let spec = MlpSpec::new(vec![6, 9, 4]).with_noise(1, 2);
    let mlp = Mlp::init(spec, 77).unwrap();
    mlp.save(&path).unwrap();
    let restored = Mlp::load(&path).unwrap();
    assert_eq!(restored.rng_seed_used(), 77);

    let mut rng = crate::rng::stream(5, &[]);
    let x = Mat::from_fn(6, 3, |_, _| rng.random::<f64>());
    let noise = Mat::from_fn(2, 3, |_, _| rng.random::<f64>());
    let y0 = mlp.forward(&x, Some(&noise), None).unwrap();
    let y1 = restored.forward(&x, Some(&noise), None).unwrap();
    for (a, b) in y0.iter().zip(y1.iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn spec_validation_catches_bad_concat() {
    assert!(MlpSpec::new(vec![4]).validate().is_err());
    assert!(MlpSpec::new(vec![4, 2]).with_noise(5, 2).validate().is_err());
    assert!(MlpSpec::new(vec![4, 2]).with_noise(0, 0).validate().is_err());
    assert!(MlpSpec::new(vec![4, 3, 2]).with_noise(1, 2).validate().is_ok());
}
