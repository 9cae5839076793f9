//! The empirical variational loss and its gradients.
//!
//! For a batch of pairs `(x_j, y_j)` with weights `w_j` (normalized to sum
//! 1), generator output `ŷ_j = G(η_j, x_j)` and discriminator `H`:
//!
//! ```text
//! loss = Σ_j w_j · [ H(x_j, ŷ_j) − f*(H(x_j, y_j)) ]
//! ```
//!
//! The discriminator sees the concatenation `[x; y]` as one input column.
//! Gradients flow through both networks: the generator only through the
//! first term, via the discriminator's input gradient.

use super::{PairMatrices, TrainConfig};
use crate::fdiv::FDivergence;
use crate::neural::{Mlp, MlpGrads, MlpSpec};
use crate::{Error, Mat, Result};

/// Generator architecture: ReLU trunk over the flattened lag-`k` history,
/// reference noise concatenated before the linear output layer.
pub fn generator_spec(config: &TrainConfig, frame_dim: usize) -> MlpSpec {
    let mut dims = Vec::with_capacity(config.gen_hidden.len() + 2);
    dims.push(config.lag * frame_dim);
    dims.extend_from_slice(&config.gen_hidden);
    dims.push(frame_dim);
    let concat_at = config.gen_hidden.len();
    let mut spec = MlpSpec::new(dims).with_noise(concat_at, config.noise_dim);
    if config.shared_head {
        spec = spec.with_lag_input(concat_at, 1);
    }
    spec
}

/// Discriminator architecture: ReLU trunk over `[history; target]`, scalar
/// score output.
pub fn discriminator_spec(config: &TrainConfig, frame_dim: usize) -> MlpSpec {
    let mut dims = Vec::with_capacity(config.disc_hidden.len() + 2);
    dims.push((config.lag + 1) * frame_dim);
    dims.extend_from_slice(&config.disc_hidden);
    dims.push(1);
    let mut spec = MlpSpec::new(dims);
    if config.shared_head {
        spec = spec.with_lag_input(config.disc_hidden.len().saturating_sub(1), 1);
    }
    spec
}

/// A minibatch in network layout.
pub struct BatchTensors {
    /// Histories, `(k·d) × B`.
    pub x: Mat,
    /// Observed targets, `d × B`.
    pub y: Mat,
    /// Relative pair weights, length `B`.
    pub weights: Vec<f64>,
    /// Normalized horizon row (`1 × B`) for the shared-head mode.
    pub lag_code: Option<Mat>,
}

impl BatchTensors {
    /// Uniformly weighted batch without a horizon code.
    pub fn new(x: Mat, y: Mat) -> Self {
        let n = x.ncols();
        BatchTensors { x, y, weights: vec![1.0; n], lag_code: None }
    }

    /// Gather the given columns out of assembled pair matrices.
    pub fn gather(all: &PairMatrices, cols: &[usize], shared: bool) -> Self {
        let x = all.x.select_columns(cols);
        let y = all.y.select_columns(cols);
        let weights = cols.iter().map(|&c| all.weights[c]).collect();
        let lag_code =
            shared.then(|| Mat::from_fn(1, cols.len(), |_, j| all.s_norm[cols[j]]));
        BatchTensors { x, y, weights, lag_code }
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }
}

fn stack_pair(x: &Mat, y: &Mat) -> Mat {
    let mut out = Mat::zeros(x.nrows() + y.nrows(), x.ncols());
    out.rows_mut(0, x.nrows()).copy_from(x);
    out.rows_mut(x.nrows(), y.nrows()).copy_from(y);
    out
}

fn normalized_weights(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// The loss value given precomputed generator outputs. Shared by
/// [`empirical_loss`] and by tests that plug in arbitrary "generator"
/// outputs (e.g. the observed targets themselves).
pub fn empirical_loss_with_outputs(
    disc: &Mlp,
    batch: &BatchTensors,
    gen_outputs: &Mat,
    div: &FDivergence,
) -> Result<f64> {
    let w = normalized_weights(&batch.weights);
    let fake = disc.forward(&stack_pair(&batch.x, gen_outputs), None, batch.lag_code.as_ref())?;
    let real = disc.forward(&stack_pair(&batch.x, &batch.y), None, batch.lag_code.as_ref())?;
    let mut loss = 0.0;
    for j in 0..batch.len() {
        let conj = div.conjugate(real[(0, j)]);
        if !conj.is_finite() {
            return Err(Error::Training(format!(
                "f* composition is not finite at batch entry {j} (score {})",
                real[(0, j)]
            )));
        }
        loss += w[j] * (fake[(0, j)] - conj);
    }
    Ok(loss)
}

/// The empirical min-max loss for one batch and one noise draw per entry.
pub fn empirical_loss(
    gen: &Mlp,
    disc: &Mlp,
    batch: &BatchTensors,
    noise: &Mat,
    div: &FDivergence,
) -> Result<f64> {
    let outputs = gen.forward(&batch.x, Some(noise), batch.lag_code.as_ref())?;
    empirical_loss_with_outputs(disc, batch, &outputs, div)
}

pub(super) enum GradSide {
    Generator,
    Discriminator,
    Both,
}

/// Loss plus gradients with respect to both networks' parameters.
pub fn loss_and_grads(
    gen: &Mlp,
    disc: &Mlp,
    batch: &BatchTensors,
    noise: &Mat,
    div: &FDivergence,
) -> Result<(f64, MlpGrads, MlpGrads)> {
    let (loss, gen_g, disc_g) = loss_grads_select(gen, disc, batch, noise, div, GradSide::Both)?;
    Ok((loss, gen_g.unwrap(), disc_g.unwrap()))
}

pub(super) fn loss_grads_select(
    gen: &Mlp,
    disc: &Mlp,
    batch: &BatchTensors,
    noise: &Mat,
    div: &FDivergence,
    side: GradSide,
) -> Result<(f64, Option<MlpGrads>, Option<MlpGrads>)> {
    let lag = batch.lag_code.as_ref();
    let w = normalized_weights(&batch.weights);
    let b = batch.len();
    let history_rows = batch.x.nrows();
    let target_rows = batch.y.nrows();

    let (gen_out, gen_cache) = gen.forward_cached(&batch.x, Some(noise), lag)?;
    let (fake_scores, fake_cache) =
        disc.forward_cached(&stack_pair(&batch.x, &gen_out), None, lag)?;
    let (real_scores, real_cache) =
        disc.forward_cached(&stack_pair(&batch.x, &batch.y), None, lag)?;

    let mut loss = 0.0;
    let mut d_fake = Mat::zeros(1, b);
    let mut d_real = Mat::zeros(1, b);
    for j in 0..b {
        let conj = div.conjugate(real_scores[(0, j)]);
        if !conj.is_finite() {
            return Err(Error::Training(format!(
                "f* composition is not finite at batch entry {j} (score {})",
                real_scores[(0, j)]
            )));
        }
        loss += w[j] * (fake_scores[(0, j)] - conj);
        d_fake[(0, j)] = w[j];
        d_real[(0, j)] = -w[j] * div.conjugate_slope(real_scores[(0, j)]);
    }

    let mut disc_grads = MlpGrads::zeros_like(disc);
    let fake_input_grads = disc.backward(&fake_cache, &d_fake, &mut disc_grads);
    let gen_grads = match side {
        GradSide::Discriminator => None,
        GradSide::Generator | GradSide::Both => {
            let d_gen_out = fake_input_grads.d_input.rows(history_rows, target_rows).into_owned();
            let mut g = MlpGrads::zeros_like(gen);
            gen.backward(&gen_cache, &d_gen_out, &mut g);
            Some(g)
        }
    };
    let disc_grads = match side {
        GradSide::Generator => None,
        GradSide::Discriminator | GradSide::Both => {
            disc.backward(&real_cache, &d_real, &mut disc_grads);
            Some(disc_grads)
        }
    };
    Ok((loss, gen_grads, disc_grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::sample_noise;
    use rand::Rng;

    fn tiny_config(hidden_gen: Vec<usize>, hidden_disc: Vec<usize>) -> TrainConfig {
        TrainConfig {
            noise_dim: 1,
            lag: 1,
            gen_hidden: hidden_gen,
            disc_hidden: hidden_disc,
            ..TrainConfig::default()
        }
    }

    /// Discriminator that outputs a constant score.
    fn constant_disc(config: &TrainConfig, d: usize, c: f64) -> Mlp {
        let mut disc = Mlp::zeros(discriminator_spec(config, d)).unwrap();
        let last = disc.layers().len() - 1;
        disc.layers_mut()[last].bias[0] = c;
        disc
    }

    #[test]
    fn constant_discriminator_values() {
        let config = tiny_config(vec![], vec![]);
        let div = FDivergence::kl();
        let gen = Mlp::zeros(generator_spec(&config, 2)).unwrap();
        let batch = BatchTensors::new(Mat::zeros(2, 3), Mat::zeros(2, 3));
        let noise = Mat::zeros(1, 3);

        // h == 1 under KL: loss = 1 - f*(1) = 0.
        let disc = constant_disc(&config, 2, 1.0);
        let loss = empirical_loss(&gen, &disc, &batch, &noise, &div).unwrap();
        assert!(loss.abs() < 1e-15, "loss {loss}");

        // h == 0 under KL: loss = 0 - e^{-1}.
        let disc = constant_disc(&config, 2, 0.0);
        let loss = empirical_loss(&gen, &disc, &batch, &noise, &div).unwrap();
        assert!((loss + (-1.0f64).exp()).abs() < 1e-15, "loss {loss}");
    }

    #[test]
    fn batch_of_two_matches_hand_computation() {
        // Generator ignores everything and emits the constant 0.7; the
        // discriminator reads off the target coordinate: h(x, y) = y.
        let config = tiny_config(vec![], vec![]);
        let div = FDivergence::kl();
        let mut gen = Mlp::zeros(generator_spec(&config, 1)).unwrap();
        gen.layers_mut()[0].bias[0] = 0.7;
        let mut disc = Mlp::zeros(discriminator_spec(&config, 1)).unwrap();
        disc.layers_mut()[0].weights[(0, 1)] = 1.0;

        let batch = BatchTensors::new(
            Mat::from_row_slice(1, 2, &[0.4, -1.1]),
            Mat::from_row_slice(1, 2, &[0.2, -0.3]),
        );
        let noise = Mat::zeros(1, 2);
        let loss = empirical_loss(&gen, &disc, &batch, &noise, &div).unwrap();
        let expected = 0.7 - 0.5 * ((0.2f64 - 1.0).exp() + (-0.3f64 - 1.0).exp());
        assert!((loss - expected).abs() < 1e-15, "loss {loss}, expected {expected}");
    }

    #[test]
    fn gradients_match_finite_differences_through_both_networks() {
        let config = tiny_config(vec![5], vec![6]);
        let div = FDivergence::kl();
        let d = 3;
        let mut gen = Mlp::init(generator_spec(&config, d), 21).unwrap();
        let mut disc = Mlp::init(discriminator_spec(&config, d), 22).unwrap();
        let mut rng = crate::rng::stream(33, &[]);
        let batch = BatchTensors::new(
            Mat::from_fn(d, 4, |_, _| rng.random::<f64>() - 0.5),
            Mat::from_fn(d, 4, |_, _| rng.random::<f64>() - 0.5),
        );
        let noise = sample_noise(1, 4, &mut rng);

        let (_, gen_g, disc_g) = loss_and_grads(&gen, &disc, &batch, &noise, &div).unwrap();
        let h = 1e-6;

        // finite differences over generator weights
        let mut worst: f64 = 0.0;
        for layer in 0..gen.layers().len() {
            let len = gen.layers()[layer].weights.len();
            for idx in [0, len / 3, len - 1] {
                let orig = gen.layers()[layer].weights.as_slice()[idx];
                gen.layers_mut()[layer].weights.as_mut_slice()[idx] = orig + h;
                let up = empirical_loss(&gen, &disc, &batch, &noise, &div).unwrap();
                gen.layers_mut()[layer].weights.as_mut_slice()[idx] = orig - h;
                let down = empirical_loss(&gen, &disc, &batch, &noise, &div).unwrap();
                gen.layers_mut()[layer].weights.as_mut_slice()[idx] = orig;
                let numeric = (up - down) / (2.0 * h);
                let exact = gen_g.d_weights[layer].as_slice()[idx];
                let scale = exact.abs().max(1e-8);
                worst = worst.max((numeric - exact).abs() / scale);
            }
        }
        assert!(worst <= 1e-4, "generator grad err {worst}");

        // finite differences over discriminator weights
        let mut worst: f64 = 0.0;
        for layer in 0..disc.layers().len() {
            let len = disc.layers()[layer].weights.len();
            for idx in [0, len / 2, len - 1] {
                let orig = disc.layers()[layer].weights.as_slice()[idx];
                disc.layers_mut()[layer].weights.as_mut_slice()[idx] = orig + h;
                let up = empirical_loss(&gen, &disc, &batch, &noise, &div).unwrap();
                disc.layers_mut()[layer].weights.as_mut_slice()[idx] = orig - h;
                let down = empirical_loss(&gen, &disc, &batch, &noise, &div).unwrap();
                disc.layers_mut()[layer].weights.as_mut_slice()[idx] = orig;
                let numeric = (up - down) / (2.0 * h);
                let exact = disc_g.d_weights[layer].as_slice()[idx];
                let scale = exact.abs().max(1e-8);
                worst = worst.max((numeric - exact).abs() / scale);
            }
        }
        assert!(worst <= 1e-4, "discriminator grad err {worst}");
    }

    #[test]
    fn chi2_clamp_keeps_loss_finite_for_wild_scores() {
        let config = tiny_config(vec![], vec![]);
        let div = FDivergence::chi_squared();
        let gen = Mlp::zeros(generator_spec(&config, 1)).unwrap();
        let disc = constant_disc(&config, 1, -50.0);
        let batch = BatchTensors::new(Mat::zeros(1, 2), Mat::zeros(1, 2));
        let loss = empirical_loss(&gen, &disc, &batch, &Mat::zeros(1, 2), &div).unwrap();
        // f*(-50) clamps to f*(-2) = -1: loss = -50 - (-1).
        assert!((loss + 49.0).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn kl_overflow_names_the_offending_entry() {
        let config = tiny_config(vec![], vec![]);
        let div = FDivergence::kl();
        let gen = Mlp::zeros(generator_spec(&config, 1)).unwrap();
        let disc = constant_disc(&config, 1, 1e4);
        let batch = BatchTensors::new(Mat::zeros(1, 2), Mat::zeros(1, 2));
        let err = empirical_loss(&gen, &disc, &batch, &Mat::zeros(1, 2), &div).unwrap_err();
        assert!(err.to_string().contains("entry 0"), "{err}");
    }

    #[test]
    fn true_data_outscores_mismatched_constant_under_frozen_disc() {
        // Frozen linear discriminator h(x, y) = mean(y); true targets score
        // higher through the generator term than a far-off constant output.
        let coeffs =
            crate::simgen::make_coefficients(crate::series::CaseId::Linear1, 4, 61, 0.9).unwrap();
        let series = crate::simgen::simulate(&coeffs, 40, 14).unwrap();
        let config = TrainConfig { noise_dim: 1, lag: 1, disc_hidden: vec![], ..TrainConfig::default() };
        let d = 16;
        let mut disc = Mlp::zeros(discriminator_spec(&config, d)).unwrap();
        for j in 0..d {
            disc.layers_mut()[0].weights[(0, d + j)] = 1.0 / d as f64;
        }
        let pairs = crate::gan::build_pair_set(
            crate::gan::TrainData::Single(&series),
            1,
            1,
            usize::MAX,
            0,
        )
        .unwrap();
        let all = crate::gan::assemble_pairs(
            crate::gan::TrainData::Single(&series),
            &pairs.entries,
            1,
            1,
        )
        .unwrap();
        let cols: Vec<usize> = (0..all.x.ncols()).collect();
        let batch = BatchTensors::gather(&all, &cols, false);
        let div = FDivergence::kl();
        let true_loss =
            empirical_loss_with_outputs(&disc, &batch, &batch.y.clone(), &div).unwrap();
        let mismatched = Mat::from_element(d, batch.len(), -10.0);
        let mismatched_loss =
            empirical_loss_with_outputs(&disc, &batch, &mismatched, &div).unwrap();
        assert!(
            true_loss >= mismatched_loss,
            "true {true_loss} < mismatched {mismatched_loss}"
        );
    }
}
