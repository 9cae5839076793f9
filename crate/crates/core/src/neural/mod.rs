//! Minimal dense-network stack.
//!
//! Networks are plain fully connected stacks: ReLU on hidden layers, identity
//! on the output. A spec may declare concat points where a noise vector
//! and/or a lag encoding is appended to a hidden activation before the next
//! dense layer — that is how generators consume the reference noise.
//!
//! Batches are matrices with **one sample per column** (nalgebra is
//! column-major, so a column is contiguous). The backward pass is hand-rolled
//! reverse mode over the few ops involved (dense, ReLU, concat); the
//! adversarial losses in [`crate::gan`] chain these primitives across two
//! networks.

mod checkpoint;
mod optim;

pub use checkpoint::{read_container, write_container, ArrayEntry, Container, FORMAT_VERSION};
pub use optim::AdamW;

use crate::{Error, Mat, Result, Vecf};
use serde::{Deserialize, Serialize};

/// Architecture description of a dense network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Dimensions `input → hidden … → output`; length ≥ 2.
    pub layer_dims: Vec<usize>,
    /// Layer index whose input gets `noise_dim` extra rows appended.
    pub concat_noise_at: Option<usize>,
    pub noise_dim: usize,
    /// Layer index whose input gets `lag_dim` extra rows appended
    /// (used by the optional shared-head mode to encode the horizon).
    pub concat_lag_at: Option<usize>,
    pub lag_dim: usize,
}

impl MlpSpec {
    pub fn new(layer_dims: Vec<usize>) -> Self {
        MlpSpec {
            layer_dims,
            concat_noise_at: None,
            noise_dim: 0,
            concat_lag_at: None,
            lag_dim: 0,
        }
    }

    pub fn with_noise(mut self, at_layer: usize, noise_dim: usize) -> Self {
        self.concat_noise_at = Some(at_layer);
        self.noise_dim = noise_dim;
        self
    }

    pub fn with_lag_input(mut self, at_layer: usize, lag_dim: usize) -> Self {
        self.concat_lag_at = Some(at_layer);
        self.lag_dim = lag_dim;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::Config("layer_dims needs at least input and output".into()));
        }
        if self.layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("layer_dims entries must be positive".into()));
        }
        let layers = self.num_layers();
        if let Some(at) = self.concat_noise_at {
            if at >= layers || self.noise_dim == 0 {
                return Err(Error::Config(format!(
                    "concat_noise_at {at} out of range or noise_dim 0 (layers: {layers})"
                )));
            }
        }
        if let Some(at) = self.concat_lag_at {
            if at >= layers || self.lag_dim == 0 {
                return Err(Error::Config(format!(
                    "concat_lag_at {at} out of range or lag_dim 0 (layers: {layers})"
                )));
            }
        }
        Ok(())
    }

    /// Number of dense layers.
    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    /// Actual input width of dense layer `j`, concat rows included.
    pub fn layer_input_dim(&self, j: usize) -> usize {
        let mut d = self.layer_dims[j];
        if self.concat_noise_at == Some(j) {
            d += self.noise_dim;
        }
        if self.concat_lag_at == Some(j) {
            d += self.lag_dim;
        }
        d
    }
}

/// One dense layer: `z = weights · input + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `(out_dim, in_dim)`.
    pub weights: Mat,
    pub bias: Vecf,
}

/// A dense network with parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<DenseLayer>,
    rng_seed_used: u64,
}

/// Per-layer activations recorded by [`Mlp::forward_cached`].
pub struct ForwardCache {
    /// Input to each dense layer, concat rows included (`in_dim_j × B`).
    layer_inputs: Vec<Mat>,
    /// Post-activation output of each layer (`dims[j+1] × B`).
    layer_outputs: Vec<Mat>,
}

/// Parameter gradients, shaped like the network (accumulate semantics).
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub d_weights: Vec<Mat>,
    pub d_bias: Vec<Vecf>,
}

/// Gradients with respect to the network inputs.
pub struct InputGrads {
    /// Gradient w.r.t. the primary input (`dims[0] × B`).
    pub d_input: Mat,
    /// Gradient w.r.t. the concatenated noise, when the spec declares it.
    pub d_noise: Option<Mat>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        MlpGrads {
            d_weights: mlp.layers.iter().map(|l| Mat::zeros(l.weights.nrows(), l.weights.ncols())).collect(),
            d_bias: mlp.layers.iter().map(|l| Vecf::zeros(l.bias.len())).collect(),
        }
    }

    pub fn zero(&mut self) {
        for w in &mut self.d_weights {
            w.fill(0.0);
        }
        for b in &mut self.d_bias {
            b.fill(0.0);
        }
    }

    /// Scale every gradient in place (a factor of −1 turns a descent
    /// direction into an ascent one).
    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.d_weights {
            *w *= factor;
        }
        for b in &mut self.d_bias {
            *b *= factor;
        }
    }
}

impl Mlp {
    /// He-uniform initialization on ReLU layers (`±sqrt(6/fan_in)`),
    /// `±sqrt(1/fan_in)` on the linear output layer, zero biases.
    /// Bitwise reproducible per seed.
    pub fn init(spec: MlpSpec, seed: u64) -> Result<Mlp> {
        spec.validate()?;
        let mut rng = crate::rng::stream(seed, &[]);
        let layers = init_layers(&spec, &mut rng);
        Ok(Mlp { spec, layers, rng_seed_used: seed })
    }

    /// All-zero parameters; handy for tests and constant heads.
    pub fn zeros(spec: MlpSpec) -> Result<Mlp> {
        spec.validate()?;
        let layers = (0..spec.num_layers())
            .map(|j| DenseLayer {
                weights: Mat::zeros(spec.layer_dims[j + 1], spec.layer_input_dim(j)),
                bias: Vecf::zeros(spec.layer_dims[j + 1]),
            })
            .collect();
        Ok(Mlp { spec, layers, rng_seed_used: 0 })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn rng_seed_used(&self) -> u64 {
        self.rng_seed_used
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Forward pass; one sample per column. `noise`/`lag` must be provided
    /// exactly when the spec declares the corresponding concat point.
    pub fn forward(&self, input: &Mat, noise: Option<&Mat>, lag: Option<&Mat>) -> Result<Mat> {
        let (out, _) = self.forward_cached(input, noise, lag)?;
        Ok(out)
    }

    /// Forward pass that records per-layer activations for [`Mlp::backward`].
    pub fn forward_cached(
        &self,
        input: &Mat,
        noise: Option<&Mat>,
        lag: Option<&Mat>,
    ) -> Result<(Mat, ForwardCache)> {
        self.check_inputs(input, noise, lag)?;
        let batch = input.ncols();
        let layers = self.spec.num_layers();
        let mut cache = ForwardCache {
            layer_inputs: Vec::with_capacity(layers),
            layer_outputs: Vec::with_capacity(layers),
        };
        let mut activation = input.clone();
        for j in 0..layers {
            let mut layer_in = activation;
            if self.spec.concat_noise_at == Some(j) {
                layer_in = vstack(&layer_in, noise.unwrap());
            }
            if self.spec.concat_lag_at == Some(j) {
                layer_in = vstack(&layer_in, lag.unwrap());
            }
            let layer = &self.layers[j];
            let mut z = &layer.weights * &layer_in;
            for c in 0..batch {
                z.column_mut(c).axpy(1.0, &layer.bias, 1.0);
            }
            if j + 1 < layers {
                z.apply(|v| *v = v.max(0.0));
            }
            cache.layer_inputs.push(layer_in);
            cache.layer_outputs.push(z.clone());
            activation = z;
        }
        Ok((activation, cache))
    }

    /// Reverse-mode pass. `d_output` is the loss gradient at the network
    /// output (`out_dim × B`); parameter gradients are accumulated into
    /// `grads` and the input gradients are returned. ReLU uses subgradient 0
    /// at exactly 0.
    pub fn backward(&self, cache: &ForwardCache, d_output: &Mat, grads: &mut MlpGrads) -> InputGrads {
        let layers = self.spec.num_layers();
        assert_eq!(cache.layer_outputs.len(), layers, "cache does not match network");
        assert_eq!(d_output.nrows(), self.spec.output_dim(), "d_output rows");
        let mut d_noise = None;
        let mut d = d_output.clone();
        for j in (0..layers).rev() {
            if j + 1 < layers {
                // d is w.r.t. post-activation: mask by relu'(z), read off the
                // stored output (output > 0 iff pre-activation > 0).
                let out = &cache.layer_outputs[j];
                d.zip_apply(out, |g, a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            let layer_in = &cache.layer_inputs[j];
            grads.d_weights[j].gemm(1.0, &d, &layer_in.transpose(), 1.0);
            for c in 0..d.ncols() {
                grads.d_bias[j].axpy(1.0, &d.column(c), 1.0);
            }
            let d_full = self.layers[j].weights.tr_mul(&d);
            let mut base = self.spec.layer_dims[j];
            d = d_full.rows(0, base).into_owned();
            if self.spec.concat_noise_at == Some(j) {
                d_noise = Some(d_full.rows(base, self.spec.noise_dim).into_owned());
                base += self.spec.noise_dim;
            }
            let _ = base;
        }
        InputGrads { d_input: d, d_noise }
    }

    fn check_inputs(&self, input: &Mat, noise: Option<&Mat>, lag: Option<&Mat>) -> Result<()> {
        if input.nrows() != self.spec.input_dim() {
            return Err(Error::shape(
                format!("input rows {}", self.spec.input_dim()),
                format!("{}", input.nrows()),
            ));
        }
        match (self.spec.concat_noise_at, noise) {
            (Some(_), Some(n)) => {
                if n.nrows() != self.spec.noise_dim || n.ncols() != input.ncols() {
                    return Err(Error::shape(
                        format!("noise {}x{}", self.spec.noise_dim, input.ncols()),
                        format!("{}x{}", n.nrows(), n.ncols()),
                    ));
                }
            }
            (None, None) => {}
            (Some(_), None) => return Err(Error::shape("noise matrix", "none")),
            (None, Some(_)) => return Err(Error::shape("no noise", "noise given")),
        }
        match (self.spec.concat_lag_at, lag) {
            (Some(_), Some(l)) => {
                if l.nrows() != self.spec.lag_dim || l.ncols() != input.ncols() {
                    return Err(Error::shape(
                        format!("lag {}x{}", self.spec.lag_dim, input.ncols()),
                        format!("{}x{}", l.nrows(), l.ncols()),
                    ));
                }
            }
            (None, None) => {}
            (Some(_), None) => return Err(Error::shape("lag matrix", "none")),
            (None, Some(_)) => return Err(Error::shape("no lag", "lag given")),
        }
        Ok(())
    }
}

fn init_layers(spec: &MlpSpec, rng: &mut impl rand::Rng) -> Vec<DenseLayer> {
    let layers = spec.num_layers();
    (0..layers)
        .map(|j| {
            let fan_in = spec.layer_input_dim(j);
            let fan_out = spec.layer_dims[j + 1];
            let bound = if j + 1 < layers {
                (6.0 / fan_in as f64).sqrt()
            } else {
                (1.0 / fan_in as f64).sqrt()
            };
            let mut weights = Mat::zeros(fan_out, fan_in);
            for v in weights.iter_mut() {
                *v = bound * (2.0 * rng.random::<f64>() - 1.0);
            }
            DenseLayer { weights, bias: Vecf::zeros(fan_out) }
        })
        .collect()
}

/// Stack `b` below `a` (column counts must agree).
fn vstack(a: &Mat, b: &Mat) -> Mat {
    debug_assert_eq!(a.ncols(), b.ncols());
    let mut out = Mat::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

// ---- persistence ----------------------------------------------------------

impl Mlp {
    /// Flatten the parameters into named row-major arrays for the container
    /// format, under `prefix` (e.g. `gen_s1/layer0/weights`).
    pub fn to_arrays(&self, prefix: &str) -> Vec<ArrayEntry> {
        let mut arrays = Vec::with_capacity(2 * self.layers.len());
        for (j, layer) in self.layers.iter().enumerate() {
            let (r, c) = (layer.weights.nrows(), layer.weights.ncols());
            let mut data = Vec::with_capacity(r * c);
            for i in 0..r {
                for k in 0..c {
                    data.push(layer.weights[(i, k)]);
                }
            }
            arrays.push(ArrayEntry {
                name: format!("{prefix}layer{j}/weights"),
                dims: vec![r as u64, c as u64],
                data,
            });
            arrays.push(ArrayEntry {
                name: format!("{prefix}layer{j}/bias"),
                dims: vec![layer.bias.len() as u64],
                data: layer.bias.iter().copied().collect(),
            });
        }
        arrays
    }

    /// Rebuild a network from container arrays written by
    /// [`Mlp::to_arrays`] with the same `prefix`.
    pub fn from_arrays(
        spec: MlpSpec,
        seed: u64,
        prefix: &str,
        arrays: &[ArrayEntry],
    ) -> Result<Mlp> {
        spec.validate()?;
        let find = |name: String| -> Result<&ArrayEntry> {
            arrays
                .iter()
                .find(|e| e.name == name)
                .ok_or_else(|| Error::Checkpoint(format!("missing array {name:?}")))
        };
        let mut layers = Vec::with_capacity(spec.num_layers());
        for j in 0..spec.num_layers() {
            let w = find(format!("{prefix}layer{j}/weights"))?;
            let (r, c) = (spec.layer_dims[j + 1], spec.layer_input_dim(j));
            if w.dims != [r as u64, c as u64] {
                return Err(Error::Checkpoint(format!(
                    "array {} has dims {:?}, spec wants [{r}, {c}]",
                    w.name, w.dims
                )));
            }
            let weights = Mat::from_row_slice(r, c, &w.data);
            let b = find(format!("{prefix}layer{j}/bias"))?;
            if b.dims != [r as u64] {
                return Err(Error::Checkpoint(format!(
                    "array {} has dims {:?}, spec wants [{r}]",
                    b.name, b.dims
                )));
            }
            layers.push(DenseLayer { weights, bias: Vecf::from_vec(b.data.clone()) });
        }
        Ok(Mlp { spec, layers, rng_seed_used: seed })
    }

    /// Write this network alone to a checkpoint file.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let container = Container {
            version: FORMAT_VERSION,
            seed: self.rng_seed_used,
            meta: serde_json::to_string(&self.spec)
                .map_err(|e| Error::Checkpoint(e.to_string()))?,
            arrays: self.to_arrays(""),
        };
        write_container(path, &container)
    }

    /// Load a network written by [`Mlp::save`].
    pub fn load(path: &std::path::Path) -> Result<Mlp> {
        let container = read_container(path)?;
        let spec: MlpSpec = serde_json::from_str(&container.meta)
            .map_err(|e| Error::Checkpoint(format!("bad spec metadata: {e}")))?;
        Mlp::from_arrays(spec, container.seed, "", &container.arrays)
    }
}

#[cfg(test)]
mod tests;
