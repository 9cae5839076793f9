//! Alternating min-max training and the trained-generator artifact.

use super::loss::{
    discriminator_spec, generator_spec, loss_grads_select, BatchTensors, GradSide,
};
use super::{assemble_pairs, build_pair_set, sample_noise, TrainConfig, TrainData};
use crate::fdiv::FDivergence;
use crate::neural::{read_container, write_container, AdamW, Container, Mlp, MlpSpec, FORMAT_VERSION};
use crate::rng::{derive_seed, stream, tags};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Generator / discriminator pair for one horizon (the discriminator is
/// retained for diagnostics).
#[derive(Debug, Clone, PartialEq)]
pub struct GanHead {
    pub generator: Mlp,
    pub discriminator: Mlp,
}

/// One epoch-level entry of the training-loss trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub s: usize,
    pub gen_loss: f64,
    pub disc_loss: f64,
}

/// A trained multi-horizon generator. In per-horizon mode `heads[s-1]`
/// serves horizon `s` and head 1 doubles as the one-step generator that
/// iterative generation composes; in shared mode one head serves every
/// horizon through its horizon input.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedGenerator {
    heads: Vec<GanHead>,
    config: TrainConfig,
    trace: Vec<TraceRow>,
    frame_rows: usize,
    frame_cols: usize,
}

impl TrainedGenerator {
    /// Assemble a generator from pre-built heads (plug-in oracles,
    /// diagnostics, tests). Expects one head in shared mode, `horizon`
    /// heads otherwise.
    pub fn from_heads(
        heads: Vec<GanHead>,
        config: TrainConfig,
        frame_rows: usize,
        frame_cols: usize,
    ) -> Result<TrainedGenerator> {
        config.validate()?;
        let expected = if config.shared_head { 1 } else { config.horizon };
        if heads.len() != expected {
            return Err(Error::Config(format!(
                "expected {expected} heads, got {}",
                heads.len()
            )));
        }
        Ok(TrainedGenerator { heads, config, trace: Vec::new(), frame_rows, frame_cols })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    pub fn frame_shape(&self) -> (usize, usize) {
        (self.frame_rows, self.frame_cols)
    }

    pub fn heads(&self) -> &[GanHead] {
        &self.heads
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn is_shared(&self) -> bool {
        self.config.shared_head
    }

    /// The head serving horizon `s`; errors on untrained horizons.
    pub fn head(&self, s: usize) -> Result<&GanHead> {
        if s == 0 || s > self.config.horizon {
            return Err(Error::Domain(format!(
                "horizon {s} not trained (1..={})",
                self.config.horizon
            )));
        }
        Ok(if self.config.shared_head { &self.heads[0] } else { &self.heads[s - 1] })
    }

    /// Horizon code column value for shared-head generation.
    pub fn horizon_code(&self, s: usize) -> Option<f64> {
        self.config.shared_head.then(|| s as f64 / self.config.horizon as f64)
    }

    /// Write the loss trace as CSV `epoch,s,gen_loss,disc_loss`.
    pub fn export_trace_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "epoch,s,gen_loss,disc_loss")?;
        for row in &self.trace {
            writeln!(w, "{},{},{},{}", row.epoch, row.s, row.gen_loss, row.disc_loss)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = GeneratorMeta {
            config: self.config.clone(),
            gen_spec: self.heads[0].generator.spec().clone(),
            disc_spec: self.heads[0].discriminator.spec().clone(),
            frame_rows: self.frame_rows,
            frame_cols: self.frame_cols,
            head_seeds: self
                .heads
                .iter()
                .map(|h| (h.generator.rng_seed_used(), h.discriminator.rng_seed_used()))
                .collect(),
        };
        let mut arrays = Vec::new();
        for (i, head) in self.heads.iter().enumerate() {
            arrays.extend(head.generator.to_arrays(&format!("head{i}/gen/")));
            arrays.extend(head.discriminator.to_arrays(&format!("head{i}/disc/")));
        }
        let container = Container {
            version: FORMAT_VERSION,
            seed: self.config.seed,
            meta: serde_json::to_string(&meta).map_err(|e| Error::Checkpoint(e.to_string()))?,
            arrays,
        };
        write_container(path, &container)
    }

    /// Load a generator written by [`TrainedGenerator::save`]. The training
    /// trace is not persisted; the loaded value carries an empty one.
    pub fn load(path: &Path) -> Result<TrainedGenerator> {
        let container = read_container(path)?;
        let meta: GeneratorMeta = serde_json::from_str(&container.meta)
            .map_err(|e| Error::Checkpoint(format!("bad generator metadata: {e}")))?;
        let mut heads = Vec::with_capacity(meta.head_seeds.len());
        for (i, (gen_seed, disc_seed)) in meta.head_seeds.iter().enumerate() {
            heads.push(GanHead {
                generator: Mlp::from_arrays(
                    meta.gen_spec.clone(),
                    *gen_seed,
                    &format!("head{i}/gen/"),
                    &container.arrays,
                )?,
                discriminator: Mlp::from_arrays(
                    meta.disc_spec.clone(),
                    *disc_seed,
                    &format!("head{i}/disc/"),
                    &container.arrays,
                )?,
            });
        }
        Ok(TrainedGenerator {
            heads,
            config: meta.config,
            trace: Vec::new(),
            frame_rows: meta.frame_rows,
            frame_cols: meta.frame_cols,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct GeneratorMeta {
    config: TrainConfig,
    gen_spec: MlpSpec,
    disc_spec: MlpSpec,
    frame_rows: usize,
    frame_cols: usize,
    head_seeds: Vec<(u64, u64)>,
}

/// Train generator heads on a series or panel.
///
/// The multi-horizon objective decomposes over horizons, so each head
/// trains as its own alternating min-max run on the lag-`s` slice of the
/// pair set, with RNG streams derived from `(seed, s)`. Heads may train in
/// parallel; results are deterministic either way.
pub fn train(data: TrainData, config: &TrainConfig) -> Result<TrainedGenerator> {
    config.validate()?;
    let pairs = build_pair_set(data, config.lag, config.horizon, config.pair_budget, config.seed)?;
    let (frame_rows, frame_cols) = data.frame_shape();
    let heads_and_traces: Vec<(GanHead, Vec<TraceRow>)> = if config.shared_head {
        vec![train_head(data, &pairs.entries, 0, config)?]
    } else {
        (1..=config.horizon)
            .into_par_iter()
            .map(|s| train_head(data, &pairs.slice(s), s, config))
            .collect::<Result<Vec<_>>>()?
    };
    let mut heads = Vec::with_capacity(heads_and_traces.len());
    let mut trace = Vec::new();
    for (head, rows) in heads_and_traces {
        heads.push(head);
        trace.extend(rows);
    }
    Ok(TrainedGenerator { heads, config: config.clone(), trace, frame_rows, frame_cols })
}

/// One alternating min-max run. `s_tag = 0` marks the shared head.
fn train_head(
    data: TrainData,
    entries: &[super::PairIndex],
    s_tag: usize,
    config: &TrainConfig,
) -> Result<(GanHead, Vec<TraceRow>)> {
    if entries.is_empty() {
        return Err(Error::Domain(format!("no training pairs for horizon {s_tag}")));
    }
    let div = FDivergence::from_name(&config.divergence)?;
    let (p1, p2) = data.frame_shape();
    let d = p1 * p2;
    let mut gen = Mlp::init(
        generator_spec(config, d),
        derive_seed(config.seed, &[tags::GEN_INIT, s_tag as u64]),
    )?;
    let mut disc = Mlp::init(
        discriminator_spec(config, d),
        derive_seed(config.seed, &[tags::DISC_INIT, s_tag as u64]),
    )?;
    let mut gen_opt = AdamW::new(&gen, config.gen_learning_rate, config.gen_weight_decay)
        .with_betas(config.adam_beta1, config.adam_beta2);
    let mut disc_opt = AdamW::new(&disc, config.disc_learning_rate, config.disc_weight_decay)
        .with_betas(config.adam_beta1, config.adam_beta2);
    let mut rng = stream(config.seed, &[tags::TRAIN_LOOP, s_tag as u64]);

    let all = assemble_pairs(data, entries, config.lag, config.horizon)?;
    let mut order: Vec<usize> = (0..entries.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut gen_sum = 0.0;
        let mut disc_sum = 0.0;
        let mut gen_steps = 0usize;
        let mut disc_steps = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch = BatchTensors::gather(&all, chunk, config.shared_head);
            for _ in 0..config.disc_steps_per_gen_step {
                let noise = sample_noise(config.noise_dim, chunk.len(), &mut rng);
                let (loss, _, disc_g) =
                    loss_grads_select(&gen, &disc, &batch, &noise, &div, GradSide::Discriminator)?;
                guard_loss(loss, epoch, s_tag)?;
                let mut ascent = disc_g.unwrap();
                ascent.scale(-1.0);
                disc_opt.step(&mut disc, &ascent)?;
                disc_sum += loss;
                disc_steps += 1;
            }
            let noise = sample_noise(config.noise_dim, chunk.len(), &mut rng);
            let (loss, gen_g, _) =
                loss_grads_select(&gen, &disc, &batch, &noise, &div, GradSide::Generator)?;
            guard_loss(loss, epoch, s_tag)?;
            gen_opt.step(&mut gen, &gen_g.unwrap())?;
            gen_sum += loss;
            gen_steps += 1;
        }
        trace.push(TraceRow {
            epoch,
            s: s_tag,
            gen_loss: gen_sum / gen_steps.max(1) as f64,
            disc_loss: disc_sum / disc_steps.max(1) as f64,
        });
    }
    Ok((GanHead { generator: gen, discriminator: disc }, trace))
}

fn guard_loss(loss: f64, epoch: usize, s_tag: usize) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::Training(format!(
            "loss became non-finite at epoch {epoch} (horizon tag {s_tag})"
        )));
    }
    if loss.abs() > 1e6 {
        return Err(Error::Training(format!(
            "loss diverged to {loss:.3e} at epoch {epoch} (horizon tag {s_tag})"
        )));
    }
    Ok(())
}
