//! Generation from trained models and rolling forecasting.
//!
//! Two ways to reach horizon `s` from a lag-`k` history:
//!
//! - **iterative**: compose the one-step head `s` times, sliding the history
//!   window and consuming a fresh noise vector at every step;
//! - **s-step**: apply head `s` once with a single noise vector.
//!
//! Both agree exactly at `s = 1` under the same seed. Rolling forecasting
//! re-conditions on the *observed* frames at every origin — generation never
//! free-runs across origins — and reports the mean over `J` draws per
//! origin. Noise streams are derived per `(origin, draw)`, so changing the
//! draw count or the mode leaves unrelated draws untouched.

use crate::gan::{flatten_history, sample_noise, unflatten_frame, TrainedGenerator};
use crate::rng::{derive_seed, stream, tags};
use crate::series::{export_series, CaseId, MatrixSeries};
use crate::{Error, Mat, Result};
use std::io::Write;
use std::path::Path;

/// How to produce a horizon-`s` frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenerationMode {
    Iterative,
    SStep,
}

impl GenerationMode {
    pub fn name(self) -> &'static str {
        match self {
            GenerationMode::Iterative => "iter",
            GenerationMode::SStep => "sstep",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "iter" => Ok(GenerationMode::Iterative),
            "sstep" => Ok(GenerationMode::SStep),
            other => Err(Error::Config(format!(
                "unknown generation mode {other:?}, expected iter|sstep"
            ))),
        }
    }
}

fn check_request(gen: &TrainedGenerator, history: &[Mat], s: usize, draws: usize) -> Result<()> {
    if s == 0 || s > gen.horizon() {
        return Err(Error::Domain(format!("horizon {s} not trained (1..={})", gen.horizon())));
    }
    if draws == 0 {
        return Err(Error::Domain("draw count must be positive".into()));
    }
    let k = gen.config().lag;
    if history.len() != k {
        return Err(Error::shape(format!("{k} history frames"), format!("{}", history.len())));
    }
    let shape = gen.frame_shape();
    if history.iter().any(|f| f.shape() != shape) {
        return Err(Error::shape(format!("{:?} frames", shape), "other"));
    }
    Ok(())
}

/// Pre-draw the per-draw noise streams: draw `j` contributes `per_draw`
/// consecutive vectors, used one per composition step.
fn noise_blocks(m: usize, draws: usize, per_draw: usize, seed: u64) -> Vec<Mat> {
    let mut blocks = vec![Mat::zeros(m, draws); per_draw];
    for j in 0..draws {
        let mut rng = stream(seed, &[tags::FORECAST, j as u64]);
        for block in blocks.iter_mut() {
            let column = sample_noise(m, 1, &mut rng);
            block.column_mut(j).copy_from(&column.column(0));
        }
    }
    blocks
}

/// `J` draws of the horizon-`s` frame by composing the one-step head.
pub fn generate_iterative(
    gen: &TrainedGenerator,
    history: &[Mat],
    s: usize,
    draws: usize,
    seed: u64,
) -> Result<Vec<Mat>> {
    check_request(gen, history, s, draws)?;
    let (p1, p2) = gen.frame_shape();
    let d = p1 * p2;
    let k = gen.config().lag;
    let head = gen.head(1)?;
    let code = gen.horizon_code(1);
    let noise = noise_blocks(gen.config().noise_dim, draws, s, seed);

    // Window of k flattened frame-batches, oldest first; every draw is a column.
    let start = flatten_history(history);
    let mut window: Vec<Mat> = (0..k)
        .map(|i| {
            let mut block = Mat::zeros(d, draws);
            for j in 0..draws {
                block.column_mut(j).copy_from(&start.rows(i * d, d));
            }
            block
        })
        .collect();
    for step_noise in &noise {
        let mut input = Mat::zeros(k * d, draws);
        for (i, block) in window.iter().enumerate() {
            input.rows_mut(i * d, d).copy_from(block);
        }
        let lag_code = code.map(|c| Mat::from_element(1, draws, c));
        let out = head.generator.forward(&input, Some(step_noise), lag_code.as_ref())?;
        window.remove(0);
        window.push(out);
    }
    let last = window.last().unwrap();
    Ok((0..draws).map(|j| unflatten_frame(&last.column(j).into_owned(), p1, p2)).collect())
}

/// `J` draws of the horizon-`s` frame in one application of head `s`.
pub fn generate_sstep(
    gen: &TrainedGenerator,
    history: &[Mat],
    s: usize,
    draws: usize,
    seed: u64,
) -> Result<Vec<Mat>> {
    check_request(gen, history, s, draws)?;
    let (p1, p2) = gen.frame_shape();
    let head = gen.head(s)?;
    let code = gen.horizon_code(s);
    let noise = noise_blocks(gen.config().noise_dim, draws, 1, seed).pop().unwrap();
    let start = flatten_history(history);
    let mut input = Mat::zeros(start.len(), draws);
    for j in 0..draws {
        input.column_mut(j).copy_from(&start);
    }
    let lag_code = code.map(|c| Mat::from_element(1, draws, c));
    let out = head.generator.forward(&input, Some(&noise), lag_code.as_ref())?;
    Ok((0..draws).map(|j| unflatten_frame(&out.column(j).into_owned(), p1, p2)).collect())
}

/// Mean of `draws` generated frames at each of `t_new_count` rolling
/// origins.
///
/// The training cut is `T = last_index − t_new_count`; origin `t_new`
/// conditions on the observed frames ending at `T + t_new − s` and the
/// returned entry is the sample mean of the draws.
pub fn rolling_forecast(
    gen: &TrainedGenerator,
    series: &MatrixSeries,
    t_new_count: usize,
    s: usize,
    mode: GenerationMode,
    draws: usize,
    seed: u64,
) -> Result<Vec<Mat>> {
    if t_new_count == 0 {
        return Err(Error::Domain("need at least one forecasting origin".into()));
    }
    if series.len() <= t_new_count {
        return Err(Error::Domain(format!(
            "series of {} frames cannot hold {t_new_count} origins past its training cut",
            series.len()
        )));
    }
    let t_cut = series.last_index() - t_new_count;
    let k = gen.config().lag;
    let mut means = Vec::with_capacity(t_new_count);
    for t_new in 1..=t_new_count {
        let target = t_cut + t_new;
        if target < s || target - s + 1 < k {
            return Err(Error::Domain(format!(
                "origin {t_new}: no complete lag-{k} history {s} steps before frame {target}"
            )));
        }
        let cond_end = target - s;
        let history = series.history_ending_at(cond_end)?;
        let draw_seed = derive_seed(seed, &[t_new as u64]);
        let frames = match mode {
            GenerationMode::Iterative => generate_iterative(gen, history, s, draws, draw_seed)?,
            GenerationMode::SStep => generate_sstep(gen, history, s, draws, draw_seed)?,
        };
        let mut mean = Mat::zeros(series.p1(), series.p2());
        for f in &frames {
            mean += f;
        }
        means.push(mean / draws as f64);
    }
    Ok(means)
}

/// Dump rolling-forecast means: a series container `<base>.bin` plus an
/// index CSV `<base>_index.csv` with rows `(t_new, s, mode, draws)`.
pub fn export_forecast(
    dir: &Path,
    base: &str,
    means: &[Mat],
    s: usize,
    mode: GenerationMode,
    draws: usize,
    case: CaseId,
    seed: u64,
) -> Result<()> {
    if means.len() < 2 {
        return Err(Error::Domain("forecast dump needs at least two origins".into()));
    }
    let series = MatrixSeries::new(means.to_vec(), 1)?;
    export_series(&dir.join(format!("{base}.bin")), &series, case, seed)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(
        dir.join(format!("{base}_index.csv")),
    )?);
    writeln!(w, "t_new,s,mode,draws")?;
    for t_new in 1..=means.len() {
        writeln!(w, "{t_new},{s},{},{draws}", mode.name())?;
    }
    w.flush()?;
    Ok(())
}
