//! Adversarial training of sequence generators.
//!
//! For each horizon `s` the objective pits a generator head `G_s` against a
//! discriminator head `H_s` on pairs `(history, X_{t+s})`:
//!
//! ```text
//! L(G_s, H_s) = mean over pairs of [ H_s(x, G_s(η, x)) − f*(H_s(x, y)) ]
//! ```
//!
//! The discriminator ascends `L`, the generator descends it, and the `S`
//! per-horizon subproblems are independent: the full multi-horizon objective
//! decomposes into them, which is why head `s = 1` doubles as the one-step
//! generator that iterative generation composes. An optional shared-head
//! mode replaces the per-horizon heads with a single pair of networks that
//! receive the normalized horizon as an extra input; it is off by default.
//!
//! `Ω` — the admissible index set — contains every `(t, s)` with a complete
//! lag-`k` history at `t` and target inside the observed range:
//! `t ≥ k−1`, `t + s ≤ T`, `1 ≤ s ≤ S` (0-indexed frames `X_0 … X_T`).

mod loss;
mod train;

pub use loss::{
    discriminator_spec, empirical_loss, empirical_loss_with_outputs, generator_spec,
    loss_and_grads, BatchTensors,
};
pub use train::{train, GanHead, TraceRow, TrainedGenerator};

use crate::rng::{stream, tags};
use crate::series::{MatrixSeries, PanelDataset};
use crate::{Error, Mat, Result, Vecf};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Everything the training loop needs to know.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// `"kl"` or `"chi2"`.
    pub divergence: String,
    /// Reference-noise dimension `m`.
    pub noise_dim: usize,
    /// Largest trained horizon `S`.
    pub horizon: usize,
    /// Markov order `k` of the conditioning window.
    pub lag: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub disc_steps_per_gen_step: usize,
    /// Cap on the number of training pairs drawn from `Ω`.
    pub pair_budget: usize,
    pub gen_learning_rate: f64,
    pub gen_weight_decay: f64,
    pub disc_learning_rate: f64,
    pub disc_weight_decay: f64,
    /// First/second moment decay of both optimizers. Alternating min-max
    /// runs favor less momentum than the 0.9 plain-training default.
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    /// Hidden widths of the generator trunk.
    pub gen_hidden: Vec<usize>,
    /// Hidden widths of the discriminator.
    pub disc_hidden: Vec<usize>,
    /// Train one shared pair of networks with a horizon input instead of
    /// per-horizon heads.
    pub shared_head: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            divergence: "kl".into(),
            noise_dim: 20,
            horizon: 3,
            lag: 1,
            epochs: 200,
            batch_size: 64,
            disc_steps_per_gen_step: 1,
            pair_budget: 10_000,
            gen_learning_rate: 1e-4,
            gen_weight_decay: 1e-4,
            disc_learning_rate: 1e-4,
            disc_weight_decay: 1e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            gen_hidden: vec![256, 128],
            disc_hidden: vec![256, 64],
            shared_head: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// The slow-and-steady settings used for panel imaging data:
    /// 500 epochs, minibatches of 12, learning rate and weight decay 1e-4.
    pub fn panel_imaging_preset() -> Self {
        TrainConfig { epochs: 500, batch_size: 12, ..TrainConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 || self.lag < 1 {
            return Err(Error::Config("horizon and lag must be at least 1".into()));
        }
        if self.noise_dim == 0 || self.batch_size == 0 || self.disc_steps_per_gen_step == 0 {
            return Err(Error::Config(
                "noise_dim, batch_size and disc_steps_per_gen_step must be positive".into(),
            ));
        }
        if self.pair_budget < self.batch_size {
            return Err(Error::Config(format!(
                "pair_budget {} below batch_size {}",
                self.pair_budget, self.batch_size
            )));
        }
        crate::fdiv::FDivergence::from_name(&self.divergence)?;
        Ok(())
    }
}

/// Training data: one subject or a panel of them.
#[derive(Debug, Clone, Copy)]
pub enum TrainData<'a> {
    Single(&'a MatrixSeries),
    Panel(&'a PanelDataset),
}

impl<'a> TrainData<'a> {
    pub fn subjects(&self) -> &[MatrixSeries] {
        match self {
            TrainData::Single(s) => std::slice::from_ref(*s),
            TrainData::Panel(p) => p.subjects(),
        }
    }

    pub fn frame_shape(&self) -> (usize, usize) {
        let s = &self.subjects()[0];
        (s.p1(), s.p2())
    }
}

/// One admissible training example: subject `i`, history ending at `t`,
/// target `t + s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairIndex {
    pub subject: usize,
    pub t: usize,
    pub s: usize,
}

/// A sampled subset of `Ω`, plus a descriptor of where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub entries: Vec<PairIndex>,
    pub source: String,
}

impl PairSet {
    /// The lag-`s` slice, in enumeration order.
    pub fn slice(&self, s: usize) -> Vec<PairIndex> {
        self.entries.iter().copied().filter(|e| e.s == s).collect()
    }
}

/// Enumerate `Ω` and draw at most `budget` entries without replacement,
/// subject-balanced for panels.
pub fn build_pair_set(
    data: TrainData,
    k: usize,
    s_max: usize,
    budget: usize,
    seed: u64,
) -> Result<PairSet> {
    if budget == 0 {
        return Err(Error::Config("pair budget must be positive".into()));
    }
    let subjects = data.subjects();
    let mut per_subject: Vec<Vec<PairIndex>> = Vec::with_capacity(subjects.len());
    for (i, series) in subjects.iter().enumerate() {
        let t_last = series.last_index();
        if t_last < k - 1 + s_max {
            return Err(Error::Domain(format!(
                "subject {i}: series of {} frames too short for lag {k}, horizon {s_max}",
                series.len()
            )));
        }
        let mut entries = Vec::new();
        for s in 1..=s_max {
            for t in (k - 1)..=(t_last - s) {
                entries.push(PairIndex { subject: i, t, s });
            }
        }
        per_subject.push(entries);
    }
    let total: usize = per_subject.iter().map(|v| v.len()).sum();
    let source = format!(
        "omega(k={k}, s_max={s_max}, subjects={}, total={total}, budget={budget})",
        subjects.len()
    );
    if total <= budget {
        let entries = per_subject.into_iter().flatten().collect();
        return Ok(PairSet { entries, source });
    }

    // Subject-balanced sampling: permute each subject's entries, then take
    // rounds of one entry per subject until the budget is spent.
    let mut rng = stream(seed, &[tags::PAIR_SAMPLING]);
    for entries in &mut per_subject {
        entries.shuffle(&mut rng);
    }
    let mut picked = Vec::with_capacity(budget);
    let mut depth = 0;
    while picked.len() < budget {
        let mut any = false;
        for entries in &per_subject {
            if let Some(&e) = entries.get(depth) {
                any = true;
                picked.push(e);
                if picked.len() == budget {
                    break;
                }
            }
        }
        if !any {
            break;
        }
        depth += 1;
    }
    Ok(PairSet { entries: picked, source })
}

// ---- frame <-> network vector plumbing --------------------------------------

/// Flatten a frame row-major into a column vector.
pub fn flatten_frame(frame: &Mat) -> Vecf {
    let (r, c) = frame.shape();
    let mut v = Vecf::zeros(r * c);
    for i in 0..r {
        for j in 0..c {
            v[i * c + j] = frame[(i, j)];
        }
    }
    v
}

/// Invert [`flatten_frame`].
pub fn unflatten_frame(v: &Vecf, rows: usize, cols: usize) -> Mat {
    assert_eq!(v.len(), rows * cols, "vector length does not match frame shape");
    let mut m = Mat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = v[i * cols + j];
        }
    }
    m
}

/// Stack a lag-`k` history (oldest first) into one input column.
pub fn flatten_history(history: &[Mat]) -> Vecf {
    let d = history[0].nrows() * history[0].ncols();
    let mut v = Vecf::zeros(d * history.len());
    for (idx, frame) in history.iter().enumerate() {
        v.rows_mut(idx * d, d).copy_from(&flatten_frame(frame));
    }
    v
}

/// Column-batched training tensors for a set of pairs.
pub struct PairMatrices {
    /// Histories, `(k·d) × N`.
    pub x: Mat,
    /// Targets, `d × N`.
    pub y: Mat,
    /// Per-pair loss weights (`1/T_i` per subject, uniform for one subject).
    pub weights: Vec<f64>,
    /// Normalized horizon code per pair, for the shared-head mode.
    pub s_norm: Vec<f64>,
}

/// Materialize pair entries into network-ready matrices.
pub fn assemble_pairs(
    data: TrainData,
    entries: &[PairIndex],
    k: usize,
    s_max: usize,
) -> Result<PairMatrices> {
    if entries.is_empty() {
        return Err(Error::Domain("empty pair batch".into()));
    }
    let subjects = data.subjects();
    let (p1, p2) = data.frame_shape();
    let d = p1 * p2;
    let mut x = Mat::zeros(k * d, entries.len());
    let mut y = Mat::zeros(d, entries.len());
    let mut weights = Vec::with_capacity(entries.len());
    let mut s_norm = Vec::with_capacity(entries.len());
    for (col, e) in entries.iter().enumerate() {
        let series = subjects
            .get(e.subject)
            .ok_or_else(|| Error::Domain(format!("pair references subject {}", e.subject)))?;
        let history = &series.frames()[e.t + 1 - k..=e.t];
        x.column_mut(col).copy_from(&flatten_history(history));
        y.column_mut(col).copy_from(&flatten_frame(series.frame(e.t + e.s)));
        weights.push(1.0 / series.last_index() as f64);
        s_norm.push(e.s as f64 / s_max as f64);
    }
    Ok(PairMatrices { x, y, weights, s_norm })
}

/// Sample an `m × n` matrix of i.i.d. standard normals.
pub fn sample_noise(m: usize, n: usize, rng: &mut impl Rng) -> Mat {
    let mut out = Mat::zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            out[(i, j)] = rng.sample(rand_distr::StandardNormal);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::CaseId;
    use crate::simgen::{make_coefficients, simulate};

    fn series_with_t(t_max: usize, seed: u64) -> MatrixSeries {
        let coeffs = make_coefficients(CaseId::Linear1, 4, seed, 0.9).unwrap();
        simulate(&coeffs, t_max, seed).unwrap()
    }

    #[test]
    fn omega_enumeration_lag1_one_horizon() {
        let series = series_with_t(5, 1);
        let pairs =
            build_pair_set(TrainData::Single(&series), 1, 1, usize::MAX, 0).unwrap();
        assert_eq!(pairs.entries.len(), 5);
        let ts: Vec<usize> = pairs.entries.iter().map(|e| e.t).collect();
        assert_eq!(ts, vec![0, 1, 2, 3, 4]);
        assert!(pairs.entries.iter().all(|e| e.s == 1 && e.t + 1 <= 5));
    }

    #[test]
    fn omega_size_with_two_horizons() {
        let series = series_with_t(4, 2);
        let pairs =
            build_pair_set(TrainData::Single(&series), 1, 2, usize::MAX, 0).unwrap();
        assert_eq!(pairs.entries.len(), 7); // 4 pairs at s=1, 3 at s=2
        assert_eq!(pairs.slice(1).len(), 4);
        assert_eq!(pairs.slice(2).len(), 3);
    }

    #[test]
    fn budget_caps_to_distinct_entries() {
        let series = series_with_t(4, 3);
        let pairs = build_pair_set(TrainData::Single(&series), 1, 2, 3, 9).unwrap();
        assert_eq!(pairs.entries.len(), 3);
        let mut dedup = pairs.entries.clone();
        dedup.sort_by_key(|e| (e.subject, e.s, e.t));
        dedup.dedup();
        assert_eq!(dedup.len(), 3);
    }

    #[test]
    fn pair_invariants_hold_on_random_samples() {
        let series = series_with_t(30, 4);
        for budget in [5, 17, 64] {
            let pairs = build_pair_set(TrainData::Single(&series), 1, 3, budget, 11).unwrap();
            for e in &pairs.entries {
                assert!(e.s >= 1 && e.s <= 3);
                assert!(e.t + e.s <= 30);
            }
        }
    }

    #[test]
    fn lag3_requires_complete_histories() {
        let coeffs = make_coefficients(CaseId::Nonlinear3, 4, 5, 0.9).unwrap();
        let series = simulate(&coeffs, 10, 5).unwrap();
        let pairs =
            build_pair_set(TrainData::Single(&series), 3, 2, usize::MAX, 0).unwrap();
        assert!(pairs.entries.iter().all(|e| e.t >= 2));
        // s=1: t in 2..=9 (8), s=2: t in 2..=8 (7)
        assert_eq!(pairs.entries.len(), 15);
    }

    #[test]
    fn too_short_series_is_an_error() {
        let series = series_with_t(2, 6);
        assert!(build_pair_set(TrainData::Single(&series), 1, 3, usize::MAX, 0).is_err());
    }

    #[test]
    fn panel_sampling_is_subject_balanced() {
        let coeffs = make_coefficients(CaseId::Linear1, 3, 7, 0.9).unwrap();
        let panel = crate::simgen::simulate_panel(&coeffs, 4, 20, 7).unwrap();
        let pairs = build_pair_set(TrainData::Panel(&panel), 1, 1, 12, 3).unwrap();
        assert_eq!(pairs.entries.len(), 12);
        for subject in 0..4 {
            let n = pairs.entries.iter().filter(|e| e.subject == subject).count();
            assert_eq!(n, 3, "subject {subject} got {n} entries");
        }
    }

    #[test]
    fn flatten_round_trip_row_major() {
        let m = Mat::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let v = flatten_frame(&m);
        assert_eq!(v.as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(unflatten_frame(&v, 2, 3), m);
    }

    #[test]
    fn assembled_pairs_line_up_with_frames() {
        let series = series_with_t(6, 8);
        let pairs =
            build_pair_set(TrainData::Single(&series), 1, 2, usize::MAX, 0).unwrap();
        let mats = assemble_pairs(TrainData::Single(&series), &pairs.entries, 1, 2).unwrap();
        for (col, e) in pairs.entries.iter().enumerate() {
            let x_col: Vecf = mats.x.column(col).into_owned();
            assert_eq!(x_col, flatten_frame(series.frame(e.t)));
            let y_col: Vecf = mats.y.column(col).into_owned();
            assert_eq!(y_col, flatten_frame(series.frame(e.t + e.s)));
        }
    }
}
