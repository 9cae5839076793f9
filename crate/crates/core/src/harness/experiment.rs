//! Replication execution and scoring.
//!
//! One replication: derive a stream from `(master_seed, r)`, simulate the
//! data model, fit the requested methods, forecast at every origin with the
//! iterative and s-step modes, and score each method's mean forecast against
//! the conditional-mean target with NRMSE. Per-origin NRMSE values are
//! averaged within the replication; cross-replication statistics happen in
//! [`crate::metrics::aggregate`].
//!
//! The conditional-mean target uses the closed form where one exists (the
//! linear case at any horizon, every case at one step) and the Monte-Carlo
//! oracle elsewhere.

use super::{ExperimentConfig, Method, Study};
use crate::baselines::{naive_predict, ols_fit, ols_fit_panel, ols_predict, OlsCoefficients};
use crate::forecast::{generate_iterative, generate_sstep, rolling_forecast, GenerationMode};
use crate::gan::{train, TrainConfig, TrainData, TrainedGenerator};
use crate::metrics::{aggregate, nrmse, MetricSample, MetricsReport};
use crate::rng::{derive_seed, tags};
use crate::series::{MatrixSeries, PanelDataset};
use crate::simgen::{
    conditional_mean_exact, conditional_mean_oracle, make_coefficients, simulate, simulate_panel,
    CoefficientSet,
};
use crate::{Error, Mat, Result};
use rayon::prelude::*;
use std::io::Write;
use std::path::{Path, PathBuf};

/// What a finished experiment leaves behind.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub report: MetricsReport,
    /// `(replication, error)` for replications that aborted.
    pub failures: Vec<(usize, String)>,
    pub report_path: PathBuf,
}

/// Run all replications (concurrently; streams are independent) and write
/// `report.csv`, per-replication generator checkpoints and loss traces, and
/// `failures.log` when something aborted. Fails outright when more than 10%
/// of replications abort.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;
    let results: Vec<Result<Vec<MetricSample>>> = (0..config.replications)
        .into_par_iter()
        .map(|r| run_replication(config, r, true))
        .collect();

    let mut per_replication = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (r, result) in results.into_iter().enumerate() {
        match result {
            Ok(samples) => per_replication.push(samples),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    if !failures.is_empty() {
        let mut log = std::io::BufWriter::new(std::fs::File::create(
            config.out_dir.join("failures.log"),
        )?);
        for (r, msg) in &failures {
            writeln!(log, "replication {r}: {msg}")?;
        }
        log.flush()?;
    }
    if failures.len() * 10 > config.replications {
        return Err(Error::Training(format!(
            "{} of {} replications aborted (see failures.log)",
            failures.len(),
            config.replications
        )));
    }
    let report = aggregate(&per_replication);
    let report_path = config.out_dir.join("report.csv");
    write_report_csv(&report_path, config, &report)?;
    Ok(ExperimentOutcome { report, failures, report_path })
}

/// Re-score one replication from its persisted checkpoint: rebuilds the
/// data deterministically, reloads the generator, refits the baselines, and
/// returns the same samples `run_experiment` produced.
pub fn rescore_replication(config: &ExperimentConfig, r: usize) -> Result<Vec<MetricSample>> {
    run_replication(config, r, false)
}

fn wants_gan(config: &ExperimentConfig) -> bool {
    config.methods.iter().any(|m| matches!(m, Method::IterGts | Method::SstepGts))
}

fn checkpoint_path(config: &ExperimentConfig, r: usize) -> PathBuf {
    config.out_dir.join(format!("gen_rep{r}.ckpt"))
}

fn run_replication(
    config: &ExperimentConfig,
    r: usize,
    fresh_training: bool,
) -> Result<Vec<MetricSample>> {
    let rep_seed = derive_seed(config.master_seed, &[tags::REPLICATION, r as u64]);
    let coeffs = make_coefficients(config.case, config.p, rep_seed, config.spectral_radius)?;
    match config.study {
        Study::I => {
            let full = simulate(&coeffs, config.t_len + config.t_new_count, rep_seed)?;
            let train_series = full.truncated(config.t_len)?;
            let gen = prepare_generator(
                config,
                r,
                rep_seed,
                TrainData::Single(&train_series),
                fresh_training,
            )?;
            let fit = if config.methods.contains(&Method::Ols) {
                Some(ols_fit(&train_series, config.case.lag(), None)?)
            } else {
                None
            };
            score_study_i(config, rep_seed, &coeffs, &full, fit.as_ref(), gen.as_ref())
        }
        Study::II => {
            let panel = simulate_panel(&coeffs, config.subjects, config.t_len, rep_seed)?;
            let gen =
                prepare_generator(config, r, rep_seed, TrainData::Panel(&panel), fresh_training)?;
            let fit = if config.methods.contains(&Method::Ols) {
                Some(ols_fit_panel(&panel, config.case.lag(), None)?)
            } else {
                None
            };
            score_study_ii(config, rep_seed, &coeffs, &panel, fit.as_ref(), gen.as_ref())
        }
    }
}

/// Train (and persist) or reload the generator for one replication.
fn prepare_generator(
    config: &ExperimentConfig,
    r: usize,
    rep_seed: u64,
    data: TrainData,
    fresh_training: bool,
) -> Result<Option<TrainedGenerator>> {
    if !wants_gan(config) {
        return Ok(None);
    }
    let path = checkpoint_path(config, r);
    if !fresh_training {
        return Ok(Some(TrainedGenerator::load(&path)?));
    }
    let train_config = TrainConfig {
        lag: config.case.lag(),
        horizon: config.horizon,
        seed: rep_seed,
        ..config.train.clone()
    };
    let gen = train(data, &train_config)?;
    gen.save(&path)?;
    gen.export_trace_csv(&config.out_dir.join(format!("trace_rep{r}.csv")))?;
    Ok(Some(gen))
}

/// Conditional-mean target given the history the forecaster conditions on.
fn target_mean(
    config: &ExperimentConfig,
    coeffs: &CoefficientSet,
    history: &[Mat],
    s: usize,
    rep_seed: u64,
    salt: u64,
) -> Result<Mat> {
    if let Some(exact) = conditional_mean_exact(coeffs, history, s) {
        return Ok(exact);
    }
    conditional_mean_oracle(
        coeffs,
        history,
        s,
        config.oracle_draws,
        derive_seed(rep_seed, &[tags::ORACLE, s as u64, salt]),
    )
}

fn mean_frame(frames: &[Mat]) -> Mat {
    let mut total = Mat::zeros(frames[0].nrows(), frames[0].ncols());
    for f in frames {
        total += f;
    }
    total / frames.len() as f64
}

fn score_study_i(
    config: &ExperimentConfig,
    rep_seed: u64,
    coeffs: &CoefficientSet,
    full: &MatrixSeries,
    fit: Option<&OlsCoefficients>,
    gen: Option<&TrainedGenerator>,
) -> Result<Vec<MetricSample>> {
    let t_cut = config.t_len;
    let mut samples = Vec::new();
    for s in 1..=config.horizon {
        let mut targets = Vec::with_capacity(config.t_new_count);
        for t_new in 1..=config.t_new_count {
            let cond_end = t_cut + t_new - s;
            let history = full.history_ending_at(cond_end)?;
            targets.push(target_mean(config, coeffs, history, s, rep_seed, t_new as u64)?);
        }
        for &method in &config.methods {
            let mut total = 0.0;
            match method {
                Method::Ols => {
                    let fit = fit.expect("ols requested");
                    for t_new in 1..=config.t_new_count {
                        let cond_end = t_cut + t_new - s;
                        let history = full.history_ending_at(cond_end)?;
                        let pred = ols_predict(fit, history, s)?;
                        total += nrmse(&pred, &targets[t_new - 1])?;
                    }
                }
                Method::Naive => {
                    for t_new in 1..=config.t_new_count {
                        let pred = naive_predict(full, t_cut + t_new, s)?;
                        total += nrmse(&pred, &targets[t_new - 1])?;
                    }
                }
                Method::IterGts | Method::SstepGts => {
                    let gen = gen.expect("generator requested");
                    let mode = if method == Method::IterGts {
                        GenerationMode::Iterative
                    } else {
                        GenerationMode::SStep
                    };
                    let means = rolling_forecast(
                        gen,
                        full,
                        config.t_new_count,
                        s,
                        mode,
                        config.draws,
                        derive_seed(rep_seed, &[tags::FORECAST, s as u64]),
                    )?;
                    for (mean, target) in means.iter().zip(&targets) {
                        total += nrmse(mean, target)?;
                    }
                }
            }
            samples.push(MetricSample::new(
                method.name(),
                s,
                total / config.t_new_count as f64,
            ));
        }
    }
    Ok(samples)
}

fn score_study_ii(
    config: &ExperimentConfig,
    rep_seed: u64,
    coeffs: &CoefficientSet,
    panel: &PanelDataset,
    fit: Option<&OlsCoefficients>,
    gen: Option<&TrainedGenerator>,
) -> Result<Vec<MetricSample>> {
    let t_last = config.t_len;
    let mut samples = Vec::new();
    for s in 1..=config.horizon {
        let mut targets = Vec::with_capacity(panel.num_subjects());
        for (i, subject) in panel.subjects().iter().enumerate() {
            let history = subject.history_ending_at(t_last)?;
            targets.push(target_mean(config, coeffs, history, s, rep_seed, i as u64)?);
        }
        for &method in &config.methods {
            let mut total = 0.0;
            for (i, subject) in panel.subjects().iter().enumerate() {
                let history = subject.history_ending_at(t_last)?;
                let pred = match method {
                    Method::Ols => ols_predict(fit.expect("ols requested"), history, s)?,
                    Method::Naive => subject.frame(t_last).clone(),
                    Method::IterGts | Method::SstepGts => {
                        let gen = gen.expect("generator requested");
                        let seed =
                            derive_seed(rep_seed, &[tags::FORECAST, s as u64, i as u64]);
                        let frames = if method == Method::IterGts {
                            generate_iterative(gen, history, s, config.draws, seed)?
                        } else {
                            generate_sstep(gen, history, s, config.draws, seed)?
                        };
                        mean_frame(&frames)
                    }
                };
                total += nrmse(&pred, &targets[i])?;
            }
            samples.push(MetricSample::new(
                method.name(),
                s,
                total / panel.num_subjects() as f64,
            ));
        }
    }
    Ok(samples)
}

/// CSV schema: `study,case,T,n,method,s,nrmse_mean,nrmse_sd,replications,master_seed`.
/// `n` is blank for Study I.
pub(super) fn write_report_csv(
    path: &Path,
    config: &ExperimentConfig,
    report: &MetricsReport,
) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(w, "{}", report_rows(config, report))?;
    w.flush()?;
    Ok(())
}

pub(super) fn report_rows(config: &ExperimentConfig, report: &MetricsReport) -> String {
    let mut out = String::from("study,case,T,n,method,s,nrmse_mean,nrmse_sd,replications,master_seed\n");
    out.push_str(&report_rows_body(config, report));
    out
}

pub(super) fn report_rows_body(config: &ExperimentConfig, report: &MetricsReport) -> String {
    use std::fmt::Write as _;
    let n = match config.study {
        Study::I => String::new(),
        Study::II => config.subjects.to_string(),
    };
    let mut out = String::new();
    for &method in &config.methods {
        for s in 1..=config.horizon {
            if let Some(cell) = report.cell(method.name(), s) {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{:.6},{:.6},{},{}",
                    config.study.name(),
                    config.case.name(),
                    config.t_len,
                    n,
                    cell.method,
                    cell.s,
                    cell.mean,
                    cell.sd,
                    cell.count,
                    config.master_seed
                )
                .unwrap();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoke_config(dir: &Path) -> ExperimentConfig {
        let mut config = ExperimentConfig::default();
        config.p = 8;
        config.t_len = 60;
        config.t_new_count = 10;
        config.replications = 1;
        config.horizon = 2;
        config.draws = 5;
        config.oracle_draws = 50;
        config.train.epochs = 2;
        config.train.batch_size = 16;
        config.train.gen_hidden = vec![16, 8];
        config.train.disc_hidden = vec![16, 8];
        config.train.noise_dim = 4;
        config.out_dir = dir.to_path_buf();
        config
    }

    #[test]
    fn smoke_run_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let config = smoke_config(dir.path());
        let outcome = run_experiment(&config).unwrap();
        assert!(outcome.failures.is_empty());
        assert!(outcome.report_path.exists());
        assert!(dir.path().join("gen_rep0.ckpt").exists());
        assert!(dir.path().join("trace_rep0.csv").exists());
        // 4 methods x 2 horizons
        assert_eq!(outcome.report.cells.len(), 8);
        let text = std::fs::read_to_string(&outcome.report_path).unwrap();
        assert!(text.starts_with("study,case,T,n,method,s,"));
        assert_eq!(text.lines().count(), 9);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let mut a = smoke_config(dir_a.path());
        a.replications = 2;
        let mut b = a.clone();
        b.out_dir = dir_b.path().to_path_buf();
        let out_a = run_experiment(&a).unwrap();
        let out_b = run_experiment(&b).unwrap();
        let bytes_a = std::fs::read(&out_a.report_path).unwrap();
        let bytes_b = std::fs::read(&out_b.report_path).unwrap();
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn rescoring_persisted_generators_reproduces_the_report() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = smoke_config(dir.path());
        config.replications = 2;
        let outcome = run_experiment(&config).unwrap();
        let rescored: Vec<Vec<MetricSample>> = (0..config.replications)
            .map(|r| rescore_replication(&config, r).unwrap())
            .collect();
        let report = aggregate(&rescored);
        assert_eq!(report, outcome.report);
    }

    #[test]
    fn study_ii_smoke_runs_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = smoke_config(dir.path());
        config.study = Study::II;
        config.subjects = 4;
        config.t_len = 12;
        config.case = crate::series::CaseId::Nonlinear1;
        let outcome = run_experiment(&config).unwrap();
        assert_eq!(outcome.report.cells.len(), 8);
        for cell in &outcome.report.cells {
            assert!(cell.mean.is_finite() && cell.mean > 0.0);
        }
    }

    #[test]
    fn ols_only_skips_gan_training() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = smoke_config(dir.path());
        config.methods = vec![Method::Ols, Method::Naive];
        let outcome = run_experiment(&config).unwrap();
        assert!(!dir.path().join("gen_rep0.ckpt").exists());
        assert_eq!(outcome.report.cells.len(), 4);
    }
}
