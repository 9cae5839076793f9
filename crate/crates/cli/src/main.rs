//! `gents` — simulate, train, forecast, evaluate, and reproduce the
//! benchmark tables from the command line.
//!
//! Every subcommand exits 0 on success; failures print one JSON error line
//! to stderr (`{"error":"…"}`) and exit nonzero. The `GENTS_OUT_DIR`
//! environment variable overrides output directories when the corresponding
//! flag is left at its default.

mod selftest;

use clap::{Parser, Subcommand};
use gents_core::baselines::{naive_predict, ols_fit, ols_predict};
use gents_core::forecast::{export_forecast, rolling_forecast, GenerationMode};
use gents_core::gan::{train, TrainConfig, TrainData, TrainedGenerator};
use gents_core::harness::{reproduce_table, Method, Scale, Study, TableOptions};
use gents_core::metrics::nrmse;
use gents_core::rng::{derive_seed, tags};
use gents_core::series::{export_series, export_series_csv, import_series, CaseId};
use gents_core::simgen::{
    conditional_mean_exact, conditional_mean_oracle, make_coefficients, simulate,
};
use gents_core::{Error, Result};
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "gents", version, about = "Generative learning for matrix time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a synthetic series and write it to a binary container.
    Simulate {
        /// Data model: case1|case2|case3.
        #[arg(long)]
        case: String,
        /// Frame side length.
        #[arg(long, default_value_t = 32)]
        p: usize,
        /// Last frame index T (frames X_0..X_T).
        #[arg(long)]
        t_len: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.9)]
        radius: f64,
        /// Output container path.
        #[arg(long)]
        out: PathBuf,
        /// Optional debug CSV (one row per frame).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Train generator heads on a simulated series container.
    Train {
        /// Input series container.
        #[arg(long)]
        data: PathBuf,
        /// Output checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Optional loss-trace CSV path.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value = "kl")]
        divergence: String,
        #[arg(long, default_value_t = 3)]
        horizon: usize,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        #[arg(long, default_value_t = 20)]
        noise_dim: usize,
        #[arg(long, default_value_t = 10_000)]
        pair_budget: usize,
        #[arg(long, default_value_t = 1e-3)]
        gen_lr: f64,
        #[arg(long, default_value_t = 1e-3)]
        disc_lr: f64,
        #[arg(long, default_value_t = 1e-5)]
        gen_wd: f64,
        #[arg(long, default_value_t = 1e-5)]
        disc_wd: f64,
        /// Comma-separated generator hidden widths.
        #[arg(long, default_value = "256,128")]
        gen_hidden: String,
        /// Comma-separated discriminator hidden widths.
        #[arg(long, default_value = "256,64")]
        disc_hidden: String,
        #[arg(long, default_value_t = 1)]
        disc_steps: usize,
        #[arg(long, default_value_t = false)]
        shared_head: bool,
        /// Training seed; defaults to the container's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Roll forecasts from a trained generator over the tail of a series.
    Forecast {
        /// Trained generator checkpoint.
        #[arg(long)]
        gen: PathBuf,
        /// Series container (training prefix + evaluation tail).
        #[arg(long)]
        data: PathBuf,
        /// Generation mode: iter|sstep.
        #[arg(long, default_value = "iter")]
        mode: String,
        /// Forecast horizon.
        #[arg(long)]
        s: usize,
        #[arg(long, default_value_t = 100)]
        t_new: usize,
        #[arg(long, default_value_t = 100)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "gents-out")]
        out_dir: PathBuf,
        /// Base name of the dump files.
        #[arg(long, default_value = "forecast")]
        base: String,
    },
    /// Score a trained generator and the baselines against the
    /// conditional-mean targets of the series' own data model.
    Evaluate {
        #[arg(long)]
        gen: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 100)]
        t_new: usize,
        #[arg(long, default_value_t = 100)]
        draws: usize,
        #[arg(long, default_value_t = 1000)]
        oracle_draws: usize,
        #[arg(long, default_value_t = 0.9)]
        radius: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run a study's cells and write the summary table CSV.
    ReproduceTable {
        /// I or II.
        #[arg(long)]
        study: String,
        /// full or desk.
        #[arg(long, default_value = "desk")]
        scale: String,
        #[arg(long, default_value = "gents-out")]
        out_dir: PathBuf,
        /// Restrict to these cases (comma-separated).
        #[arg(long)]
        cases: Option<String>,
        /// Restrict Study-I training lengths (comma-separated).
        #[arg(long)]
        t_values: Option<String>,
        /// Restrict Study-II subject counts (comma-separated).
        #[arg(long)]
        n_values: Option<String>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        t_new: Option<usize>,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        oracle_draws: Option<usize>,
        /// Restrict scored methods (comma-separated: ols,naive,iter,sstep).
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        master_seed: Option<u64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        gen_hidden: Option<String>,
        #[arg(long)]
        disc_hidden: Option<String>,
    },
    /// Run the numeric property suites (divergences, covariance fixed
    /// point, gradients) and report pass/fail.
    Selftest,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli.command) {
        eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
        std::process::exit(1);
    }
}

fn env_out_dir(flag_value: PathBuf, default: &str) -> PathBuf {
    match std::env::var_os("GENTS_OUT_DIR") {
        Some(dir) if flag_value == PathBuf::from(default) => PathBuf::from(dir),
        _ => flag_value,
    }
}

fn parse_widths(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad hidden width {v:?}")))
        })
        .collect()
}

fn parse_usize_list(text: &str) -> Result<Vec<usize>> {
    parse_widths(text)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate { case, p, t_len, seed, radius, out, csv } => {
            let case = CaseId::from_name(&case)?;
            let coeffs = make_coefficients(case, p, seed, radius)?;
            let series = simulate(&coeffs, t_len, seed)?;
            export_series(&out, &series, case, seed)?;
            if let Some(csv_path) = csv {
                export_series_csv(&csv_path, &series)?;
            }
            println!("wrote {} frames of {}x{} to {}", series.len(), p, p, out.display());
            Ok(())
        }
        Command::Train {
            data,
            out,
            trace,
            divergence,
            horizon,
            epochs,
            batch_size,
            noise_dim,
            pair_budget,
            gen_lr,
            disc_lr,
            gen_wd,
            disc_wd,
            gen_hidden,
            disc_hidden,
            disc_steps,
            shared_head,
            seed,
        } => {
            let (series, case, data_seed) = import_series(&data)?;
            let config = TrainConfig {
                divergence,
                noise_dim,
                horizon,
                lag: case.lag(),
                epochs,
                batch_size,
                disc_steps_per_gen_step: disc_steps,
                pair_budget,
                gen_learning_rate: gen_lr,
                gen_weight_decay: gen_wd,
                disc_learning_rate: disc_lr,
                disc_weight_decay: disc_wd,
                gen_hidden: parse_widths(&gen_hidden)?,
                disc_hidden: parse_widths(&disc_hidden)?,
                shared_head,
                seed: seed.unwrap_or(data_seed),
                ..TrainConfig::default()
            };
            let trained = train(TrainData::Single(&series), &config)?;
            trained.save(&out)?;
            if let Some(trace_path) = trace {
                trained.export_trace_csv(&trace_path)?;
            }
            println!(
                "trained {} head(s) on {} frames; checkpoint at {}",
                trained.heads().len(),
                series.len(),
                out.display()
            );
            Ok(())
        }
        Command::Forecast { gen, data, mode, s, t_new, draws, seed, out_dir, base } => {
            let out_dir = env_out_dir(out_dir, "gents-out");
            let mode = GenerationMode::from_name(&mode)?;
            let generator = TrainedGenerator::load(&gen)?;
            let (series, case, data_seed) = import_series(&data)?;
            let means = rolling_forecast(&generator, &series, t_new, s, mode, draws, seed)?;
            std::fs::create_dir_all(&out_dir)?;
            export_forecast(&out_dir, &base, &means, s, mode, draws, case, data_seed)?;
            println!("wrote {} mean frames under {}", means.len(), out_dir.display());
            Ok(())
        }
        Command::Evaluate { gen, data, t_new, draws, oracle_draws, radius, seed, out } => {
            evaluate(gen, data, t_new, draws, oracle_draws, radius, seed, out)
        }
        Command::ReproduceTable {
            study,
            scale,
            out_dir,
            cases,
            t_values,
            n_values,
            p,
            replications,
            epochs,
            t_new,
            draws,
            oracle_draws,
            methods,
            master_seed,
            batch_size,
            gen_hidden,
            disc_hidden,
        } => {
            let study = Study::from_name(&study)?;
            let scale = Scale::from_name(&scale)?;
            let mut opts = TableOptions::defaults(study, scale);
            opts.out_dir = env_out_dir(out_dir, "gents-out");
            if let Some(cases) = cases {
                opts.cases = cases
                    .split(',')
                    .map(|c| CaseId::from_name(c.trim()))
                    .collect::<Result<Vec<_>>>()?;
            }
            if let Some(t_values) = t_values {
                opts.t_values = parse_usize_list(&t_values)?;
            }
            if let Some(n_values) = n_values {
                opts.n_values = parse_usize_list(&n_values)?;
            }
            if let Some(p) = p {
                opts.p = p;
            }
            if let Some(replications) = replications {
                opts.replications = replications;
            }
            if let Some(epochs) = epochs {
                opts.train.epochs = epochs;
            }
            if let Some(t_new) = t_new {
                opts.t_new_count = t_new;
            }
            if let Some(draws) = draws {
                opts.draws = draws;
            }
            if let Some(oracle_draws) = oracle_draws {
                opts.oracle_draws = oracle_draws;
            }
            if let Some(methods) = methods {
                opts.methods = methods
                    .split(',')
                    .map(|m| Method::from_name(m.trim()))
                    .collect::<Result<Vec<_>>>()?;
            }
            if let Some(master_seed) = master_seed {
                opts.master_seed = master_seed;
            }
            if let Some(batch_size) = batch_size {
                opts.train.batch_size = batch_size;
            }
            if let Some(gen_hidden) = gen_hidden {
                opts.train.gen_hidden = parse_widths(&gen_hidden)?;
            }
            if let Some(disc_hidden) = disc_hidden {
                opts.train.disc_hidden = parse_widths(&disc_hidden)?;
            }
            let path = reproduce_table(&opts)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Selftest => selftest::run(),
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    gen: PathBuf,
    data: PathBuf,
    t_new: usize,
    draws: usize,
    oracle_draws: usize,
    radius: f64,
    seed: u64,
    out: PathBuf,
) -> Result<()> {
    let generator = TrainedGenerator::load(&gen)?;
    let (series, case, data_seed) = import_series(&data)?;
    let coeffs = make_coefficients(case, series.p1(), data_seed, radius)?;
    if series.len() <= t_new {
        return Err(Error::Config(format!(
            "series of {} frames cannot hold {t_new} evaluation origins",
            series.len()
        )));
    }
    let t_cut = series.last_index() - t_new;
    let fit = ols_fit(&series.truncated(t_cut)?, case.lag(), None)?;
    let horizon = generator.horizon();

    let mut rows: Vec<(String, usize, f64)> = Vec::new();
    for s in 1..=horizon {
        let mut targets = Vec::with_capacity(t_new);
        for origin in 1..=t_new {
            let cond_end = t_cut + origin - s;
            let history = series.history_ending_at(cond_end)?;
            let target = match conditional_mean_exact(&coeffs, history, s) {
                Some(exact) => exact,
                None => conditional_mean_oracle(
                    &coeffs,
                    history,
                    s,
                    oracle_draws,
                    derive_seed(seed, &[tags::ORACLE, s as u64, origin as u64]),
                )?,
            };
            targets.push(target);
        }
        for mode in [GenerationMode::Iterative, GenerationMode::SStep] {
            let means = rolling_forecast(
                &generator,
                &series,
                t_new,
                s,
                mode,
                draws,
                derive_seed(seed, &[tags::FORECAST, s as u64]),
            )?;
            let avg = means
                .iter()
                .zip(&targets)
                .map(|(m, t)| nrmse(m, t))
                .collect::<Result<Vec<_>>>()?
                .iter()
                .sum::<f64>()
                / t_new as f64;
            rows.push((mode.name().to_string(), s, avg));
        }
        let mut ols_total = 0.0;
        let mut naive_total = 0.0;
        for origin in 1..=t_new {
            let cond_end = t_cut + origin - s;
            let history = series.history_ending_at(cond_end)?;
            ols_total += nrmse(&ols_predict(&fit, history, s)?, &targets[origin - 1])?;
            naive_total += nrmse(&naive_predict(&series, t_cut + origin, s)?, &targets[origin - 1])?;
        }
        rows.push(("ols".into(), s, ols_total / t_new as f64));
        rows.push(("naive".into(), s, naive_total / t_new as f64));
    }

    let mut w = std::io::BufWriter::new(std::fs::File::create(&out)?);
    writeln!(w, "method,s,nrmse")?;
    for (method, s, value) in &rows {
        writeln!(w, "{method},{s},{value:.6}")?;
    }
    w.flush()?;
    println!("wrote {}", out.display());
    Ok(())
}
