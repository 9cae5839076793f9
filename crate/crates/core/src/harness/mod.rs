//! Experiment configuration, orchestration and CSV emission.
//!
//! A benchmark run is described by an [`ExperimentConfig`]: one data model
//! cell (case, sizes) plus the forecasting protocol (horizons, origins,
//! draws) and replication count. [`experiment::run_experiment`] executes the
//! replications — each on its own derived RNG stream, so execution order is
//! irrelevant — and [`table::reproduce_table`] sweeps the study's cells into
//! one summary CSV.
//!
//! Configs load from flat `key=value` text (one pair per line, `#` comments)
//! with every key mirroring a field name; the CLI applies the same
//! `key=value` grammar for flag overrides.

mod experiment;
mod table;

pub use experiment::{rescore_replication, run_experiment, ExperimentOutcome};
pub use table::{reproduce_table, TableOptions};

use crate::gan::TrainConfig;
use crate::series::CaseId;
use crate::{Error, Result};
use std::path::PathBuf;

/// Which simulation study layout to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    /// Single time series per replication.
    I,
    /// Panel of subjects per replication.
    II,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::I => "I",
            Study::II => "II",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "I" | "i" | "1" => Ok(Study::I),
            "II" | "ii" | "2" => Ok(Study::II),
            other => Err(Error::Config(format!("unknown study {other:?}, expected I|II"))),
        }
    }
}

/// Paper-sized or laptop-sized sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Full,
    Desk,
}

impl Scale {
    pub fn name(self) -> &'static str {
        match self {
            Scale::Full => "full",
            Scale::Desk => "desk",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(Scale::Full),
            "desk" => Ok(Scale::Desk),
            other => Err(Error::Config(format!("unknown scale {other:?}, expected full|desk"))),
        }
    }
}

/// Forecasting methods scored by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ols,
    Naive,
    IterGts,
    SstepGts,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ols, Method::Naive, Method::IterGts, Method::SstepGts];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ols => "ols",
            Method::Naive => "naive",
            Method::IterGts => "iter",
            Method::SstepGts => "sstep",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "ols" => Ok(Method::Ols),
            "naive" => Ok(Method::Naive),
            "iter" => Ok(Method::IterGts),
            "sstep" => Ok(Method::SstepGts),
            other => Err(Error::Config(format!(
                "unknown method {other:?}, expected ols|naive|iter|sstep"
            ))),
        }
    }
}

/// Full description of one benchmark cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub study: Study,
    pub case: CaseId,
    /// Frame side length (frames are `p × p`).
    pub p: usize,
    /// Training length `T`: frames `X_0 … X_T` are available for fitting.
    pub t_len: usize,
    /// Subject count for Study II (ignored by Study I).
    pub subjects: usize,
    /// Largest forecast horizon `S`.
    pub horizon: usize,
    /// Draws `J` averaged into each mean forecast.
    pub draws: usize,
    /// Rolling origins per replication (Study I).
    pub t_new_count: usize,
    pub replications: usize,
    /// Monte-Carlo draws for nonlinear conditional-mean targets.
    pub oracle_draws: usize,
    pub spectral_radius: f64,
    /// Methods to fit and score.
    pub methods: Vec<Method>,
    /// Training hyperparameters. `lag`, `horizon` and `seed` are derived
    /// per replication and case; the values here are ignored.
    pub train: TrainConfig,
    pub master_seed: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            study: Study::I,
            case: CaseId::Linear1,
            p: 32,
            t_len: 1000,
            subjects: 200,
            horizon: 3,
            draws: 100,
            t_new_count: 100,
            replications: 10,
            oracle_draws: 1000,
            spectral_radius: 0.9,
            methods: Method::ALL.to_vec(),
            train: desk_train_defaults(),
            master_seed: 20240901,
            out_dir: PathBuf::from("gents-out"),
        }
    }
}

/// Training hyperparameters that converge within the desk epoch budget.
pub fn desk_train_defaults() -> TrainConfig {
    TrainConfig {
        epochs: 100,
        gen_learning_rate: 1e-3,
        gen_weight_decay: 1e-5,
        disc_learning_rate: 1e-3,
        disc_weight_decay: 1e-5,
        ..TrainConfig::default()
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("need at least one replication".into()));
        }
        if self.horizon == 0 || self.draws == 0 || self.p == 0 || self.oracle_draws == 0 {
            return Err(Error::Config(
                "horizon, draws, p and oracle_draws must be positive".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("select at least one method".into()));
        }
        let k = self.case.lag();
        match self.study {
            Study::I => {
                if self.t_new_count == 0 {
                    return Err(Error::Config("Study I needs t_new_count >= 1".into()));
                }
                if self.t_len < k + self.horizon {
                    return Err(Error::Config(format!(
                        "t_len {} too short for lag {k} and horizon {}",
                        self.t_len, self.horizon
                    )));
                }
                // every origin must have a complete history s steps back
                if self.t_len + 1 < k + self.horizon {
                    return Err(Error::Config("origins lack complete histories".into()));
                }
            }
            Study::II => {
                if self.subjects == 0 {
                    return Err(Error::Config("Study II needs subjects >= 1".into()));
                }
                if self.t_len < k + self.horizon {
                    return Err(Error::Config(format!(
                        "subject length {} too short for lag {k} and horizon {}",
                        self.t_len, self.horizon
                    )));
                }
            }
        }
        if !(self.spectral_radius > 0.0 && self.spectral_radius < 1.0) {
            return Err(Error::Config("spectral_radius must lie in (0, 1)".into()));
        }
        self.train.validate()
    }

    /// Load from flat `key=value` text.
    pub fn from_kv_text(text: &str) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got {line:?}", lineno + 1))
            })?;
            config.apply(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<ExperimentConfig> {
        Self::from_kv_text(&std::fs::read_to_string(path)?)
    }

    /// Apply one `key=value` override. Keys mirror field names; train
    /// hyperparameters are addressed directly (`epochs=…`, `gen_hidden=…`).
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| {
                Error::Config(format!("invalid value {value:?} for {key}"))
            })
        }
        fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
            value
                .split(',')
                .filter(|v| !v.trim().is_empty())
                .map(|v| parse::<usize>(key, v.trim()))
                .collect()
        }
        match key {
            "study" => self.study = Study::from_name(value)?,
            "case" => self.case = CaseId::from_name(value)?,
            "p" => self.p = parse(key, value)?,
            "t_len" => self.t_len = parse(key, value)?,
            "subjects" => self.subjects = parse(key, value)?,
            "horizon" => self.horizon = parse(key, value)?,
            "draws" => self.draws = parse(key, value)?,
            "t_new_count" => self.t_new_count = parse(key, value)?,
            "replications" => self.replications = parse(key, value)?,
            "oracle_draws" => self.oracle_draws = parse(key, value)?,
            "spectral_radius" => self.spectral_radius = parse(key, value)?,
            "master_seed" => self.master_seed = parse(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "methods" => {
                self.methods = value
                    .split(',')
                    .filter(|v| !v.trim().is_empty())
                    .map(|v| Method::from_name(v.trim()))
                    .collect::<Result<Vec<_>>>()?;
            }
            "divergence" => self.train.divergence = value.to_string(),
            "noise_dim" => self.train.noise_dim = parse(key, value)?,
            "epochs" => self.train.epochs = parse(key, value)?,
            "batch_size" => self.train.batch_size = parse(key, value)?,
            "disc_steps_per_gen_step" => {
                self.train.disc_steps_per_gen_step = parse(key, value)?
            }
            "pair_budget" => self.train.pair_budget = parse(key, value)?,
            "gen_learning_rate" => self.train.gen_learning_rate = parse(key, value)?,
            "gen_weight_decay" => self.train.gen_weight_decay = parse(key, value)?,
            "disc_learning_rate" => self.train.disc_learning_rate = parse(key, value)?,
            "disc_weight_decay" => self.train.disc_weight_decay = parse(key, value)?,
            "gen_hidden" => self.train.gen_hidden = parse_list(key, value)?,
            "disc_hidden" => self.train.disc_hidden = parse_list(key, value)?,
            "shared_head" => self.train.shared_head = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip_covers_fields() {
        let text = "\
# benchmark cell
study=II
case=case2
p=16
t_len=20
subjects=50
horizon=2
draws=25
replications=3
methods=ols,naive
epochs=7
gen_hidden=32,16
master_seed=99
out_dir=/tmp/xyz
";
        let config = ExperimentConfig::from_kv_text(text).unwrap();
        assert_eq!(config.study, Study::II);
        assert_eq!(config.case, CaseId::Nonlinear1);
        assert_eq!(config.p, 16);
        assert_eq!(config.subjects, 50);
        assert_eq!(config.methods, vec![Method::Ols, Method::Naive]);
        assert_eq!(config.train.epochs, 7);
        assert_eq!(config.train.gen_hidden, vec![32, 16]);
        assert_eq!(config.out_dir, PathBuf::from("/tmp/xyz"));
        assert!(config.validate().is_ok());
    }

    #[test]
    fn unknown_keys_and_values_are_rejected() {
        let mut config = ExperimentConfig::default();
        assert!(config.apply("no_such_key", "1").is_err());
        assert!(config.apply("replications", "many").is_err());
        assert!(config.apply("methods", "ols,teleport").is_err());
        assert!(ExperimentConfig::from_kv_text("study: I").is_err());
    }

    #[test]
    fn validation_catches_degenerate_cells() {
        let mut config = ExperimentConfig::default();
        config.replications = 0;
        assert!(config.validate().is_err());
        let mut config = ExperimentConfig::default();
        config.t_len = 2;
        assert!(config.validate().is_err());
        let mut config = ExperimentConfig::default();
        config.methods.clear();
        assert!(config.validate().is_err());
        let mut config = ExperimentConfig::default();
        config.spectral_radius = 1.0;
        assert!(config.validate().is_err());
    }
}
