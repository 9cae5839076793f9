//! Summary-table reproduction: sweep a study's cells into one CSV.

use super::experiment::{report_rows_body, run_experiment};
use super::{ExperimentConfig, Method, Scale, Study};
use crate::gan::TrainConfig;
use crate::rng::derive_seed;
use crate::series::CaseId;
use crate::{Error, Result};
use std::io::Write;
use std::path::PathBuf;

/// Sweep description. `defaults(study, scale)` fills the paper-shaped
/// cells; individual fields can then be overridden (fewer cases, smaller
/// frames, shorter training) without touching the protocol.
#[derive(Debug, Clone)]
pub struct TableOptions {
    pub study: Study,
    pub scale: Scale,
    pub cases: Vec<CaseId>,
    /// Training lengths (Study I cells); Study II uses one length.
    pub t_values: Vec<usize>,
    /// Subject counts (Study II cells).
    pub n_values: Vec<usize>,
    pub p: usize,
    pub horizon: usize,
    pub draws: usize,
    pub t_new_count: usize,
    pub replications: usize,
    pub oracle_draws: usize,
    pub methods: Vec<Method>,
    pub train: TrainConfig,
    pub master_seed: u64,
    pub out_dir: PathBuf,
}

impl TableOptions {
    pub fn defaults(study: Study, scale: Scale) -> Self {
        let all_cases = vec![CaseId::Linear1, CaseId::Nonlinear1, CaseId::Nonlinear3];
        let mut train = super::desk_train_defaults();
        let (t_values, n_values, replications, t_new_count) = match (study, scale) {
            (Study::I, Scale::Full) => (vec![1000, 5000], vec![], 100, 500),
            (Study::I, Scale::Desk) => (vec![1000], vec![], 10, 100),
            (Study::II, Scale::Full) => (vec![20], vec![200, 500], 100, 0),
            (Study::II, Scale::Desk) => (vec![20], vec![200], 10, 0),
        };
        train.epochs = match scale {
            Scale::Full => 200,
            Scale::Desk => 100,
        };
        TableOptions {
            study,
            scale,
            cases: all_cases,
            t_values,
            n_values,
            p: 32,
            horizon: 3,
            draws: 100,
            t_new_count,
            replications,
            oracle_draws: 1000,
            methods: Method::ALL.to_vec(),
            train,
            master_seed: 20240901,
            out_dir: PathBuf::from("gents-out"),
        }
    }

    fn cells(&self) -> Vec<(CaseId, usize, usize)> {
        let mut cells = Vec::new();
        match self.study {
            Study::I => {
                for &t in &self.t_values {
                    for &case in &self.cases {
                        cells.push((case, t, 0));
                    }
                }
            }
            Study::II => {
                for &n in &self.n_values {
                    for &case in &self.cases {
                        cells.push((case, self.t_values[0], n));
                    }
                }
            }
        }
        cells
    }
}

/// Run every cell of the table and write one combined CSV
/// (`table_study<S>_<scale>.csv` under `out_dir`). Returns its path.
///
/// Cell runs derive their master seeds from `(master_seed, case, T, n)`, so
/// restricting the sweep to a subset of cells reproduces exactly the same
/// rows for those cells.
pub fn reproduce_table(opts: &TableOptions) -> Result<PathBuf> {
    if opts.cases.is_empty() {
        return Err(Error::Config("table needs at least one case".into()));
    }
    let cells = opts.cells();
    if cells.is_empty() {
        return Err(Error::Config("table has no cells (check t/n values)".into()));
    }
    std::fs::create_dir_all(&opts.out_dir)?;
    let mut body = String::new();
    for (case, t_len, n) in cells {
        let cell_dir = match opts.study {
            Study::I => opts.out_dir.join(format!("{}_t{}", case.name(), t_len)),
            Study::II => opts.out_dir.join(format!("{}_n{}", case.name(), n)),
        };
        let config = ExperimentConfig {
            study: opts.study,
            case,
            p: opts.p,
            t_len,
            subjects: n.max(1),
            horizon: opts.horizon,
            draws: opts.draws,
            t_new_count: opts.t_new_count.max(1),
            replications: opts.replications,
            oracle_draws: opts.oracle_draws,
            spectral_radius: 0.9,
            methods: opts.methods.clone(),
            train: opts.train.clone(),
            master_seed: derive_seed(
                opts.master_seed,
                &[case.lag() as u64, t_len as u64, n as u64],
            ),
            out_dir: cell_dir,
        };
        let outcome = run_experiment(&config)?;
        body.push_str(&report_rows_body(&config, &outcome.report));
    }
    let path = opts
        .out_dir
        .join(format!("table_study{}_{}.csv", opts.study.name(), opts.scale.name()));
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(w, "study,case,T,n,method,s,nrmse_mean,nrmse_sd,replications,master_seed")?;
    write!(w, "{body}")?;
    w.flush()?;
    Ok(path)
}
