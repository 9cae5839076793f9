// Scratch probe: Case-1 OLS / Naive NRMSE at desk scale.
use gents_core::harness::{run_experiment, ExperimentConfig, Method};

fn main() {
    let dir = std::env::temp_dir().join("gents_probe_ols");
    let mut config = ExperimentConfig::default();
    config.p = 32;
    config.t_len = 1000;
    config.t_new_count = 100;
    config.replications = 10;
    config.horizon = 3;
    config.methods = vec![Method::Ols, Method::Naive];
    config.out_dir = dir;
    let start = std::time::Instant::now();
    let outcome = run_experiment(&config).unwrap();
    println!("elapsed: {:?}", start.elapsed());
    for cell in &outcome.report.cells {
        println!("{:>6} s={} mean={:.4} sd={:.4} n={}", cell.method, cell.s, cell.mean, cell.sd, cell.count);
    }
}
