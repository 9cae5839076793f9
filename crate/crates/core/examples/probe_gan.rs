// Scratch probe: Case-2 GAN ordering at reduced scale.
// args: reps epochs gen_lr disc_lr gen_wd disc_wd disc_steps batch
use gents_core::harness::{run_experiment, ExperimentConfig, Method};
use gents_core::series::CaseId;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let get = |i: usize, default: f64| -> f64 {
        args.get(i).map(|v| v.parse().unwrap()).unwrap_or(default)
    };
    let reps = get(1, 1.0) as usize;
    let epochs = get(2, 100.0) as usize;
    let gen_lr = get(3, 1e-3);
    let disc_lr = get(4, 1e-3);
    let gen_wd = get(5, 1e-5);
    let disc_wd = get(6, 1e-5);
    let disc_steps = get(7, 1.0) as usize;
    let batch = get(8, 64.0) as usize;
    let beta1 = get(9, 0.5);
    let small_nets = get(10, 0.0) as usize == 1;
    let divergence = args.get(11).cloned().unwrap_or_else(|| "kl".to_string());

    let dir = std::env::temp_dir().join(format!(
        "gents_probe_gan_{reps}_{epochs}_{gen_lr:e}_{disc_lr:e}_{gen_wd:e}_{disc_wd:e}_{disc_steps}_{batch}_{beta1}_{small_nets}_{divergence}"
    ));
    let mut config = ExperimentConfig::default();
    config.case = CaseId::Nonlinear1;
    config.p = 16;
    config.t_len = 1000;
    config.t_new_count = 100;
    config.replications = reps;
    config.horizon = 3;
    config.draws = 100;
    config.oracle_draws = 1000;
    config.methods = vec![Method::Naive, Method::IterGts, Method::SstepGts];
    config.train.epochs = epochs;
    config.train.gen_learning_rate = gen_lr;
    config.train.disc_learning_rate = disc_lr;
    config.train.gen_weight_decay = gen_wd;
    config.train.disc_weight_decay = disc_wd;
    config.train.disc_steps_per_gen_step = disc_steps;
    config.train.batch_size = batch;
    config.train.adam_beta1 = beta1;
    if small_nets {
        config.train.gen_hidden = vec![128, 64];
        config.train.disc_hidden = vec![128, 32];
    }
    config.train.divergence = divergence.clone();
    config.out_dir = dir.clone();
    let start = std::time::Instant::now();
    match run_experiment(&config) {
        Ok(outcome) => {
            println!("elapsed: {:?}", start.elapsed());
            for cell in &outcome.report.cells {
                println!(
                    "{:>6} s={} mean={:.4} sd={:.4} n={}",
                    cell.method, cell.s, cell.mean, cell.sd, cell.count
                );
            }
            for (r, e) in &outcome.failures {
                println!("FAILED rep {r}: {e}");
            }
        }
        Err(e) => {
            println!("elapsed: {:?}", start.elapsed());
            println!("RUN FAILED: {e}");
            let log = dir.join("failures.log");
            if let Ok(text) = std::fs::read_to_string(log) {
                println!("{text}");
            }
        }
    }
}
