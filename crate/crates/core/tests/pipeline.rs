//! End-to-end flows over the public API only.

use gents_core::forecast::{generate_sstep, rolling_forecast, GenerationMode};
use gents_core::gan::{train, TrainConfig, TrainData, TrainedGenerator};
use gents_core::metrics::{aggregate, nrmse, MetricSample};
use gents_core::series::{export_series, import_series, CaseId};
use gents_core::simgen::{conditional_mean_exact, make_coefficients, simulate, simulate_panel};

fn tiny_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        noise_dim: 4,
        horizon: 2,
        epochs: 2,
        batch_size: 16,
        pair_budget: usize::MAX,
        gen_hidden: vec![16, 8],
        disc_hidden: vec![16, 8],
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn simulate_persist_train_forecast_score() {
    let dir = tempfile::tempdir().unwrap();
    let coeffs = make_coefficients(CaseId::Linear1, 6, 42, 0.9).unwrap();
    let series = simulate(&coeffs, 80, 43).unwrap();

    // Series container round trip feeds the rest of the flow.
    let series_path = dir.path().join("series.bin");
    export_series(&series_path, &series, CaseId::Linear1, 43).unwrap();
    let (series, case, seed) = import_series(&series_path).unwrap();
    assert_eq!((case, seed), (CaseId::Linear1, 43));

    let trained = train(TrainData::Single(&series), &tiny_train_config(7)).unwrap();
    let ckpt = dir.path().join("gen.ckpt");
    trained.save(&ckpt).unwrap();
    let trained = TrainedGenerator::load(&ckpt).unwrap();

    let t_new = 6;
    for mode in [GenerationMode::Iterative, GenerationMode::SStep] {
        let means = rolling_forecast(&trained, &series, t_new, 2, mode, 8, 11).unwrap();
        assert_eq!(means.len(), t_new);
        let t_cut = series.last_index() - t_new;
        for (i, mean) in means.iter().enumerate() {
            let cond_end = t_cut + i + 1 - 2;
            let history = std::slice::from_ref(series.frame(cond_end));
            let target = conditional_mean_exact(&coeffs, history, 2).unwrap();
            let score = nrmse(mean, &target).unwrap();
            assert!(score.is_finite() && score >= 0.0);
        }
    }
}

#[test]
fn panel_training_supports_per_subject_generation() {
    let coeffs = make_coefficients(CaseId::Nonlinear1, 4, 5, 0.9).unwrap();
    let panel = simulate_panel(&coeffs, 5, 15, 6).unwrap();
    let mut config = tiny_train_config(9);
    config.batch_size = 8;
    let trained = train(TrainData::Panel(&panel), &config).unwrap();
    for subject in panel.subjects() {
        let history = subject.history_ending_at(subject.last_index()).unwrap();
        let draws = generate_sstep(&trained, history, 2, 3, 1).unwrap();
        assert_eq!(draws.len(), 3);
        assert!(draws.iter().all(|d| d.iter().all(|v| v.is_finite())));
    }
}

#[test]
fn shared_head_round_trips_and_generates_every_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let coeffs = make_coefficients(CaseId::Linear1, 4, 15, 0.9).unwrap();
    let series = simulate(&coeffs, 40, 16).unwrap();
    let mut config = tiny_train_config(17);
    config.shared_head = true;
    config.horizon = 3;
    let trained = train(TrainData::Single(&series), &config).unwrap();
    assert_eq!(trained.heads().len(), 1);
    let ckpt = dir.path().join("shared.ckpt");
    trained.save(&ckpt).unwrap();
    let back = TrainedGenerator::load(&ckpt).unwrap();
    assert!(back.is_shared());
    let history = [series.frame(20).clone()];
    for s in 1..=3 {
        let a = generate_sstep(&trained, &history, s, 2, 3).unwrap();
        let b = generate_sstep(&back, &history, s, 2, 3).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn replication_scores_aggregate_like_the_report() {
    let samples = vec![
        vec![MetricSample::new("naive", 1, 1.4), MetricSample::new("iter", 1, 0.7)],
        vec![MetricSample::new("naive", 1, 1.6), MetricSample::new("iter", 1, 0.9)],
    ];
    let report = aggregate(&samples);
    let naive = report.cell("naive", 1).unwrap();
    assert!((naive.mean - 1.5).abs() < 1e-12);
    assert_eq!(naive.count, 2);
    let iter = report.cell("iter", 1).unwrap();
    assert!((iter.mean - 0.8).abs() < 1e-12);
}
