use tama_core::graphdata::{synth_generate, SynthConfig};
use tama_core::training::{run_protocol, train_run, ModelKind, Prepared, TrainConfig};

#[test]
fn loss_falls_over_fifty_epochs() {
    let data = Prepared::new(&synth_generate(0, &SynthConfig::default()).unwrap());
    let cfg = TrainConfig {
        epochs: 50,
        seeds: vec![1000, 1001, 1002],
        ..TrainConfig::default()
    };
    let runs = run_protocol(&data, &cfg, ModelKind::Tama).unwrap();
    let mean = |k: usize| runs.iter().map(|r| r.losses[k]).sum::<f64>() / runs.len() as f64;
    assert!(mean(49) < mean(0), "{} vs {}", mean(49), mean(0));
    for r in &runs {
        assert_eq!(r.losses.len(), 50);
        assert_eq!(r.aucs.len(), 50);
        assert!((0.0..=1.0).contains(&r.auc) && (0.0..=1.0).contains(&r.ap));
    }
}

#[test]
fn runs_are_reproducible() {
    let data = Prepared::new(
        &synth_generate(
            2,
            &SynthConfig {
                nodes: 15,
                years: 7,
                p_backbone: 0.15,
                ..SynthConfig::default()
            },
        )
        .unwrap(),
    );
    let cfg = TrainConfig {
        epochs: 8,
        window: 3,
        ..TrainConfig::default()
    };
    for model in [ModelKind::Tama, ModelKind::Gru, ModelKind::Static] {
        assert_eq!(
            train_run(&data, &cfg, model, 5).unwrap(),
            train_run(&data, &cfg, model, 5).unwrap()
        );
    }
}

#[test]
fn frozen_graphs_leave_nothing_for_dynamics_to_add() {
    let ds = synth_generate(
        0,
        &SynthConfig {
            p_churn: 0.0,
            ..SynthConfig::default()
        },
    )
    .unwrap();
    let data = Prepared::new(&ds);
    let cfg = TrainConfig {
        epochs: 100,
        seeds: vec![1000, 1001],
        ..TrainConfig::default()
    };
    let mean = |model| {
        let runs = run_protocol(&data, &cfg, model).unwrap();
        runs.iter().map(|r| r.auc).sum::<f64>() / runs.len() as f64
    };
    let (dynamic, stat) = (mean(ModelKind::Tama), mean(ModelKind::Static));
    assert!((dynamic - stat).abs() <= 0.02, "tama {dynamic} static {stat}");
}
