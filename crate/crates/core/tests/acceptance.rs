//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use tama_core::bayesopt::{random_search_control, run_study, suggest, OptimizerConfig, StudyConfig};
use tama_core::config::ConfigFile;
use tama_core::graphdata::{synth_generate, SynthConfig};
use tama_core::numerics::Rng;
use tama_core::tama::Variant;
use tama_core::training::{
    auc_score, average_precision, run_protocol, train_run, window_sweep, write_curves_csv, write_metrics_csv,
    MetricsRow, ModelKind, Prepared, RunResult, TrainConfig,
};

type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn mean_auc(runs: &[RunResult]) -> f64 {
    100.0 * runs.iter().map(|r| r.auc).sum::<f64>() / runs.len() as f64
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for seed in 0..3 {
        for (op, r) in common::gradient_suite(seed) {
            worst = worst.max(r.max_rel_error).max(r.max_rel_error_nonsmooth);
            if r.entries_checked == 0 || !r.passes(1e-4) {
                failures.push(format!("{op}/seed {seed}"));
            }
        }
    }
    for (seed, variant) in [(1, Variant::Momentum), (2, Variant::Momentum), (3, Variant::PlainGru)] {
        let r = common::pipeline_gradient(seed, variant);
        worst = worst.max(r.max_rel_error).max(r.max_rel_error_nonsmooth);
        if !r.passes(1e-4) {
            failures.push(format!("pipeline {variant:?}/seed {seed}"));
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "worst relative error {worst:.2e}, {} failures {failures:?}, {elapsed:.1?}",
            failures.len()
        ),
    )
}

fn closed_forms() -> Outcome {
    let errs = common::closed_form_errors();
    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    outcome(
        errs.iter().all(|e| e.1 <= 1e-9),
        format!("{} cases, worst error {worst:.2e}", errs.len()),
    )
}

fn ema() -> Outcome {
    let (unfold, geometric) = common::ema_errors(17);
    outcome(
        unfold <= 1e-10 && geometric <= 1e-10,
        format!("unfolded {unfold:.2e}, geometric {geometric:.2e}"),
    )
}

fn metrics() -> Outcome {
    let mut rng = Rng::new(23);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (pos, neg) = common::random_metric_instance(&mut rng);
        let auc = auc_score(&pos, &neg).expect("auc");
        worst = worst.max((auc - common::brute_auc(&pos, &neg)).abs());
        let scores: Vec<f64> = pos.iter().chain(&neg).copied().collect();
        let labels: Vec<bool> = pos.iter().map(|_| true).chain(neg.iter().map(|_| false)).collect();
        let keys: Vec<usize> = (0..scores.len()).rev().collect();
        let ap = average_precision(&scores, &labels, &keys).expect("ap");
        worst = worst.max((ap - common::brute_ap(&scores, &labels, &keys)).abs());
    }
    let auc_hand = auc_score(&[0.9, 0.7], &[0.8, 0.2]).expect("auc");
    let ap_hand = average_precision(&[0.9, 0.8, 0.7], &[true, false, true], &[0, 1, 2]).expect("ap");
    let hand_ok = auc_hand == 0.75 && (ap_hand - 5.0 / 6.0).abs() < 1e-15;
    outcome(
        worst <= 1e-12 && hand_ok,
        format!("worst oracle gap {worst:.2e}, hand cases AUC {auc_hand} AP {ap_hand:.6}"),
    )
}

struct DefaultRuns {
    tama: Vec<RunResult>,
    elapsed_tama: Duration,
}

fn benchmark_cfg() -> TrainConfig {
    TrainConfig {
        epochs: 150,
        window: 4,
        seeds: (1000..=1004).collect(),
        ..TrainConfig::default()
    }
}

fn default_data() -> Prepared {
    Prepared::new(&synth_generate(0, &SynthConfig::default()).expect("synthetic data"))
}

fn dynamic_beats_static(data: &Prepared, runs: &DefaultRuns) -> Outcome {
    let start = Instant::now();
    let stat = run_protocol(data, &benchmark_cfg(), ModelKind::Static).expect("static runs");
    let elapsed = start.elapsed() + runs.elapsed_tama;
    let (t, s) = (mean_auc(&runs.tama), mean_auc(&stat));
    outcome(
        t - s >= 3.0 && elapsed < Duration::from_secs(15 * 60),
        format!(
            "TAMA {t:.2} vs static {s:.2} (margin {:.2} points), {elapsed:.1?}",
            t - s
        ),
    )
}

fn momentum_non_inferiority(data: &Prepared, runs: &DefaultRuns) -> Outcome {
    let cfg = benchmark_cfg();
    let gru = run_protocol(data, &cfg, ModelKind::Gru).expect("gru runs");
    let (t, g) = (mean_auc(&runs.tama), mean_auc(&gru));
    let variant = Prepared::new(
        &synth_generate(
            0,
            &SynthConfig {
                p_backbone: 0.10,
                p_churn: 0.05,
                ..SynthConfig::default()
            },
        )
        .expect("variant data"),
    );
    let vt = run_protocol(&variant, &cfg, ModelKind::Tama).expect("tama runs");
    let vg = run_protocol(&variant, &cfg, ModelKind::Gru).expect("gru runs");
    let wins = vt.iter().zip(&vg).filter(|(a, b)| a.auc > b.auc).count();
    let per_seed: Vec<String> = vt
        .iter()
        .zip(&vg)
        .map(|(a, b)| format!("{:.2}/{:.2}", 100.0 * a.auc, 100.0 * b.auc))
        .collect();
    outcome(
        t >= g - 0.5 && wins >= 4,
        format!(
            "default TAMA {t:.2} vs GRU {g:.2}; variant strict wins {wins}/5 (TAMA/GRU per seed {})",
            per_seed.join(" ")
        ),
    )
}

fn forrester(x: f64) -> f64 {
    -((6.0 * x - 2.0).powi(2) * (12.0 * x - 4.0).sin())
}

fn optimizer() -> Outcome {
    let start = Instant::now();
    let grid_best = (0..=10_000)
        .map(|i| forrester(i as f64 / 10_000.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let cfg = OptimizerConfig::default();
    let hits = (0..10u64)
        .filter(|&seed| {
            let mut obs: Vec<(Vec<f64>, f64)> = Vec::new();
            for t in 0..20 {
                let x = suggest(&obs, t, seed, &cfg, |r| vec![r.uniform()]);
                obs.push((x.clone(), forrester(x[0])));
            }
            let best = obs.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max);
            best >= grid_best - 0.05 * grid_best.abs()
        })
        .count();
    let forrester_time = start.elapsed();

    // Reduced scale so ten paired studies fit a test run.
    let data = Prepared::new(
        &synth_generate(
            4,
            &SynthConfig {
                nodes: 30,
                years: 8,
                p_backbone: 0.1,
                ..SynthConfig::default()
            },
        )
        .expect("synthetic data"),
    );
    let base = TrainConfig {
        window: 3,
        ..TrainConfig::default()
    };
    let mut wins = 0;
    let mut min_pruned = usize::MAX;
    let mut pairs = Vec::new();
    for seed in 0..10 {
        let study = StudyConfig {
            trials: 20,
            trial_seeds: vec![1],
            epochs: 40,
            checkpoint_every: 10,
            seed,
            ..StudyConfig::default()
        };
        let bo = run_study(&data, &base, &study).expect("study");
        let rs = random_search_control(&data, &base, &study).expect("control");
        let (b, r) = (
            bo.best_objective().unwrap_or(f64::NEG_INFINITY),
            rs.best_objective().unwrap_or(f64::NEG_INFINITY),
        );
        if b >= r {
            wins += 1;
        }
        min_pruned = min_pruned.min(bo.pruned_count());
        pairs.push(format!("{b:.4}/{r:.4}"));
    }
    outcome(
        hits >= 8 && forrester_time < Duration::from_secs(10) && wins >= 7 && min_pruned >= 1,
        format!(
            "Forrester {hits}/10 in {forrester_time:.1?}; BO >= random in {wins}/10 (BO/random {}); fewest prunes per study {min_pruned}",
            pairs.join(" ")
        ),
    )
}

fn protocol_fidelity() -> Outcome {
    let small = SynthConfig {
        nodes: 15,
        years: 12,
        p_backbone: 0.15,
        ..SynthConfig::default()
    };
    let data = Prepared::new(&synth_generate(1, &small).expect("synthetic data"));
    let run = train_run(&data, &TrainConfig::default(), ModelKind::Tama, 1000).expect("run");
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("curves.csv");
    write_curves_csv(&path, &run).expect("curves");
    let curve_rows = std::fs::read_to_string(&path).expect("read").lines().count() - 1;
    let cfg = TrainConfig {
        epochs: 20,
        seeds: vec![1000, 1001],
        ..TrainConfig::default()
    };
    let sweep = window_sweep(&data, "synthetic", &cfg, ModelKind::Tama, &[3, 4, 5, 6, 7, 8]).expect("sweep");
    let best = sweep.best_window();
    outcome(
        curve_rows == 300 && run.losses.len() == 300 && sweep.rows.len() == 6 && best.is_some(),
        format!(
            "{curve_rows} curve epochs; sweep rows {}, best window {best:?}",
            sweep.rows.len()
        ),
    )
}

fn determinism() -> Outcome {
    let produce = |dir: &std::path::Path| {
        let ds = synth_generate(
            9,
            &SynthConfig {
                nodes: 20,
                years: 7,
                p_backbone: 0.12,
                ..SynthConfig::default()
            },
        )
        .expect("synthetic data");
        let data = Prepared::new(&ds);
        let cfg = TrainConfig {
            epochs: 15,
            window: 3,
            seeds: vec![1000, 1001, 1002],
            ..TrainConfig::default()
        };
        let mut rows = Vec::new();
        for model in [ModelKind::Tama, ModelKind::Gru, ModelKind::Static] {
            for r in run_protocol(&data, &cfg, model).expect("runs") {
                rows.push(MetricsRow {
                    model: model.name().into(),
                    dataset: "synthetic".into(),
                    w: cfg.window,
                    seed: r.seed,
                    auc: r.auc,
                    ap: r.ap,
                    final_loss: r.final_loss,
                });
            }
        }
        let path = dir.join("metrics.csv");
        write_metrics_csv(&path, &rows).expect("metrics");
        (rows, std::fs::read(path).expect("read"))
    };
    let (a, b) = (
        tempfile::tempdir().expect("tempdir"),
        tempfile::tempdir().expect("tempdir"),
    );
    let (rows_a, bytes_a) = produce(a.path());
    let (rows_b, bytes_b) = produce(b.path());
    let bitwise = rows_a.iter().zip(&rows_b).all(|(x, y)| {
        x.auc.to_bits() == y.auc.to_bits()
            && x.ap.to_bits() == y.ap.to_bits()
            && x.final_loss.to_bits() == y.final_loss.to_bits()
    });
    outcome(
        bitwise && rows_a.len() == rows_b.len() && bytes_a == bytes_b,
        format!(
            "{} runs compared bit-for-bit, metrics files identical: {}",
            rows_a.len(),
            bytes_a == bytes_b
        ),
    )
}

fn barley_replay(data: &Prepared) -> Outcome {
    let text = "lr=0.00110\nz_dim=32\ngamma_init=0.78893\nbeta_init=0.67116\nlambda_kl=4.98e-4\n";
    let mut cfg = TrainConfig {
        seeds: vec![1000],
        ..TrainConfig::default()
    };
    let loaded = ConfigFile::parse(text).and_then(|f| f.apply_train(&mut cfg));
    if let Err(e) = loaded {
        return outcome(false, format!("config rejected: {e}"));
    }
    match run_protocol(data, &cfg, ModelKind::Tama) {
        Ok(runs) => outcome(
            runs.len() == 1 && runs[0].auc.is_finite() && runs[0].losses.len() == cfg.epochs,
            format!("{} epochs, held-out AUC {:.2}", cfg.epochs, 100.0 * runs[0].auc),
        ),
        Err(e) => outcome(false, format!("training failed: {e}")),
    }
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        }
    }
}

fn main() {
    let data = default_data();
    let start = Instant::now();
    let tama = run_protocol(&data, &benchmark_cfg(), ModelKind::Tama);
    let default_runs = tama.map(|tama| DefaultRuns {
        tama,
        elapsed_tama: start.elapsed(),
    });
    let shared = |f: fn(&Prepared, &DefaultRuns) -> Outcome| -> Outcome {
        match &default_runs {
            Ok(runs) => guarded(|| f(&data, runs)),
            Err(e) => outcome(false, format!("TAMA runs failed: {e}")),
        }
    };

    let criteria: Vec<Criterion<'_>> = vec![
        ("gradient suite", Box::new(|| guarded(gradients))),
        ("closed forms", Box::new(|| guarded(closed_forms))),
        ("memory EMA equivalence", Box::new(|| guarded(ema))),
        ("metric oracles", Box::new(|| guarded(metrics))),
        ("dynamic beats static", Box::new(|| shared(dynamic_beats_static))),
        (
            "momentum non-inferiority",
            Box::new(|| shared(momentum_non_inferiority)),
        ),
        ("optimizer sanity", Box::new(|| guarded(optimizer))),
        ("protocol fidelity", Box::new(|| guarded(protocol_fidelity))),
        ("determinism", Box::new(|| guarded(determinism))),
        ("barley config replay", Box::new(|| guarded(|| barley_replay(&data)))),
    ];

    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {name}: {} ({})",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
