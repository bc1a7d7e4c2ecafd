use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use tama_core::bayesopt::{
    apply_hyper, random_search_control, run_study, write_trial_log, MedianPruner, OptimizerConfig, StudyConfig,
    StudyResult,
};
use tama_core::config::{self, hyper_entries, parse_seed_list, parse_usize_list, train_entries, ConfigFile};
use tama_core::graphdata::{synth_generate, SynthConfig, TemporalDataset};
use tama_core::training::{
    aggregate_runs, average_sweep_rows, run_protocol, sig6, window_sweep, write_curves_csv, write_metrics_csv,
    write_sweep_csv, EvalReport, MetricsRow, ModelKind, Prepared, RunResult, TrainConfig,
};

use crate::manifest::{fingerprint, Manifest};
use crate::{CommonArgs, Control, ModelArg, SweepArgs, SynthArgs, TrainArgs, TuneArgs};

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    match path {
        Some(p) => ConfigFile::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(ConfigFile::default()),
    }
}

/// The flag if given, else the config file's value for `key`.
fn pick<T: FromStr>(flag: Option<T>, file: &ConfigFile, key: &str) -> Result<Option<T>> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => Ok(file.get_parsed(key)?),
    }
}

fn ensure_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

/// Runs `f` on a pool of `jobs` threads.
fn in_pool<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
        Ok(pool.install(f))
    }
    #[cfg(not(feature = "parallel"))]
    {
        if jobs > 1 {
            log::warn!("built without the parallel feature; --jobs {jobs} runs sequentially");
        }
        Ok(f())
    }
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let file = load_config(a.config.as_deref())?;
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        nodes: pick(a.nodes, &file, "nodes")?.unwrap_or(d.nodes),
        years: pick(a.years, &file, "years")?.unwrap_or(d.years),
        start_year: pick(a.start_year, &file, "start_year")?.unwrap_or(d.start_year),
        p_backbone: pick(a.backbone, &file, "backbone")?.unwrap_or(d.p_backbone),
        p_churn: pick(a.churn, &file, "churn")?.unwrap_or(d.p_churn),
        feature_noise: pick(a.feature_noise, &file, "feature_noise")?.unwrap_or(d.feature_noise),
        ..d
    };
    let seed = pick(a.seed, &file, "seed")?.unwrap_or(0);
    let ds = synth_generate(seed, &cfg)?;
    ensure_out(&a.out)?;
    ds.write_csv(&a.out)?;
    let edges = a.out.join("edges.csv");
    let features = a.out.join("features.csv");

    let mut m = Manifest::new("synth");
    m.set("nodes", cfg.nodes);
    m.set("years", cfg.years);
    m.set("start_year", cfg.start_year);
    m.set("backbone", cfg.p_backbone);
    m.set("churn", cfg.p_churn);
    m.set("feature_noise", cfg.feature_noise);
    m.set("seed", seed);
    m.set("dataset_sha256", fingerprint(&[&edges, &features])?);
    m.write(&a.out)?;
    let edges_total: usize = ds.snapshots.iter().map(|s| s.num_edges()).sum();
    println!(
        "wrote {} countries x {} years ({} edges) to {}",
        ds.n(),
        ds.len(),
        edges_total,
        a.out.display()
    );
    Ok(())
}

struct DataSource {
    edges: PathBuf,
    features: PathBuf,
    name: String,
}

fn default_name(edges: &Path) -> String {
    edges
        .parent()
        .and_then(|p| p.file_name())
        .or_else(|| edges.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into())
}

fn resolve_sources(c: &CommonArgs, file: &ConfigFile) -> Result<Vec<DataSource>> {
    let (edges, features, names): (Vec<PathBuf>, Vec<PathBuf>, Vec<String>) = if c.edges.is_empty() {
        (
            file.get_all("edges").into_iter().map(PathBuf::from).collect(),
            file.get_all("features").into_iter().map(PathBuf::from).collect(),
            file.get_all("dataset").into_iter().map(String::from).collect(),
        )
    } else {
        (c.edges.clone(), c.features.clone(), c.name.clone())
    };
    if edges.is_empty() {
        bail!("no dataset given; pass --edges and --features");
    }
    if edges.len() != features.len() {
        bail!("{} edge files but {} feature files", edges.len(), features.len());
    }
    if !names.is_empty() && names.len() != edges.len() {
        bail!("{} dataset names for {} datasets", names.len(), edges.len());
    }
    Ok(edges
        .into_iter()
        .zip(features)
        .enumerate()
        .map(|(i, (e, f))| DataSource {
            name: names.get(i).cloned().unwrap_or_else(|| default_name(&e)),
            edges: e,
            features: f,
        })
        .collect())
}

fn single_source(c: &CommonArgs, file: &ConfigFile) -> Result<DataSource> {
    let mut v = resolve_sources(c, file)?;
    if v.len() != 1 {
        bail!("this command takes exactly one dataset, got {}", v.len());
    }
    Ok(v.remove(0))
}

fn load(src: &DataSource) -> Result<(TemporalDataset, String)> {
    let (ds, report) = TemporalDataset::from_csv(&src.edges, &src.features)
        .with_context(|| format!("loading dataset {}", src.name))?;
    if report.self_loops_dropped > 0 {
        log::warn!("{}: dropped {} self-loop rows", src.name, report.self_loops_dropped);
    }
    if !report.unknown_feature_codes.is_empty() {
        log::warn!(
            "{}: skipped features of codes absent from the edge list: {}",
            src.name,
            report.unknown_feature_codes.join(" ")
        );
    }
    if !report.unobserved_series.is_empty() {
        log::warn!(
            "{}: {} country-attribute series had no observations and were set to 0",
            src.name,
            report.unobserved_series.len()
        );
    }
    let hash = fingerprint(&[&src.edges, &src.features])?;
    log::info!("{}: {} countries, years {:?}", src.name, ds.n(), ds.years());
    Ok((ds, hash))
}

fn resolve_model(c: &CommonArgs, file: &ConfigFile) -> Result<ModelKind> {
    Ok(match c.model {
        Some(ModelArg::Tama) => ModelKind::Tama,
        Some(ModelArg::Gru) => ModelKind::Gru,
        Some(ModelArg::Static) => ModelKind::Static,
        None => file.get_parsed("model")?.unwrap_or(ModelKind::Tama),
    })
}

/// Defaults, then the config file, then flags.
fn resolve_train(c: &CommonArgs, file: &ConfigFile, epochs: Option<usize>) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    file.apply_train(&mut cfg)?;
    if let Some(v) = epochs {
        cfg.epochs = v;
    }
    if let Some(v) = c.window {
        cfg.window = v;
    }
    if let Some(v) = &c.seeds {
        cfg.seeds = parse_seed_list(v)?;
    }
    if let Some(v) = c.lr {
        cfg.lr = v;
    }
    if let Some(v) = c.z_dim {
        cfg.encoder.d_z = v;
    }
    if let Some(v) = c.gamma_init {
        cfg.gamma_init = v;
    }
    if let Some(v) = c.beta_init {
        cfg.beta_init = v;
    }
    if let Some(v) = c.lambda_kl {
        cfg.kl_weight = v;
    }
    if let Some(v) = c.eval_seed {
        cfg.eval_seed = v;
    }
    if let Some(v) = c.pos_weight {
        cfg.pos_weight = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn warn_unknown_keys(file: &ConfigFile, extra: &[&str]) {
    const COMMON: &[&str] = &[
        "command",
        "version",
        "edges",
        "features",
        "dataset",
        "dataset_sha256",
        "model",
    ];
    for k in file.keys() {
        if !config::TRAIN_KEYS.contains(&k) && !COMMON.contains(&k) && !extra.contains(&k) {
            log::debug!("ignoring config key {k}");
        }
    }
}

fn dataset_manifest(m: &mut Manifest, src: &DataSource, hash: &str) {
    m.set("edges", src.edges.display());
    m.set("features", src.features.display());
    m.set("dataset", &src.name);
    m.set("dataset_sha256", hash);
}

/// Writes `metrics.csv` and one curves file per seed, returning the summary.
fn write_runs(
    out: &Path,
    model: ModelKind,
    dataset: &str,
    cfg: &TrainConfig,
    runs: &[RunResult],
) -> Result<EvalReport> {
    let rows: Vec<MetricsRow> = runs
        .iter()
        .map(|r| MetricsRow {
            model: model.name().into(),
            dataset: dataset.into(),
            w: cfg.window,
            seed: r.seed,
            auc: r.auc,
            ap: r.ap,
            final_loss: r.final_loss,
        })
        .collect();
    write_metrics_csv(&out.join("metrics.csv"), &rows)?;
    for r in runs {
        write_curves_csv(&out.join(format!("curves_{}.csv", r.seed)), r)?;
    }
    Ok(aggregate_runs(model.name(), runs)?)
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let c = &a.common;
    let file = load_config(c.config.as_deref())?;
    warn_unknown_keys(&file, &[]);
    let cfg = resolve_train(c, &file, a.epochs)?;
    let model = resolve_model(c, &file)?;
    let src = single_source(c, &file)?;
    let (ds, hash) = load(&src)?;
    if model == ModelKind::Static {
        log::info!(
            "the static model trains on the last training snapshot only; window {} is ignored",
            cfg.window
        );
    }
    let data = Prepared::new(&ds);
    let runs = in_pool(c.jobs, || run_protocol(&data, &cfg, model))??;
    ensure_out(&c.out)?;
    let report = write_runs(&c.out, model, &src.name, &cfg, &runs)?;
    std::fs::write(c.out.join("summary.txt"), format!("{report}\n"))?;

    let mut m = Manifest::new("train");
    dataset_manifest(&mut m, &src, &hash);
    m.set("model", model);
    m.extend(&train_entries(&cfg));
    m.write(&c.out)?;
    println!("{report}");
    Ok(())
}

fn best_line(label: &str, r: &StudyResult) -> String {
    match r.best() {
        Some(t) => format!(
            "{label} best objective: {} (trial {}, {} of {} pruned)",
            sig6(t.objective.unwrap_or(f64::NAN)),
            t.id,
            r.pruned_count(),
            r.trials.len()
        ),
        None => format!("{label} best objective: none (no trial completed)"),
    }
}

pub fn tune(a: &TuneArgs) -> Result<()> {
    let c = &a.common;
    let file = load_config(c.config.as_deref())?;
    warn_unknown_keys(
        &file,
        &[
            "trials",
            "trial_seeds",
            "trial_epochs",
            "checkpoint_every",
            "min_trials",
            "warmup",
            "study_seed",
            "control",
        ],
    );
    let base = resolve_train(c, &file, a.retrain_epochs)?;
    let model = resolve_model(c, &file)?;
    if model == ModelKind::Static {
        bail!("tuning searches gamma_init and beta_init, which the static model does not have");
    }
    let d = StudyConfig::default();
    let trial_seeds = match a.trial_seeds.as_deref().or(file.get("trial_seeds")) {
        Some(s) => parse_seed_list(s)?,
        None => d.trial_seeds,
    };
    let study = StudyConfig {
        trials: pick(a.trials, &file, "trials")?.unwrap_or(d.trials),
        trial_seeds,
        epochs: pick(a.epochs, &file, "trial_epochs")?.unwrap_or(d.epochs),
        checkpoint_every: pick(a.checkpoint_every, &file, "checkpoint_every")?.unwrap_or(d.checkpoint_every),
        pruner: MedianPruner {
            min_trials: pick(a.min_trials, &file, "min_trials")?.unwrap_or(d.pruner.min_trials),
        },
        seed: pick(a.study_seed, &file, "study_seed")?.unwrap_or(d.seed),
        optimizer: OptimizerConfig {
            warmup: pick(a.warmup, &file, "warmup")?.unwrap_or(d.optimizer.warmup),
            ..d.optimizer
        },
        model,
        ..d
    };
    study.validate()?;
    let control = match a.control {
        Some(v) => v,
        None => match file.get("control") {
            None | Some("none") => Control::None,
            Some("random") => Control::Random,
            Some(other) => bail!("invalid control {other:?}; expected none or random"),
        },
    };
    let src = single_source(c, &file)?;
    let (ds, hash) = load(&src)?;
    let data = Prepared::new(&ds);
    ensure_out(&c.out)?;

    let bo = in_pool(c.jobs, || run_study(&data, &base, &study))??;
    write_trial_log(&c.out.join("trials.csv"), &bo.trials)?;
    let mut lines = vec![best_line("bo", &bo)];
    if control == Control::Random {
        let rs = in_pool(c.jobs, || random_search_control(&data, &base, &study))??;
        write_trial_log(&c.out.join("control_trials.csv"), &rs.trials)?;
        if let Some(t) = rs.best() {
            std::fs::write(
                c.out.join("control_best.cfg"),
                config::render(&hyper_entries(&t.config)),
            )?;
        }
        lines.push(best_line("random", &rs));
    }
    let Some(best) = bo.best() else {
        for l in &lines {
            println!("{l}");
        }
        bail!("no trial completed; see trials.csv");
    };
    std::fs::write(c.out.join("best.cfg"), config::render(&hyper_entries(&best.config)))?;

    let cfg = apply_hyper(&base, &best.config);
    let runs = in_pool(c.jobs, || run_protocol(&data, &cfg, model))??;
    let report = write_runs(&c.out, model, &src.name, &cfg, &runs)?;
    lines.push(report.to_string());
    std::fs::write(
        c.out.join("summary.txt"),
        lines.iter().map(|l| format!("{l}\n")).collect::<String>(),
    )?;

    let mut m = Manifest::new("tune");
    dataset_manifest(&mut m, &src, &hash);
    m.set("model", model);
    m.extend(&train_entries(&base));
    m.set("trials", study.trials);
    m.set(
        "trial_seeds",
        study
            .trial_seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(","),
    );
    m.set("trial_epochs", study.epochs);
    m.set("checkpoint_every", study.checkpoint_every);
    m.set("min_trials", study.pruner.min_trials);
    m.set("warmup", study.optimizer.warmup);
    m.set("study_seed", study.seed);
    m.set("control", if control == Control::Random { "random" } else { "none" });
    m.write(&c.out)?;
    for l in &lines {
        println!("{l}");
    }
    Ok(())
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    let c = &a.common;
    let file = load_config(c.config.as_deref())?;
    warn_unknown_keys(&file, &["windows"]);
    let cfg = resolve_train(c, &file, a.epochs)?;
    let model = resolve_model(c, &file)?;
    let windows = parse_usize_list(a.windows.as_deref().or(file.get("windows")).unwrap_or("3..8"))?;
    let sources = resolve_sources(c, &file)?;
    ensure_out(&c.out)?;

    let mut m = Manifest::new("sweep");
    let mut rows = Vec::new();
    let mut metrics = Vec::new();
    for src in &sources {
        let (ds, hash) = load(src)?;
        dataset_manifest(&mut m, src, &hash);
        let data = Prepared::new(&ds);
        let outcome = in_pool(c.jobs, || window_sweep(&data, &src.name, &cfg, model, &windows))??;
        for note in &outcome.skipped {
            println!("{}: {note}", src.name);
        }
        for (w, runs) in &outcome.runs {
            metrics.extend(runs.iter().map(|r| MetricsRow {
                model: model.name().into(),
                dataset: src.name.clone(),
                w: *w,
                seed: r.seed,
                auc: r.auc,
                ap: r.ap,
                final_loss: r.final_loss,
            }));
        }
        if let Some(w) = outcome.best_window() {
            println!("{}: best window {w}", src.name);
        }
        rows.extend(outcome.rows);
    }
    let multi = sources.len() > 1;
    if multi {
        let avg = average_sweep_rows(&rows);
        rows.extend(avg);
    }
    write_sweep_csv(&c.out.join("sweep.csv"), &rows, multi)?;
    write_metrics_csv(&c.out.join("metrics.csv"), &metrics)?;

    m.set("model", model);
    m.extend(&train_entries(&cfg));
    m.set(
        "windows",
        windows.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
    );
    m.write(&c.out)?;
    for r in &rows {
        println!(
            "{:<12} w={}  AUC {:.2} ± {:.2}  AP {:.2} ± {:.2}",
            r.dataset,
            r.w,
            100.0 * r.auc_mean,
            100.0 * r.auc_std,
            100.0 * r.ap_mean,
            100.0 * r.ap_std
        );
    }
    Ok(())
}
