use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::training::trainer::{run_protocol, Prepared, RunResult};
use crate::training::{ModelKind, TrainConfig};

/// Mean and sample standard deviation of final metrics, in percent.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub runs: usize,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub ap_mean: f64,
    pub ap_std: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn aggregate_runs(model: &str, results: &[RunResult]) -> Result<EvalReport> {
    if results.is_empty() {
        return Err(Error::Evaluation("cannot aggregate zero runs".into()));
    }
    let aucs: Vec<f64> = results.iter().map(|r| 100.0 * r.auc).collect();
    let aps: Vec<f64> = results.iter().map(|r| 100.0 * r.ap).collect();
    let (auc_mean, auc_std) = mean_std(&aucs);
    let (ap_mean, ap_std) = mean_std(&aps);
    Ok(EvalReport {
        model: model.to_string(),
        runs: results.len(),
        auc_mean,
        auc_std,
        ap_mean,
        ap_std,
    })
}

/// `"96.55 ± 0.38"`.
pub fn format_pm(mean: f64, std: f64) -> String {
    format!("{mean:.2} ± {std:.2}")
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} runs): AUC {}  AP {}",
            self.model,
            self.runs,
            format_pm(self.auc_mean, self.auc_std),
            format_pm(self.ap_mean, self.ap_std)
        )
    }
}

/// Shortest decimal form of `x` rounded to 6 significant digits.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() || x == 0.0 {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// One line of the metrics CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub model: String,
    pub dataset: String,
    pub w: usize,
    pub seed: u64,
    pub auc: f64,
    pub ap: f64,
    pub final_loss: f64,
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = writer(path)?;
    let mut put = |rec: &[String]| w.write_record(rec).map_err(|e| csv_err(path, e));
    put(&["model", "dataset", "w", "seed", "auc", "ap", "final_loss"].map(String::from))?;
    for r in rows {
        put(&[
            r.model.clone(),
            r.dataset.clone(),
            r.w.to_string(),
            r.seed.to_string(),
            sig6(r.auc),
            sig6(r.ap),
            sig6(r.final_loss),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_curves_csv(path: &Path, run: &RunResult) -> Result<()> {
    let mut w = writer(path)?;
    let mut put = |rec: &[String]| w.write_record(rec).map_err(|e| csv_err(path, e));
    put(&["epoch", "loss", "auc", "ap"].map(String::from))?;
    for (e, ((l, a), p)) in run.losses.iter().zip(&run.aucs).zip(&run.aps).enumerate() {
        put(&[(e + 1).to_string(), sig6(*l), sig6(*a), sig6(*p)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Fractions in `[0, 1]`; standard deviations are sample deviations.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub dataset: String,
    pub w: usize,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub ap_mean: f64,
    pub ap_std: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Human-readable notices for window lengths that could not run.
    pub skipped: Vec<String>,
    pub runs: Vec<(usize, Vec<RunResult>)>,
}

impl SweepOutcome {
    /// Window length with the highest mean AUC.
    pub fn best_window(&self) -> Option<usize> {
        self.rows
            .iter()
            .max_by(|a, b| a.auc_mean.total_cmp(&b.auc_mean))
            .map(|r| r.w)
    }
}

/// Runs the seeded protocol for each window length in ascending order,
/// skipping lengths the dataset cannot support.
pub fn window_sweep(
    data: &Prepared,
    dataset: &str,
    cfg: &TrainConfig,
    model: ModelKind,
    windows: &[usize],
) -> Result<SweepOutcome> {
    let mut ws = windows.to_vec();
    ws.sort_unstable();
    ws.dedup();
    let mut out = SweepOutcome::default();
    for w in ws {
        if w == 0 || data.len() < w + 2 {
            let msg = format!(
                "window {w} skipped: needs {} snapshots, dataset has {}",
                w + 2,
                data.len()
            );
            log::warn!("{msg}");
            out.skipped.push(msg);
            continue;
        }
        let cfg_w = TrainConfig {
            window: w,
            ..cfg.clone()
        };
        let runs = run_protocol(data, &cfg_w, model)?;
        let (auc_mean, auc_std) = mean_std(&runs.iter().map(|r| r.auc).collect::<Vec<_>>());
        let (ap_mean, ap_std) = mean_std(&runs.iter().map(|r| r.ap).collect::<Vec<_>>());
        out.rows.push(SweepRow {
            dataset: dataset.to_string(),
            w,
            auc_mean,
            auc_std,
            ap_mean,
            ap_std,
        });
        out.runs.push((w, runs));
    }
    Ok(out)
}

/// One `average` row per window length, averaging each column over the
/// datasets that ran that length. Rows come out ordered by `w`.
pub fn average_sweep_rows(rows: &[SweepRow]) -> Vec<SweepRow> {
    let mut ws: Vec<usize> = rows.iter().map(|r| r.w).collect();
    ws.sort_unstable();
    ws.dedup();
    ws.into_iter()
        .map(|w| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.w == w).collect();
            let avg = |f: fn(&SweepRow) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / group.len() as f64;
            SweepRow {
                dataset: "average".into(),
                w,
                auc_mean: avg(|r| r.auc_mean),
                auc_std: avg(|r| r.auc_std),
                ap_mean: avg(|r| r.ap_mean),
                ap_std: avg(|r| r.ap_std),
            }
        })
        .collect()
}

/// Writes `w,auc_mean,auc_std,ap_mean,ap_std`, prefixed by a `dataset`
/// column when `with_dataset` is set.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow], with_dataset: bool) -> Result<()> {
    let mut w = writer(path)?;
    let mut put = |rec: Vec<String>| w.write_record(&rec).map_err(|e| csv_err(path, e));
    let mut header: Vec<String> = ["w", "auc_mean", "auc_std", "ap_mean", "ap_std"]
        .map(String::from)
        .to_vec();
    if with_dataset {
        header.insert(0, "dataset".into());
    }
    put(header)?;
    for r in rows {
        let mut rec = vec![
            r.w.to_string(),
            sig6(r.auc_mean),
            sig6(r.auc_std),
            sig6(r.ap_mean),
            sig6(r.ap_std),
        ];
        if with_dataset {
            rec.insert(0, r.dataset.clone());
        }
        put(rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
