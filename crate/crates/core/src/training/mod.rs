//! Loss, the sliding-window training loop, evaluation and run reporting.

mod metrics;
mod report;
mod trainer;

use std::fmt;
use std::str::FromStr;

pub use metrics::{auc_score, average_precision, evaluate, EvalPairs};
pub use report::{
    aggregate_runs, average_sweep_rows, format_pm, sig6, window_sweep, write_curves_csv, write_metrics_csv,
    write_sweep_csv, EvalReport, MetricsRow, SweepOutcome, SweepRow,
};
pub use trainer::{run_protocol, static_baseline_run, train_run, Prepared, RunResult, Trainer};

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::numerics::{Mat, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Encoder plus GRU with momentum memory.
    Tama,
    /// Encoder plus GRU, memory term disabled.
    Gru,
    /// Encoder alone on the last training snapshot.
    Static,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Tama => "tama",
            ModelKind::Gru => "gru",
            ModelKind::Static => "static",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tama" => Ok(ModelKind::Tama),
            "gru" => Ok(ModelKind::Gru),
            "static" => Ok(ModelKind::Static),
            other => Err(Error::Config(format!(
                "unknown model {other:?}; expected tama, gru or static"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Weight `λ` of the averaged KL term.
    pub kl_weight: f64,
    pub window: usize,
    pub seeds: Vec<u64>,
    pub encoder: EncoderConfig,
    pub gamma_init: f64,
    pub beta_init: f64,
    /// Seeds the negative pairs of the held-out evaluation set.
    pub eval_seed: u64,
    /// Positive-class weight in the loss; 1 means unweighted.
    pub pos_weight: f64,
    /// Carry the memory across windows during evaluation.
    pub persist_memory: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            lr: 1e-3,
            kl_weight: 1e-4,
            window: 4,
            seeds: (1000..=1009).collect(),
            encoder: EncoderConfig::default(),
            gamma_init: 0.8,
            beta_init: 0.5,
            eval_seed: 2024,
            pos_weight: 1.0,
            persist_memory: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.kl_weight >= 0.0 && self.kl_weight.is_finite()) {
            return Err(Error::Config(format!("kl weight must be >= 0, got {}", self.kl_weight)));
        }
        if !(self.pos_weight > 0.0 && self.pos_weight.is_finite()) {
            return Err(Error::Config(format!(
                "pos_weight must be positive, got {}",
                self.pos_weight
            )));
        }
        if !(self.gamma_init > 0.0 && self.gamma_init < 1.0) {
            return Err(Error::Config(format!(
                "gamma_init must lie in (0, 1), got {}",
                self.gamma_init
            )));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.encoder.validate()
    }
}

/// `max(A, Aᵀ)` and the strict-upper-triangle mask.
pub fn symmetrize_target(a: &Mat) -> (Mat, Mat) {
    let n = a.rows();
    let sym = a.zip_map(&a.transpose(), f64::max);
    let mask = Mat::from_fn(n, n, |i, j| if i < j { 1.0 } else { 0.0 });
    (sym, mask)
}

/// Mean BCE over the masked entries plus `λ` times the mean KL term.
pub fn loss_total(
    tape: &mut Tape,
    logits: Var,
    a_sym: &Mat,
    mask: &Mat,
    kl_terms: &[Var],
    kl_weight: f64,
    pos_weight: f64,
) -> Result<Var> {
    let bce = tape.bce_with_logits(logits, a_sym, mask, pos_weight)?;
    if kl_weight == 0.0 || kl_terms.is_empty() {
        return Ok(bce);
    }
    let mut kl = kl_terms[0];
    for &k in &kl_terms[1..] {
        kl = tape.add(kl, k)?;
    }
    let kl = tape.scale(kl, kl_weight / kl_terms.len() as f64)?;
    tape.add(bce, kl)
}
