use std::path::Path;

use crate::bayesopt::{suggest, HyperConfig, OptimizerConfig, SearchSpace};
use crate::error::{Error, Result};
use crate::par;
use crate::training::{sig6, ModelKind, Prepared, TrainConfig, Trainer};

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub trials: usize,
    /// Seeds trained per trial; the objective is their mean final AUC.
    pub trial_seeds: Vec<u64>,
    pub epochs: usize,
    /// Intermediate results are reported every this many epochs.
    pub checkpoint_every: usize,
    pub pruner: MedianPruner,
    /// Seeds the sampler and acquisition streams.
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub space: SearchSpace,
    pub model: ModelKind,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            trials: 20,
            trial_seeds: vec![1000, 1001, 1002],
            epochs: 500,
            checkpoint_every: 50,
            pruner: MedianPruner::default(),
            seed: 0,
            optimizer: OptimizerConfig::default(),
            space: SearchSpace::default(),
            model: ModelKind::Tama,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("a study needs at least one trial".into()));
        }
        if self.trial_seeds.is_empty() {
            return Err(Error::Config("a study needs at least one seed per trial".into()));
        }
        if self.epochs == 0 || self.checkpoint_every == 0 {
            return Err(Error::Config("epochs and checkpoint interval must be >= 1".into()));
        }
        Ok(())
    }
}

/// Stops a trial whose intermediate value falls strictly below the median
/// of earlier trials at the same checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct MedianPruner {
    /// Minimum number of earlier values at a checkpoint before pruning can fire.
    pub min_trials: usize,
}

impl Default for MedianPruner {
    fn default() -> Self {
        Self { min_trials: 5 }
    }
}

impl MedianPruner {
    pub fn should_prune(&self, value: f64, prior: &[f64]) -> bool {
        if prior.len() < self.min_trials.max(1) {
            return false;
        }
        let mut v = prior.to_vec();
        v.sort_by(f64::total_cmp);
        let mid = v.len() / 2;
        let median = if v.len() % 2 == 1 {
            v[mid]
        } else {
            0.5 * (v[mid - 1] + v[mid])
        };
        value < median
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrialStatus {
    Complete,
    Pruned,
    Failed,
}

impl TrialStatus {
    pub fn name(self) -> &'static str {
        match self {
            TrialStatus::Complete => "complete",
            TrialStatus::Pruned => "pruned",
            TrialStatus::Failed => "failed",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trial {
    pub id: usize,
    pub config: HyperConfig,
    /// `(epoch, mean AUC)` at each checkpoint reached.
    pub intermediate: Vec<(usize, f64)>,
    pub status: TrialStatus,
    pub objective: Option<f64>,
    pub pruned_at: Option<usize>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyResult {
    pub trials: Vec<Trial>,
}

impl StudyResult {
    /// Completed trial with the highest objective; earliest wins ties.
    pub fn best(&self) -> Option<&Trial> {
        self.trials
            .iter()
            .filter(|t| t.objective.is_some())
            .fold(None, |acc: Option<&Trial>, t| match acc {
                Some(b) if b.objective >= t.objective => Some(b),
                _ => Some(t),
            })
    }

    pub fn best_objective(&self) -> Option<f64> {
        self.best().and_then(|t| t.objective)
    }

    pub fn pruned_count(&self) -> usize {
        self.trials.iter().filter(|t| t.status == TrialStatus::Pruned).count()
    }
}

/// `base` with the searched fields replaced.
pub fn apply_hyper(base: &TrainConfig, h: &HyperConfig) -> TrainConfig {
    let mut cfg = base.clone();
    cfg.lr = h.lr;
    cfg.encoder.d_z = h.z_dim;
    cfg.gamma_init = h.gamma_init;
    cfg.beta_init = h.beta_init;
    cfg.kl_weight = h.lambda_kl;
    cfg
}

fn prior_at(trials: &[Trial], epoch: usize) -> Vec<f64> {
    trials
        .iter()
        .filter_map(|t| t.intermediate.iter().find(|(e, _)| *e == epoch).map(|(_, v)| *v))
        .collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Trains one configuration over the trial seeds in lockstep, reporting the
/// mean AUC at each checkpoint before the final epoch.
fn run_trial(
    data: &Prepared,
    base: &TrainConfig,
    study: &StudyConfig,
    id: usize,
    config: HyperConfig,
    history: &[Trial],
    prune: bool,
) -> Trial {
    let mut trial = Trial {
        id,
        config,
        intermediate: Vec::new(),
        status: TrialStatus::Failed,
        objective: None,
        pruned_at: None,
        error: None,
    };
    let cfg = TrainConfig {
        epochs: study.epochs,
        seeds: study.trial_seeds.clone(),
        ..apply_hyper(base, &trial.config)
    };
    let outcome = (|| -> Result<()> {
        let mut runners: Vec<(Trainer, Result<()>)> = cfg
            .seeds
            .iter()
            .map(|&s| Trainer::new(data, &cfg, study.model, s).map(|t| (t, Ok(()))))
            .collect::<Result<_>>()?;
        let mut done = 0;
        while done < study.epochs {
            let next = (done + study.checkpoint_every).min(study.epochs);
            par::for_each_mut(&mut runners, |(t, status)| {
                for _ in done..next {
                    if let Err(e) = t.step_epoch() {
                        *status = Err(e);
                        return;
                    }
                }
            });
            for (_, status) in &mut runners {
                std::mem::replace(status, Ok(()))?;
            }
            done = next;
            if done == study.epochs {
                break;
            }
            let value = mean(runners.iter().map(|(t, _)| t.last_auc().expect("epoch recorded")));
            trial.intermediate.push((done, value));
            if prune && study.pruner.should_prune(value, &prior_at(history, done)) {
                trial.status = TrialStatus::Pruned;
                trial.pruned_at = Some(done);
                return Ok(());
            }
        }
        trial.objective = Some(mean(runners.iter().map(|(t, _)| t.last_auc().expect("epoch recorded"))));
        trial.status = TrialStatus::Complete;
        Ok(())
    })();
    if let Err(e) = outcome {
        log::warn!("trial {id} failed: {e}");
        trial.status = TrialStatus::Failed;
        trial.error = Some(e.to_string());
    }
    trial
}

fn run(data: &Prepared, base: &TrainConfig, study: &StudyConfig, bayes: bool) -> Result<StudyResult> {
    study.validate()?;
    let opt = if bayes {
        study.optimizer.clone()
    } else {
        OptimizerConfig {
            warmup: usize::MAX,
            ..study.optimizer.clone()
        }
    };
    let mut trials: Vec<Trial> = Vec::with_capacity(study.trials);
    for id in 0..study.trials {
        let observed: Vec<(Vec<f64>, f64)> = trials
            .iter()
            .filter_map(|t| Some((study.space.normalize(&t.config).ok()?, t.objective?)))
            .collect();
        let x = suggest(&observed, id, study.seed, &opt, |r| study.space.sample_unit(r));
        let config = study.space.denormalize(&x);
        let trial = run_trial(data, base, study, id, config, &trials, bayes);
        log::info!(
            "{} trial {id}: {} {:?}",
            if bayes { "bo" } else { "random" },
            trial.status.name(),
            trial.objective
        );
        trials.push(trial);
    }
    Ok(StudyResult { trials })
}

/// Surrogate-guided search with median pruning.
pub fn run_study(data: &Prepared, base: &TrainConfig, study: &StudyConfig) -> Result<StudyResult> {
    run(data, base, study, true)
}

/// Uniform search over the same space and protocol, without pruning.
/// Draws the same points as the warm-up phase of [`run_study`] with the
/// same seed.
pub fn random_search_control(data: &Prepared, base: &TrainConfig, study: &StudyConfig) -> Result<StudyResult> {
    run(data, base, study, false)
}

/// `trial_id,status,lr,z_dim,gamma_init,beta_init,lambda_kl,objective,pruned_at_epoch`.
pub fn write_trial_log(path: &Path, trials: &[Trial]) -> Result<()> {
    let io = |e: csv::Error| Error::io(path, std::io::Error::other(e.to_string()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record([
        "trial_id",
        "status",
        "lr",
        "z_dim",
        "gamma_init",
        "beta_init",
        "lambda_kl",
        "objective",
        "pruned_at_epoch",
    ])
    .map_err(io)?;
    for t in trials {
        w.write_record([
            t.id.to_string(),
            t.status.name().to_string(),
            sig6(t.config.lr),
            t.config.z_dim.to_string(),
            sig6(t.config.gamma_init),
            sig6(t.config.beta_init),
            sig6(t.config.lambda_kl),
            t.objective.map(sig6).unwrap_or_default(),
            t.pruned_at.map(|e| e.to_string()).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
