//! Hyperparameter search: a Gaussian-process surrogate with expected
//! improvement, median pruning of intermediate results, and a random-search
//! control arm sharing the same sampler stream.

mod gp;
mod space;
mod study;

pub use gp::{expected_improvement, GaussianProcess, LENGTH_SCALE_GRID};
pub use space::{HyperConfig, SearchSpace};
pub use study::{
    apply_hyper, random_search_control, run_study, write_trial_log, MedianPruner, StudyConfig, StudyResult, Trial,
    TrialStatus,
};

use crate::numerics::Rng;

/// Settings of the sequential optimizer, independent of what is optimized.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    /// Random draws before the surrogate is used.
    pub warmup: usize,
    /// Random candidates scored by expected improvement per suggestion.
    pub candidates: usize,
    /// Observation noise on standardized targets.
    pub noise: f64,
    /// Improvement margin on standardized targets.
    pub xi: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            warmup: 10,
            candidates: 2048,
            noise: 1e-4,
            xi: 0.01,
        }
    }
}

/// Next point to evaluate, given completed `(point, objective)` pairs
/// (maximization). `sample` draws a uniform point of the domain;
/// `trial` indexes the suggestion for random-stream separation.
///
/// The first `warmup` trials and any trial whose surrogate cannot be fitted
/// return `sample(random_rng)`, where `random_rng` is the stream dedicated
/// to trial `trial`, so a pure random search with the same seed draws the
/// same warm-up points.
pub fn suggest<F>(
    observed: &[(Vec<f64>, f64)],
    trial: usize,
    seed: u64,
    cfg: &OptimizerConfig,
    mut sample: F,
) -> Vec<f64>
where
    F: FnMut(&mut Rng) -> Vec<f64>,
{
    let base = Rng::new(seed);
    let mut random_rng = base.substream(crate::numerics::Purpose::Search, 0, trial as u32);
    if trial < cfg.warmup || observed.len() < 2 {
        return sample(&mut random_rng);
    }
    let xs: Vec<Vec<f64>> = observed.iter().map(|o| o.0.clone()).collect();
    let ys: Vec<f64> = observed.iter().map(|o| o.1).collect();
    let Some(gp) = GaussianProcess::fit(&xs, &ys, cfg.noise) else {
        log::info!("surrogate fit failed at trial {trial}; falling back to a random draw");
        return sample(&mut random_rng);
    };
    let best = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let y_scale = {
        let m = ys.iter().sum::<f64>() / ys.len() as f64;
        let sd = (ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / ys.len() as f64).sqrt();
        if sd > 1e-12 {
            sd
        } else {
            1.0
        }
    };
    let mut acq_rng = base.substream(crate::numerics::Purpose::Acquisition, 0, trial as u32);
    let mut best_x = None;
    let mut best_ei = f64::NEG_INFINITY;
    for _ in 0..cfg.candidates.max(1) {
        let x = sample(&mut acq_rng);
        let ei = gp.expected_improvement(&x, best, cfg.xi * y_scale);
        if ei > best_ei {
            best_ei = ei;
            best_x = Some(x);
        }
    }
    best_x.expect("at least one candidate")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forrester(x: f64) -> f64 {
        -((6.0 * x - 2.0).powi(2) * (12.0 * x - 4.0).sin())
    }

    fn study(seed: u64, trials: usize) -> f64 {
        let cfg = OptimizerConfig::default();
        let mut obs: Vec<(Vec<f64>, f64)> = Vec::new();
        for t in 0..trials {
            let x = suggest(&obs, t, seed, &cfg, |r| vec![r.uniform()]);
            obs.push((x.clone(), forrester(x[0])));
        }
        obs.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn finds_forrester_optimum() {
        let grid_best = (0..=10_000)
            .map(|i| forrester(i as f64 / 10_000.0))
            .fold(f64::NEG_INFINITY, f64::max);
        let hits = (0..10)
            .filter(|&s| study(s, 20) >= grid_best - 0.05 * grid_best.abs())
            .count();
        assert!(hits >= 8, "{hits}/10");
    }

    #[test]
    fn warmup_matches_random_stream() {
        let cfg = OptimizerConfig::default();
        for t in 0..cfg.warmup {
            let a = suggest(&[], t, 9, &cfg, |r| vec![r.uniform()]);
            let mut rng = Rng::new(9).substream(crate::numerics::Purpose::Search, 0, t as u32);
            assert_eq!(a, vec![rng.uniform()]);
        }
    }

    #[test]
    fn suggestions_stay_in_space() {
        let space = SearchSpace::default();
        let cfg = OptimizerConfig {
            warmup: 3,
            candidates: 64,
            ..OptimizerConfig::default()
        };
        let mut obs = Vec::new();
        for t in 0..30 {
            let x = suggest(&obs, t, 1, &cfg, |r| space.sample_unit(r));
            let c = space.denormalize(&x);
            assert!(space.contains(&c));
            let y = -(c.lr.ln() + 7.0).powi(2) + c.z_dim as f64 / 64.0;
            obs.push((space.normalize(&c).unwrap(), y));
        }
    }
}
