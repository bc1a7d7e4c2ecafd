//! Seeded synthetic trade networks.
//!
//! Each country has a latent economic size and a hidden location. The
//! persistent backbone holds the ordered pairs with the highest
//! gravity-style score `size_i + size_j - distance + noise`, so large and
//! nearby economies trade. Backbone edges are present every year except for
//! temporary dropouts, and each year also carries a few transient edges.
//! Features are per-country random walks around noisy views of size; the
//! locations are never observed.

use crate::error::{Error, Result};
use crate::graphdata::preprocess::{zscore, NUM_FEATURES};
use crate::graphdata::{CountryIndex, GraphSnapshot, TemporalDataset};
use crate::numerics::{Mat, Purpose, Rng};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub nodes: usize,
    pub years: usize,
    pub start_year: i32,
    /// Density of the persistent backbone over ordered pairs.
    pub p_backbone: f64,
    /// Yearly churn rate. A backbone edge drops out for a year with
    /// probability `dropout_per_churn * p_churn`; a non-backbone pair appears
    /// for a year with probability `p_churn * p_backbone`.
    pub p_churn: f64,
    pub dropout_per_churn: f64,
    /// Standard deviation of the yearly feature random-walk step.
    pub feature_noise: f64,
    /// Weight of economic size in the backbone score.
    pub gravity: f64,
    /// Weight of the hidden distance in the backbone score.
    pub distance_weight: f64,
    /// Standard deviation of the idiosyncratic pair term in the backbone score.
    pub pair_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            nodes: 60,
            years: 10,
            start_year: 2012,
            p_backbone: 0.06,
            p_churn: 0.02,
            dropout_per_churn: 5.0,
            feature_noise: 0.1,
            gravity: 1.0,
            distance_weight: 1.0,
            pair_noise: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 4 {
            return Err(Error::Config(format!(
                "synthetic graphs need >= 4 nodes, got {}",
                self.nodes
            )));
        }
        if self.years < 3 {
            return Err(Error::Config(format!(
                "synthetic data needs >= 3 years, got {}",
                self.years
            )));
        }
        for (name, p) in [("p_backbone", self.p_backbone), ("p_churn", self.p_churn)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        let weights = [
            self.dropout_per_churn,
            self.feature_noise,
            self.gravity,
            self.distance_weight,
            self.pair_noise,
        ];
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Config(format!(
                "synthetic weights must be finite and >= 0: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Three-letter codes AAA, AAB, ... in index order.
fn synthetic_code(i: usize) -> String {
    let b = b'A';
    let chars = [(i / 676) % 26, (i / 26) % 26, i % 26];
    chars.iter().map(|&c| (b + c as u8) as char).collect()
}

/// Generates a dataset that is a pure function of `seed` and `cfg`.
pub fn synth_generate(seed: u64, cfg: &SynthConfig) -> Result<TemporalDataset> {
    cfg.validate()?;
    let n = cfg.nodes;
    let root = Rng::new(seed);
    let mut rng = root.substream(Purpose::Synth, 0, 0);

    let size: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let location: Vec<[f64; 2]> = (0..n).map(|_| [rng.normal(), rng.normal()]).collect();
    let mut scored = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let dist = (location[i][0] - location[j][0]).hypot(location[i][1] - location[j][1]);
                let score =
                    cfg.gravity * (size[i] + size[j]) - cfg.distance_weight * dist + cfg.pair_noise * rng.normal();
                scored.push((score, i, j));
            }
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let k = (cfg.p_backbone * scored.len() as f64).round() as usize;
    let mut backbone = Mat::zeros(n, n);
    let mut base_volume = Mat::zeros(n, n);
    for &(_, i, j) in &scored[..k] {
        backbone[(i, j)] = 1.0;
        base_volume[(i, j)] = (1.0 + size[i] + size[j] + rng.normal()).exp();
    }

    // GDP, agricultural employment ratio, population, production.
    let loadings = [1.0, -0.5, 0.7, 0.5];
    let mut features = Mat::from_fn(n, NUM_FEATURES, |c, k| loadings[k] * size[c] + 0.5 * rng.normal());

    let p_drop = (cfg.dropout_per_churn * cfg.p_churn).min(1.0);
    let p_add = cfg.p_churn * cfg.p_backbone;
    let index = CountryIndex::from_codes((0..n).map(synthetic_code))?;
    let mut snapshots = Vec::with_capacity(cfg.years);
    for year in 0..cfg.years {
        let mut yr = root.substream(Purpose::Synth, 1, year as u32);
        let mut a = Mat::zeros(n, n);
        let mut t = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                if backbone[(i, j)] == 1.0 {
                    if !yr.bernoulli(p_drop) {
                        a[(i, j)] = 1.0;
                        t[(i, j)] = base_volume[(i, j)] * (0.2 * yr.normal()).exp();
                    }
                } else if yr.bernoulli(p_add) {
                    a[(i, j)] = 1.0;
                    t[(i, j)] = (-1.0 + yr.normal()).exp();
                }
            }
        }
        if year > 0 {
            for v in features.as_mut_slice() {
                *v += cfg.feature_noise * yr.normal();
            }
        }
        let mut x = Mat::zeros(n, NUM_FEATURES);
        for k in 0..NUM_FEATURES {
            let col: Vec<f64> = (0..n).map(|c| features[(c, k)]).collect();
            for (c, v) in zscore(&col).into_iter().enumerate() {
                x[(c, k)] = v;
            }
        }
        snapshots.push(GraphSnapshot {
            year: cfg.start_year + year as i32,
            a,
            t,
            x,
        });
    }
    TemporalDataset::new(index, snapshots)
}

/// Mean over consecutive year pairs of the fraction of year-t edges still
/// present in year t+1. Years without edges are skipped.
pub fn edge_persistence(ds: &TemporalDataset) -> f64 {
    let mut fractions = Vec::new();
    for pair in ds.snapshots.windows(2) {
        let (prev, next) = (&pair[0].a, &pair[1].a);
        let total = prev.sum();
        if total == 0.0 {
            continue;
        }
        let kept: f64 = prev.as_slice().iter().zip(next.as_slice()).map(|(p, q)| p * q).sum();
        fractions.push(kept / total);
    }
    if fractions.is_empty() {
        return 1.0;
    }
    fractions.iter().sum::<f64>() / fractions.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_alphabetical() {
        assert_eq!(synthetic_code(0), "AAA");
        assert_eq!(synthetic_code(27), "ABB");
        assert!(synthetic_code(59) < synthetic_code(60));
    }

    #[test]
    fn zero_churn_repeats_backbone() {
        let cfg = SynthConfig {
            nodes: 20,
            years: 5,
            p_churn: 0.0,
            p_backbone: 0.2,
            ..SynthConfig::default()
        };
        let ds = synth_generate(11, &cfg).unwrap();
        assert!(ds.snapshots[0].num_edges() > 0);
        for s in &ds.snapshots[1..] {
            assert_eq!(s.a, ds.snapshots[0].a);
        }
    }

    #[test]
    fn empty_when_no_backbone_and_no_churn() {
        let cfg = SynthConfig {
            nodes: 10,
            years: 3,
            p_churn: 0.0,
            p_backbone: 0.0,
            ..SynthConfig::default()
        };
        let ds = synth_generate(1, &cfg).unwrap();
        assert!(ds.snapshots.iter().all(|s| s.num_edges() == 0));
    }

    #[test]
    fn default_persistence_is_high() {
        let ds = synth_generate(7, &SynthConfig::default()).unwrap();
        let p = edge_persistence(&ds);
        assert!(p >= 0.85, "persistence {p}");
    }

    #[test]
    fn rejects_bad_parameters() {
        for cfg in [
            SynthConfig {
                nodes: 3,
                ..SynthConfig::default()
            },
            SynthConfig {
                years: 2,
                ..SynthConfig::default()
            },
            SynthConfig {
                p_churn: 1.5,
                ..SynthConfig::default()
            },
            SynthConfig {
                p_backbone: -0.1,
                ..SynthConfig::default()
            },
        ] {
            assert!(matches!(synth_generate(0, &cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let cfg = SynthConfig {
            nodes: 12,
            years: 4,
            ..SynthConfig::default()
        };
        assert_eq!(synth_generate(5, &cfg).unwrap(), synth_generate(5, &cfg).unwrap());
        assert_ne!(synth_generate(5, &cfg).unwrap(), synth_generate(6, &cfg).unwrap());
    }
}
