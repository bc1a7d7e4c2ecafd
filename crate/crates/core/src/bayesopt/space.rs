use crate::error::{Error, Result};
use crate::numerics::Rng;

/// A point of the five-dimensional search space.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperConfig {
    pub lr: f64,
    pub z_dim: usize,
    pub gamma_init: f64,
    pub beta_init: f64,
    pub lambda_kl: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpace {
    pub lr: (f64, f64),
    pub z_dims: Vec<usize>,
    pub gamma_init: (f64, f64),
    pub beta_init: (f64, f64),
    pub lambda_kl: (f64, f64),
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            lr: (1e-4, 1e-2),
            z_dims: vec![16, 32, 64],
            gamma_init: (0.5, 0.95),
            beta_init: (0.1, 1.0),
            lambda_kl: (1e-5, 1e-3),
        }
    }
}

fn log_unit(x: f64, (lo, hi): (f64, f64)) -> f64 {
    (x.ln() - lo.ln()) / (hi.ln() - lo.ln())
}

fn log_from_unit(u: f64, (lo, hi): (f64, f64)) -> f64 {
    (lo.ln() + u * (hi.ln() - lo.ln())).exp().clamp(lo, hi)
}

fn lin_unit(x: f64, (lo, hi): (f64, f64)) -> f64 {
    (x - lo) / (hi - lo)
}

fn lin_from_unit(u: f64, (lo, hi): (f64, f64)) -> f64 {
    (lo + u * (hi - lo)).clamp(lo, hi)
}

fn within(x: f64, (lo, hi): (f64, f64)) -> bool {
    x >= lo && x <= hi
}

impl SearchSpace {
    /// Length of a normalized vector: four continuous coordinates plus the
    /// one-hot `z_dim` block.
    pub fn dims(&self) -> usize {
        4 + self.z_dims.len()
    }

    pub fn contains(&self, c: &HyperConfig) -> bool {
        within(c.lr, self.lr)
            && self.z_dims.contains(&c.z_dim)
            && within(c.gamma_init, self.gamma_init)
            && within(c.beta_init, self.beta_init)
            && within(c.lambda_kl, self.lambda_kl)
    }

    /// `[lr, gamma_init, beta_init, lambda_kl, one-hot z_dim...]` in the unit cube;
    /// `lr` and `lambda_kl` on a log scale.
    pub fn normalize(&self, c: &HyperConfig) -> Result<Vec<f64>> {
        if !self.contains(c) {
            return Err(Error::Config(format!("configuration outside the search space: {c:?}")));
        }
        let mut v = vec![
            log_unit(c.lr, self.lr),
            lin_unit(c.gamma_init, self.gamma_init),
            lin_unit(c.beta_init, self.beta_init),
            log_unit(c.lambda_kl, self.lambda_kl),
        ];
        v.extend(self.z_dims.iter().map(|&d| if d == c.z_dim { 1.0 } else { 0.0 }));
        Ok(v)
    }

    /// Inverse of [`Self::normalize`]; the category is the argmax of the one-hot block.
    pub fn denormalize(&self, v: &[f64]) -> HyperConfig {
        let cat = v[4..]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i);
        HyperConfig {
            lr: log_from_unit(v[0], self.lr),
            z_dim: self.z_dims[cat],
            gamma_init: lin_from_unit(v[1], self.gamma_init),
            beta_init: lin_from_unit(v[2], self.beta_init),
            lambda_kl: log_from_unit(v[3], self.lambda_kl),
        }
    }

    /// Uniform draw in normalized coordinates.
    pub fn sample_unit(&self, rng: &mut Rng) -> Vec<f64> {
        let mut v: Vec<f64> = (0..4).map(|_| rng.uniform()).collect();
        let cat = rng.below(self.z_dims.len());
        v.extend((0..self.z_dims.len()).map(|i| if i == cat { 1.0 } else { 0.0 }));
        v
    }

    pub fn sample(&self, rng: &mut Rng) -> HyperConfig {
        self.denormalize(&self.sample_unit(rng))
    }
}
