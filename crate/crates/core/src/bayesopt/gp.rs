use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

/// Length scales tried when fitting by marginal likelihood.
pub const LENGTH_SCALE_GRID: [f64; 8] = [0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.2, 2.0];

/// Jitter added to the diagonal on top of the noise term.
const JITTER: f64 = 1e-9;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Zero-mean GP with a unit-variance squared-exponential kernel on
/// standardized targets.
#[derive(Clone, Debug)]
pub struct GaussianProcess {
    xs: Vec<Vec<f64>>,
    y_mean: f64,
    y_std: f64,
    length_scale: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    log_marginal: f64,
}

impl GaussianProcess {
    /// Fits one GP per grid length scale and keeps the most likely. `None`
    /// when no kernel matrix factorizes.
    pub fn fit(xs: &[Vec<f64>], ys: &[f64], noise: f64) -> Option<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return None;
        }
        let n = ys.len() as f64;
        let y_mean = ys.iter().sum::<f64>() / n;
        let sd = (ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n).sqrt();
        let y_std = if sd > 1e-12 { sd } else { 1.0 };
        let y = DVector::from_iterator(ys.len(), ys.iter().map(|v| (v - y_mean) / y_std));
        LENGTH_SCALE_GRID
            .iter()
            .filter_map(|&ls| Self::fit_with(xs, &y, ls, noise, y_mean, y_std))
            .max_by(|a, b| a.log_marginal.total_cmp(&b.log_marginal))
    }

    fn fit_with(xs: &[Vec<f64>], y: &DVector<f64>, ls: f64, noise: f64, y_mean: f64, y_std: f64) -> Option<Self> {
        let m = xs.len();
        let k = DMatrix::from_fn(m, m, |i, j| {
            let v = (-0.5 * sq_dist(&xs[i], &xs[j]) / (ls * ls)).exp();
            if i == j {
                v + noise + JITTER
            } else {
                v
            }
        });
        let chol = k.cholesky()?;
        let alpha = chol.solve(y);
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
        let log_marginal = -0.5 * y.dot(&alpha) - log_det - 0.5 * m as f64 * (2.0 * std::f64::consts::PI).ln();
        if !log_marginal.is_finite() {
            return None;
        }
        Some(Self {
            xs: xs.to_vec(),
            y_mean,
            y_std,
            length_scale: ls,
            chol,
            alpha,
            log_marginal,
        })
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal
    }

    /// Posterior mean and standard deviation in the original target units.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let ls2 = self.length_scale * self.length_scale;
        let ks = DVector::from_iterator(
            self.xs.len(),
            self.xs.iter().map(|xi| (-0.5 * sq_dist(xi, x) / ls2).exp()),
        );
        let mean = ks.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&ks)
            .expect("Cholesky factor has a positive diagonal");
        let var = (1.0 - v.dot(&v)).max(0.0);
        (self.y_mean + self.y_std * mean, self.y_std * var.sqrt())
    }

    /// Expected improvement over `best` for maximization, with margin `xi`
    /// in original units.
    pub fn expected_improvement(&self, x: &[f64], best: f64, xi: f64) -> f64 {
        let (mu, sigma) = self.predict(x);
        expected_improvement(mu, sigma, best, xi)
    }
}

/// `(μ − best − ξ) Φ(u) + σ φ(u)` with `u = (μ − best − ξ) / σ`.
pub fn expected_improvement(mu: f64, sigma: f64, best: f64, xi: f64) -> f64 {
    let gain = mu - best - xi;
    if sigma <= 1e-12 {
        return gain.max(0.0);
    }
    let u = gain / sigma;
    let std = Normal::standard();
    (gain * std.cdf(u) + sigma * std.pdf(u)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_observations() {
        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (6.0 * x[0]).sin()).collect();
        let gp = GaussianProcess::fit(&xs, &ys, 1e-8).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((gp.predict(x).0 - y).abs() < 1e-3);
        }
    }

    #[test]
    fn ei_prefers_region_near_good_point() {
        let xs = vec![vec![0.2], vec![0.9]];
        let ys = vec![0.9, 0.1];
        let gp = GaussianProcess::fit(&xs, &ys, 1e-6).unwrap();
        assert!(gp.expected_improvement(&[0.25], 0.9, 0.0) > gp.expected_improvement(&[0.85], 0.9, 0.0));
    }

    #[test]
    fn ei_closed_form() {
        assert_eq!(expected_improvement(1.0, 0.0, 0.5, 0.0), 0.5);
        assert_eq!(expected_improvement(0.0, 0.0, 0.5, 0.0), 0.0);
        let at_best = expected_improvement(0.0, 1.0, 0.0, 0.0);
        assert!((at_best - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }
}
