//! Stationary Ornstein–Uhlenbeck dephasing noise with exact discretization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_positive, Result};

/// Zero-mean OU process with autocovariance σ² e^{-|τ|/τ_c}.
///
/// `tau_c = f64::INFINITY` gives quasi-static (frozen) noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuNoise {
    /// Dispersion σ (rad/s).
    pub sigma: f64,
    /// Correlation time τ_c (s).
    pub tau_c: f64,
    pub seed: u64,
}

impl OuNoise {
    pub fn new(sigma: f64, tau_c: f64, seed: u64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(invalid(format!("noise dispersion must be >= 0, got {sigma}")));
        }
        if tau_c != f64::INFINITY {
            require_positive("correlation time", tau_c)?;
        }
        Ok(Self { sigma, tau_c, seed })
    }

    /// G(τ) = σ² e^{-|τ|/τ_c}.
    pub fn autocovariance(&self, lag: f64) -> f64 {
        self.sigma * self.sigma * (-lag.abs() / self.tau_c).exp()
    }

    /// Generator for trajectory `index`: one ChaCha stream per trajectory,
    /// all keyed by the same seed, so draws do not depend on scheduling.
    pub fn trajectory_rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    /// Fills `out` with a stationary path sampled every `dt`.
    pub fn sample_into<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R, out: &mut [f64]) {
        let Some((first, rest)) = out.split_first_mut() else {
            return;
        };
        let decay = (-dt / self.tau_c).exp();
        let kick = self.sigma * (-(-2.0 * dt / self.tau_c).exp_m1()).sqrt();
        let z: f64 = rng.sample(StandardNormal);
        let mut x = self.sigma * z;
        *first = x;
        for slot in rest {
            let z: f64 = rng.sample(StandardNormal);
            x = x * decay + kick * z;
            *slot = x;
        }
    }
}

/// Exact OU path δ_0 … δ_{n_steps} (n_steps + 1 samples) with spacing `dt`,
/// drawn from stream 0 of the noise seed.
pub fn ou_path(noise: &OuNoise, dt: f64, n_steps: usize) -> Result<Vec<f64>> {
    require_positive("time step", dt)?;
    let mut out = vec![0.0; n_steps + 1];
    noise.sample_into(dt, &mut noise.trajectory_rng(0), &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(path: &[f64], lag: usize) -> (f64, f64, f64, f64) {
        let n = path.len() as f64;
        let mean = path.iter().sum::<f64>() / n;
        let var = path.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m = path.len() - lag;
        let prods: Vec<f64> = (0..m)
            .map(|i| (path[i] - mean) * (path[i + lag] - mean))
            .collect();
        let cov = prods.iter().sum::<f64>() / m as f64;
        let cov_var = prods.iter().map(|p| (p - cov).powi(2)).sum::<f64>() / m as f64;
        (mean, var, cov, cov_var)
    }

    #[test]
    fn frozen_noise_is_constant() {
        let noise = OuNoise::new(2.0, f64::INFINITY, 9).unwrap();
        let path = ou_path(&noise, 0.1, 1000).unwrap();
        assert_eq!(path.len(), 1001);
        assert!(path.iter().all(|&x| x == path[0]));
        assert!(path[0] != 0.0);
    }

    #[test]
    fn stationary_variance_and_autocovariance() {
        let sigma = 1.5;
        let tau_c = 1.0;
        let dt = 0.05;
        let noise = OuNoise::new(sigma, tau_c, 2024).unwrap();
        let path = ou_path(&noise, dt, 1_000_000).unwrap();
        let lag = (tau_c / dt).round() as usize;
        let (mean, var, cov, cov_var) = moments(&path, lag);
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.01, "variance {var}");
        // samples are correlated over ~τ_c/dt steps; inflate the naive error
        let eff = path.len() as f64 / (2.0 * tau_c / dt);
        let se = (cov_var / eff).sqrt() / var;
        let rho = cov / var;
        assert!((rho - (-1f64).exp()).abs() < 3.0 * se, "rho {rho} se {se}");
    }

    #[test]
    fn reproducible_from_seed() {
        let a = ou_path(&OuNoise::new(1.0, 2.0, 5).unwrap(), 0.1, 100).unwrap();
        let b = ou_path(&OuNoise::new(1.0, 2.0, 5).unwrap(), 0.1, 100).unwrap();
        let c = ou_path(&OuNoise::new(1.0, 2.0, 6).unwrap(), 0.1, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(OuNoise::new(-1.0, 1.0, 0).is_err());
        assert!(OuNoise::new(1.0, 0.0, 0).is_err());
        let noise = OuNoise::new(1.0, 1.0, 0).unwrap();
        assert!(ou_path(&noise, 0.0, 10).is_err());
    }
}
