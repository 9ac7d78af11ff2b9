//! Uniform measurement noise and simulated observation sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::intensity::{sample_points, IntensityModel};

/// Noisy occurrences `Y_i = X_i + eps_i`, `eps_i ~ U[-a, a]`, of a Poisson
/// process with intensity `n * f_X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    points: Vec<f64>,
    scaling_n: u64,
    noise_half_width: f64,
    window_end: f64,
}

impl ObservationSet {
    pub fn new(points: Vec<f64>, scaling_n: u64, noise_half_width: f64, window_end: f64) -> Result<Self> {
        if scaling_n == 0 {
            return Err(Error::param("n", "must be at least 1"));
        }
        if !(noise_half_width.is_finite() && noise_half_width > 0.0) {
            return Err(Error::param("a", format!("must be positive, got {noise_half_width}")));
        }
        if !(window_end.is_finite() && window_end > 0.0) {
            return Err(Error::param("T", format!("must be positive, got {window_end}")));
        }
        if let Some(bad) = points.iter().find(|y| !y.is_finite()) {
            return Err(Error::param("points", format!("non-finite observation {bad}")));
        }
        Ok(ObservationSet {
            points,
            scaling_n,
            noise_half_width,
            window_end,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// `N_+`, the number of observed points.
    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn scaling_n(&self) -> u64 {
        self.scaling_n
    }

    pub fn noise_half_width(&self) -> f64 {
        self.noise_half_width
    }

    pub fn window_end(&self) -> f64 {
        self.window_end
    }

    pub fn with_scaling_n(mut self, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "must be at least 1"));
        }
        self.scaling_n = n;
        Ok(self)
    }

    /// Short content hash, recorded in estimate provenance.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.scaling_n.to_le_bytes());
        h.update(self.noise_half_width.to_bits().to_le_bytes());
        h.update(self.window_end.to_bits().to_le_bytes());
        for y in &self.points {
            h.update(y.to_bits().to_le_bytes());
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Generator for replicate `index` of a run seeded with `seed`. Streams are
/// independent, so replicates can run in any order.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Adds i.i.d. `U[-a, a]` noise to each point, keeping input order.
pub fn corrupt<R: Rng + ?Sized>(clean: &[f64], a: f64, rng: &mut R) -> Vec<f64> {
    assert!(a > 0.0, "noise half-width must be positive");
    clean.iter().map(|&x| x + rng.random_range(-a..=a)).collect()
}

/// Simulates `Y` from `model` with scaling `n` and noise half-width `a`.
pub fn simulate_observation_with<R: Rng + ?Sized>(
    model: &IntensityModel,
    n: u64,
    a: f64,
    rng: &mut R,
) -> Result<ObservationSet> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::param("a", format!("must be positive, got {a}")));
    }
    let clean = sample_points(model, n, rng);
    let noisy = corrupt(&clean, a, rng);
    ObservationSet::new(noisy, n, a, model.window_end())
}

pub fn simulate_observation(model: &IntensityModel, n: u64, a: f64, seed: u64) -> Result<ObservationSet> {
    simulate_observation_with(model, n, a, &mut ChaCha8Rng::seed_from_u64(seed))
}
