//! Seeded Monte Carlo against `gamma_n`.
//!
//! Sample `i` draws from its own ChaCha8 stream keyed by `(seed, i)`, so an
//! estimate depends only on `(seed, N)` and never on how samples are spread
//! over workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::mean_and_se;
use crate::potential::Potential;

/// Recorded in every report that consumes random numbers.
pub const GENERATOR: &str = "chacha8(key=seed, stream=sample index)";

/// Counter-based stream for sample or path `index`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn fill_standard_normal(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    pub samples: usize,
    pub generator: String,
    pub seed: u64,
    /// Every sample took the same value.
    pub degenerate: bool,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64], seed: u64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 samples, got {}", samples.len())));
        }
        if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("Monte Carlo sample {bad}")));
        }
        let degenerate = samples.iter().all(|v| *v == samples[0]);
        let (mean, se) = if degenerate { (samples[0], 0.0) } else { mean_and_se(samples) };
        if degenerate {
            log::warn!("all {} Monte Carlo samples are equal; standard error is 0", samples.len());
        }
        Ok(Self { mean, se, samples: samples.len(), generator: GENERATOR.into(), seed, degenerate })
    }

    /// `|mean - target| <= k * se`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se
    }
}

/// Unbiased estimate of `int e^phi dgamma_n` from `n_samples` standard Gaussian draws.
pub fn integrate_exp_mc(phi: &Potential, n_samples: usize, seed: u64) -> Result<McEstimate> {
    let n = phi.dim();
    let samples: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let mut z = vec![0.0; n];
            fill_standard_normal(&mut rng, &mut z);
            phi.eval_unchecked(&z).exp()
        })
        .collect();
    McEstimate::from_samples(&samples, seed)
}
