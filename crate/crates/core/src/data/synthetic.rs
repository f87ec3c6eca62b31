//! Gaussian class clusters standing in for CIFAR-10 in tests and quick runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::sample::{DatasetBundle, Sample};
use crate::error::{Error, Result};

pub const DEFAULT_SIGMA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub n_classes: usize,
    pub dim: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Norm of every class mean; larger values separate the classes more.
    #[serde(default = "default_mean_norm")]
    pub mean_norm: f64,
    /// Subtract 0.5 from every pixel so inputs sit in [-0.5, 0.5].
    #[serde(default)]
    pub centered: bool,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_train: 1000,
            n_test: 200,
            n_classes: 10,
            dim: 64,
            sigma: DEFAULT_SIGMA,
            seed: 0,
            mean_norm: 1.0,
            centered: false,
        }
    }
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

fn default_mean_norm() -> f64 {
    1.0
}

/// Each class gets a random mean of norm `mean_norm`; a sample is that mean
/// plus isotropic N(0, sigma²) noise, mapped by `x -> (x + 1) / 2` and clipped
/// to [0, 1] (then shifted by -0.5 when `centered`). Sample `i` of either split belongs to class `i % n_classes`.
/// Class means are drawn first, then the training samples, then the test
/// samples, all from one ChaCha8 stream.
pub fn make_synthetic(cfg: &SyntheticConfig) -> Result<DatasetBundle> {
    if cfg.n_train == 0 || cfg.n_test == 0 || cfg.n_classes == 0 || cfg.dim == 0 {
        return Err(Error::InvalidArgument("synthetic sizes must be positive".into()));
    }
    if !(cfg.sigma >= 0.0 && cfg.sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma {} must be >= 0", cfg.sigma)));
    }
    if !(cfg.mean_norm > 0.0 && cfg.mean_norm.is_finite()) {
        return Err(Error::InvalidArgument(format!("mean_norm {} must be > 0", cfg.mean_norm)));
    }
    let offset = if cfg.centered { 0.5 } else { 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let means: Vec<Vec<f64>> = (0..cfg.n_classes)
        .map(|_| loop {
            let v: Vec<f64> = (0..cfg.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                break v.into_iter().map(|x| cfg.mean_norm * x / norm).collect();
            }
        })
        .collect();
    let mut draw = |n: usize| -> Vec<Sample> {
        (0..n)
            .map(|i| {
                let class = i % cfg.n_classes;
                let pixels = means[class]
                    .iter()
                    .map(|&m| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        ((m + cfg.sigma * z + 1.0) / 2.0).clamp(0.0, 1.0) - offset
                    })
                    .collect();
                Sample::clean(pixels, class)
            })
            .collect()
    };
    let train = draw(cfg.n_train);
    let test = draw(cfg.n_test);
    Ok(DatasetBundle {
        train,
        test,
        n_classes: cfg.n_classes,
        noise_probability: 0.0,
        noise_seed: 0,
    })
}
