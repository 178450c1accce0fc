//! Odometry noise: multiplicative perturbation of measured egomotion.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::Value;

use crate::error::Result;
use crate::geometry::{ActionLimits, Egomotion};
use crate::registry::{param_f64, Registry};

/// Zero-mean relative perturbation draw; the noise level scales it.
pub trait EgomotionNoise: Send + Sync {
    fn name(&self) -> &'static str;
    fn draw(&self, rng: &mut dyn RngCore) -> f64;
}

/// `u ~ U[-1, 1]`.
pub struct UniformNoise;

impl EgomotionNoise for UniformNoise {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn draw(&self, rng: &mut dyn RngCore) -> f64 {
        rng.random_range(-1.0..=1.0)
    }
}

/// `u ~ N(0, sigma)`, sigma defaults to the uniform's standard deviation.
pub struct GaussianNoise {
    dist: Normal<f64>,
}

impl EgomotionNoise for GaussianNoise {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn draw(&self, rng: &mut dyn RngCore) -> f64 {
        self.dist.sample(rng)
    }
}

fn build_uniform(_: &Value) -> Result<Box<dyn EgomotionNoise>> {
    Ok(Box::new(UniformNoise))
}

fn build_gaussian(params: &Value) -> Result<Box<dyn EgomotionNoise>> {
    let sigma = param_f64(params, "sigma", 1.0 / 3f64.sqrt())?;
    let dist = Normal::new(0.0, sigma)
        .map_err(|e| crate::error::EsmError::Config(format!("gaussian noise: {e}")))?;
    Ok(Box::new(GaussianNoise { dist }))
}

pub fn noise_registry() -> Registry<dyn EgomotionNoise> {
    Registry::new("noise")
        .with("uniform", build_uniform)
        .with("gaussian", build_gaussian)
}

pub struct NoiseModel {
    pub relative_level: f64,
    pub seed: u64,
    kind: Box<dyn EgomotionNoise>,
}

impl std::fmt::Debug for NoiseModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NoiseModel")
            .field("relative_level", &self.relative_level)
            .field("seed", &self.seed)
            .field("kind", &self.kind.name())
            .finish()
    }
}

impl NoiseModel {
    pub fn uniform(relative_level: f64, seed: u64) -> Self {
        Self::with_kind(relative_level, seed, Box::new(UniformNoise))
    }

    pub fn with_kind(relative_level: f64, seed: u64, kind: Box<dyn EgomotionNoise>) -> Self {
        assert!(relative_level >= 0.0, "noise level must be non-negative");
        Self {
            relative_level,
            seed,
            kind,
        }
    }

    pub fn kind(&self) -> &str {
        self.kind.name()
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Scale rotation and distance by independent `(1 + level * u)` factors,
    /// then clamp back inside the action limits.
    pub fn perturb(&self, e: &Egomotion, lim: &ActionLimits, rng: &mut dyn RngCore) -> Egomotion {
        if self.relative_level == 0.0 {
            return *e;
        }
        let ft = 1.0 + self.relative_level * self.kind.draw(rng);
        let fd = 1.0 + self.relative_level * self.kind.draw(rng);
        Egomotion {
            dtheta: (e.dtheta * ft).clamp(-lim.rot_limit, lim.rot_limit),
            heading: e.heading,
            distance: (e.distance * fd).clamp(0.0, lim.trans_limit),
        }
    }
}

pub fn perturb_egomotion(
    e: &Egomotion,
    nm: &NoiseModel,
    lim: &ActionLimits,
    rng: &mut dyn RngCore,
) -> Egomotion {
    nm.perturb(e, lim, rng)
}
