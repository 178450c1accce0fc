//! Place matchers scored in the precision-recall sweep. Lower distance
//! means a more confident match.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use super::baselines::baseline_pixelwise_matcher;
use crate::error::Result;
use crate::grid::Plane;
use crate::pu::{embedding_distance, Embedding};
use crate::registry::{param_u64, Registry};

/// What a matcher may look at for one step.
#[derive(Debug, Clone, Copy)]
pub struct PlaceSample<'a> {
    pub t: usize,
    pub view: &'a Plane,
    pub embedding: &'a Embedding,
}

pub trait PlaceMatcher: Send + Sync {
    fn name(&self) -> &'static str;
    fn distance(&self, query: &PlaceSample, stored: &PlaceSample) -> f64;
}

pub struct EmbeddingMatcher;

impl PlaceMatcher for EmbeddingMatcher {
    fn name(&self) -> &'static str {
        "embedding"
    }

    fn distance(&self, q: &PlaceSample, s: &PlaceSample) -> f64 {
        embedding_distance(q.embedding, s.embedding)
    }
}

pub struct PixelwiseMatcher;

impl PlaceMatcher for PixelwiseMatcher {
    fn name(&self) -> &'static str {
        "pixelwise"
    }

    fn distance(&self, q: &PlaceSample, s: &PlaceSample) -> f64 {
        -baseline_pixelwise_matcher(q.view, s.view).expect("views share the local shape")
    }
}

/// Uniform score per step pair, reproducible from the seed.
pub struct RandomMatcher {
    pub seed: u64,
}

impl PlaceMatcher for RandomMatcher {
    fn name(&self) -> &'static str {
        "random"
    }

    fn distance(&self, q: &PlaceSample, s: &PlaceSample) -> f64 {
        let key = self.seed ^ ((q.t as u64) << 32 | s.t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        ChaCha8Rng::seed_from_u64(key).random_range(0.0..1.0)
    }
}

fn build_embedding(_: &Value) -> Result<Box<dyn PlaceMatcher>> {
    Ok(Box::new(EmbeddingMatcher))
}

fn build_pixelwise(_: &Value) -> Result<Box<dyn PlaceMatcher>> {
    Ok(Box::new(PixelwiseMatcher))
}

fn build_random(p: &Value) -> Result<Box<dyn PlaceMatcher>> {
    Ok(Box::new(RandomMatcher {
        seed: param_u64(p, "seed", 0)?,
    }))
}

pub fn matcher_registry() -> Registry<dyn PlaceMatcher> {
    Registry::new("matcher")
        .with("embedding", build_embedding)
        .with("pixelwise", build_pixelwise)
        .with("random", build_random)
}
