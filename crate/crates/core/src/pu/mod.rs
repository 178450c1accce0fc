//! Place encoder: rotation-pooled view features through a small tanh
//! network, trained with a soft triplet loss.

mod dataset;
mod features;
mod loss;
mod mining;
mod network;
mod optim;
mod train;

pub use dataset::sample_place_history;
pub use features::{orbits, pool_plane, pool_view, FEATURE_DIM, ORBITS};
pub use loss::{
    embedding_distance, loss_from_distances, loss_gradients, mean_loss, triplet_loss, Embedding, LossForm, Triplet,
};
pub use mining::{mine_triplets, MiningConfig};
pub use network::{Dense, EncoderParams, DEFAULT_EMBEDDING, DEFAULT_HIDDEN};
pub use optim::{optimizer_registry, Adam, Momentum, Optimizer};
pub use train::{train_encoder, train_from, write_loss_curve, TrainConfig, TrainOutcome};

use crate::error::Result;
use crate::world::LocalView;

pub fn encode_place(params: &EncoderParams, view: &LocalView) -> Result<Embedding> {
    let x = pool_view(view)?;
    Embedding::new(params.forward_one(&x)?)
}

/// Default-shaped encoder with a fixed seed, used when no trained
/// parameters are supplied.
pub fn untrained_encoder(seed: u64) -> EncoderParams {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut dims = vec![FEATURE_DIM];
    dims.extend(DEFAULT_HIDDEN);
    dims.push(DEFAULT_EMBEDDING);
    EncoderParams::xavier(&dims, &mut rng)
}
