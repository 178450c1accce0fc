//! Fixtures and run settings shared by the integration tests.

#![allow(dead_code)]

use std::path::PathBuf;

use esm_core::eval::{EpisodeInputs, RunConfig};
use esm_core::pu::{mine_triplets, sample_place_history, train_encoder, EncoderParams, MiningConfig, TrainConfig};
use esm_core::world::{parse_maze, MazeMap, SensorConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Dead ends opening into differently shaped spaces; 32 quarter-cell steps each.
pub const SWEEP_FIXTURES: [&str; 5] = ["exit_room", "exit_hall", "exit_tee", "exit_funnel", "exit_ell"];

pub fn fixture(file: &str) -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures")).join(file)
}

pub fn maze(name: &str) -> MazeMap {
    parse_maze(&std::fs::read_to_string(fixture(&format!("{name}.maze"))).unwrap()).unwrap()
}

/// Full-circle sensor and a memory large enough for every fixture.
pub fn config(name: &str) -> RunConfig {
    let mut cfg = RunConfig::new(fixture(&format!("{name}.maze")), fixture(&format!("{name}.traj")));
    cfg.sensor.fov_deg = 360.0;
    cfg.sensor.n_rays = 180;
    cfg.memory_size = 200;
    cfg
}

/// Checkpoints every four quarter-cell steps: whole-cell shifts between them.
pub fn sweep_config(name: &str) -> RunConfig {
    let mut cfg = config(name);
    cfg.eval_interval = 32;
    cfg
}

pub const SWEEP_STRIDE: usize = 4;

pub fn loop_config(seed: u64, correct: bool) -> RunConfig {
    let mut cfg = config("square");
    cfg.noise.level = 0.15;
    cfg.seed = seed;
    cfg.closure.correct = correct;
    cfg
}

pub fn sensor(cfg: &RunConfig) -> SensorConfig {
    cfg.sensor.to_sensor().unwrap()
}

pub struct EncoderRecipe {
    pub pairs: usize,
    pub jitter: f64,
    pub draws: usize,
    pub eps_neg: f64,
    pub epochs: usize,
    pub lr: f64,
}

/// Used for loop closure on the figure-eight.
pub const FIGURE8_RECIPE: EncoderRecipe = EncoderRecipe {
    pairs: 600,
    jitter: 0.2,
    draws: 3000,
    eps_neg: 1.5,
    epochs: 10,
    lr: 0.002,
};

/// Negatives beyond the largest room diagonal come from the other room.
pub const TWO_ROOM_RECIPE: EncoderRecipe = EncoderRecipe {
    pairs: 500,
    jitter: 0.2,
    draws: 4000,
    eps_neg: 3.5,
    epochs: 6,
    lr: 0.001,
};

pub fn train_on(maze: &MazeMap, sensor: &SensorConfig, r: &EncoderRecipe, seed: u64) -> EncoderParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let history = sample_place_history(maze, sensor, r.pairs, r.jitter, &mut rng).unwrap();
    let mining = MiningConfig {
        gap: r.pairs,
        draws: r.draws,
        eps_neg: r.eps_neg,
        ..MiningConfig::default()
    };
    let triplets = mine_triplets(&history, &mining, &mut rng).unwrap();
    let train = TrainConfig {
        epochs: r.epochs,
        lr: r.lr,
        seed,
        ..TrainConfig::default()
    };
    train_encoder(&triplets, &train).unwrap().params
}

pub fn inputs_with(cfg: &RunConfig, encoder: EncoderParams) -> EpisodeInputs {
    let mut inputs = EpisodeInputs::load(cfg).unwrap();
    inputs.encoder = encoder;
    inputs
}
