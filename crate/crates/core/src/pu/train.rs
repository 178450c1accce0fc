//! Minibatch training of the place encoder.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::loss::{loss_gradients, mean_loss, LossForm, Triplet};
use super::network::{EncoderParams, DEFAULT_EMBEDDING, DEFAULT_HIDDEN};
use super::optim::optimizer_registry;
use crate::error::{EsmError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub optimizer: String,
    /// Momentum (first-moment decay for adam).
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss_form: LossForm,
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.002,
            optimizer: "adam".into(),
            momentum: 0.5,
            batch_size: 32,
            epochs: 20,
            seed: 0,
            loss_form: LossForm::Corrected,
            hidden: DEFAULT_HIDDEN.to_vec(),
            embedding_dim: DEFAULT_EMBEDDING,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(EsmError::Config(format!("learning rate {} must be >= 0", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(EsmError::Config("batch_size must be >= 1".into()));
        }
        if self.embedding_dim == 0 || self.hidden.contains(&0) {
            return Err(EsmError::Config("layer widths must be >= 1".into()));
        }
        Ok(())
    }

    pub fn dims(&self, input: usize) -> Vec<usize> {
        let mut d = vec![input];
        d.extend(&self.hidden);
        d.push(self.embedding_dim);
        d
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: EncoderParams,
    /// Mean loss over the whole dataset before the first update.
    pub initial_loss: f64,
    /// Mean minibatch loss of each epoch.
    pub loss_curve: Vec<f64>,
}

/// Fresh Xavier initialisation from `cfg.seed`, then [`train_from`].
pub fn train_encoder(dataset: &[Triplet], cfg: &TrainConfig) -> Result<TrainOutcome> {
    let first = dataset.first().ok_or(EsmError::EmptyResult)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = EncoderParams::xavier(&cfg.dims(first.anchor.len()), &mut rng);
    train_from(init, dataset, cfg)
}

pub fn train_from(mut params: EncoderParams, dataset: &[Triplet], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(EsmError::EmptyResult);
    }
    let mut opt = optimizer_registry().build(&cfg.optimizer, &json!({"lr": cfg.lr, "momentum": cfg.momentum}))?;
    // separate stream from the initialisation so both stay stable when one changes
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_7a1e);
    let initial_loss = mean_loss(&params, dataset, cfg.loss_form)?;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(idx.iter().map(|&i| dataset[i].clone()));
            let (loss, grads) = loss_gradients(&params, &batch, cfg.loss_form)?;
            total += loss * idx.len() as f64;
            opt.step(&mut params, &grads);
        }
        loss_curve.push(total / dataset.len() as f64);
    }
    if !params.is_finite() {
        return Err(EsmError::DegenerateInput("training diverged".into()));
    }
    Ok(TrainOutcome {
        params,
        initial_loss,
        loss_curve,
    })
}

pub fn write_loss_curve<W: std::io::Write>(out: W, curve: &[f64]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["epoch", "mean_loss"])?;
    for (k, l) in curve.iter().enumerate() {
        wr.write_record([(k + 1).to_string(), l.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy(rng: &mut impl Rng, n: usize) -> Vec<Triplet> {
        // two clusters in 6-d; positives share the anchor's cluster
        let centre = |c: usize| if c == 0 { [0.8, 0.0, 0.5, -0.5, 0.0, 0.3] } else { [-0.6, 0.7, 0.0, 0.4, -0.8, 0.0] };
        let mut draw = |c: usize| -> Vec<f64> { centre(c).iter().map(|v| v + rng.random_range(-0.2..0.2)).collect() };
        (0..n)
            .map(|i| {
                let c = i % 2;
                Triplet::new(draw(c), draw(c), draw(1 - c))
            })
            .collect()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            hidden: vec![8],
            embedding_dim: 4,
            epochs: 30,
            batch_size: 8,
            lr: 0.01,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = toy(&mut rng, 40);
        let init = EncoderParams::xavier(&[6, 8, 4], &mut rng);
        for opt in ["adam", "momentum"] {
            let cfg = TrainConfig {
                lr: 0.0,
                optimizer: opt.into(),
                ..small_cfg()
            };
            assert_eq!(train_from(init.clone(), &data, &cfg).unwrap().params, init);
        }
    }

    #[test]
    fn loss_drops_below_chance_and_is_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = toy(&mut rng, 80);
        let a = train_encoder(&data, &small_cfg()).unwrap();
        let b = train_encoder(&data, &small_cfg()).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.loss_curve.len(), 30);
        let last = *a.loss_curve.last().unwrap();
        assert!(last < 0.5 && last < a.initial_loss, "{} -> {last}", a.initial_loss);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(matches!(train_encoder(&[], &TrainConfig::default()), Err(EsmError::EmptyResult)));
    }
}
