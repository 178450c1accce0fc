//! Triplet mining from an episode history.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::pool_view;
use super::loss::Triplet;
use crate::error::{EsmError, Result};
use crate::geometry::Pose;
use crate::world::LocalView;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningConfig {
    /// Positives lie within this distance of the anchor, metres.
    pub eps_pos: f64,
    /// Negatives lie farther than this, metres.
    pub eps_neg: f64,
    /// Minimum time separation of anchor and positive, steps.
    pub gap: usize,
    /// Anchor draws; anchors without a valid positive are skipped.
    pub draws: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            eps_pos: 0.3,
            eps_neg: 1.5,
            gap: 16,
            draws: 2000,
        }
    }
}

pub fn mine_triplets<R: Rng + ?Sized>(
    history: &[(Pose, LocalView)],
    cfg: &MiningConfig,
    rng: &mut R,
) -> Result<Vec<Triplet>> {
    if !(cfg.eps_pos < cfg.eps_neg) {
        return Err(EsmError::Config(format!(
            "eps_pos {} must be below eps_neg {}",
            cfg.eps_pos, cfg.eps_neg
        )));
    }
    let n = history.len();
    let mut partners: Vec<Option<(Vec<usize>, Vec<usize>)>> = vec![None; n];
    let mut features: Vec<Option<Arc<[f64]>>> = vec![None; n];
    let mut feature = |i: usize| -> Result<Arc<[f64]>> {
        if features[i].is_none() {
            features[i] = Some(pool_view(&history[i].1)?.into());
        }
        Ok(features[i].clone().expect("just filled"))
    };

    let mut out = Vec::new();
    if n == 0 {
        return Err(EsmError::EmptyResult);
    }
    for _ in 0..cfg.draws {
        let a = rng.random_range(0..n);
        let (pos, neg) = partners[a].get_or_insert_with(|| {
            let pa = &history[a].0;
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for (j, (pj, _)) in history.iter().enumerate() {
                let d = pa.distance_to(pj);
                if j != a && a.abs_diff(j) >= cfg.gap && d <= cfg.eps_pos {
                    pos.push(j);
                } else if d > cfg.eps_neg {
                    neg.push(j);
                }
            }
            (pos, neg)
        });
        let (Some(&p), Some(&q)) = (pos.choose(rng), neg.choose(rng)) else {
            continue;
        };
        out.push(Triplet {
            anchor: feature(a)?,
            positive: feature(p)?,
            negative: feature(q)?,
            provenance: (a, p, q),
        });
    }
    if out.is_empty() {
        return Err(EsmError::EmptyResult);
    }
    Ok(out)
}
