mod common;

use esm_core::geometry::Pose;
use esm_core::pu::{
    embedding_distance, encode_place, loss_gradients, mean_loss, mine_triplets, pool_view, sample_place_history,
    EncoderParams, LossForm, MiningConfig, Triplet,
};
use esm_core::world::observe_local;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

/// East of the corridor mouth is the pillared room.
fn east(p: &Pose) -> bool {
    p.x > 2.4
}

/// Inside either room, away from the corridor.
fn in_a_room(p: &Pose) -> bool {
    p.x < 2.0 || p.x > 5.0
}

#[test]
fn two_room_retrieval_finds_the_right_room() {
    let cfg = config("two_rooms");
    let (maze, sensor) = (maze("two_rooms"), sensor(&cfg));
    let encoder = train_on(&maze, &sensor, &TWO_ROOM_RECIPE, 1);

    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let library: Vec<_> = sample_place_history(&maze, &sensor, 500, 0.2, &mut rng)
        .unwrap()
        .into_iter()
        .filter(|(p, _)| in_a_room(p))
        .map(|(p, v)| (east(&p), encode_place(&encoder, &v).unwrap()))
        .collect();
    let held_out: Vec<_> = sample_place_history(&maze, &sensor, 100, 0.2, &mut rng)
        .unwrap()
        .into_iter()
        .filter(|(p, _)| in_a_room(p))
        .collect();
    let correct = held_out
        .iter()
        .filter(|(p, v)| {
            let e = encode_place(&encoder, v).unwrap();
            let nearest = library
                .iter()
                .min_by(|a, b| embedding_distance(&e, &a.1).total_cmp(&embedding_distance(&e, &b.1)))
                .unwrap();
            nearest.0 == east(p)
        })
        .count();
    let rate = correct as f64 / held_out.len() as f64;
    assert!(rate >= 0.9, "{correct}/{} held-out views in the right room", held_out.len());
}

#[test]
fn figure8_revisits_mine_valid_triplets() {
    let cfg = config("figure8");
    let (maze, sensor) = (maze("figure8"), sensor(&cfg));
    let inputs = esm_core::eval::EpisodeInputs::load(&cfg).unwrap();
    let poses = inputs.trajectory.check_rollout(&maze).unwrap();
    let history: Vec<_> = poses
        .iter()
        .step_by(3)
        .map(|p| (*p, observe_local(&maze, p, &sensor).unwrap()))
        .collect();
    let mining = MiningConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let triplets = mine_triplets(&history, &mining, &mut rng).unwrap();
    assert!(triplets.len() > 100, "only {} triplets", triplets.len());
    for t in &triplets {
        let (a, p, n) = t.provenance;
        assert!(history[a].0.distance_to(&history[p].0) <= mining.eps_pos);
        assert!(history[a].0.distance_to(&history[n].0) > mining.eps_neg);
        assert!(a.abs_diff(p) >= mining.gap);
        assert_eq!(&t.anchor[..], &pool_view(&history[a].1).unwrap()[..]);
    }
}

#[test]
fn training_lowers_held_out_loss() {
    let cfg = config("two_rooms");
    let (maze, sensor) = (maze("two_rooms"), sensor(&cfg));
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let held = sample_place_history(&maze, &sensor, 150, 0.2, &mut rng).unwrap();
    let mining = MiningConfig {
        gap: 150,
        eps_neg: TWO_ROOM_RECIPE.eps_neg,
        ..MiningConfig::default()
    };
    let triplets = mine_triplets(&held, &mining, &mut rng).unwrap();
    let untrained = esm_core::pu::untrained_encoder(1);
    let trained = train_on(&maze, &sensor, &TWO_ROOM_RECIPE, 1);
    let before = mean_loss(&untrained, &triplets, LossForm::Corrected).unwrap();
    let after = mean_loss(&trained, &triplets, LossForm::Corrected).unwrap();
    assert!(after < before - 0.1, "held-out loss {before:.3} -> {after:.3}");
}

fn flat(p: &EncoderParams) -> Vec<f64> {
    p.tensors().into_iter().flatten().copied().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Central differences on small nets against the analytic gradient.
    #[test]
    fn gradients_match_finite_differences(seed in 0u64..10_000, literal in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims: Vec<usize> = (0..3).map(|_| rng.random_range(2..=6)).collect();
        let params = EncoderParams::xavier(&dims, &mut rng);
        let batch: Vec<Triplet> = (0..2)
            .map(|_| {
                let mut v = || (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>();
                Triplet::new(v(), v(), v())
            })
            .collect();
        let form = if literal { LossForm::Literal } else { LossForm::Corrected };
        let (_, grads) = loss_gradients(&params, &batch, form).unwrap();
        let h = 1e-5;
        for (k, g) in flat(&grads).into_iter().enumerate() {
            let at = |d: f64| {
                let mut p = params.clone();
                let mut left = k;
                for t in p.tensors_mut() {
                    if left < t.len() {
                        t[left] += d;
                        break;
                    }
                    left -= t.len();
                }
                mean_loss(&p, &batch, form).unwrap()
            };
            let numeric = (at(h) - at(-h)) / (2.0 * h);
            prop_assert!((g - numeric).abs() <= 1e-4 * g.abs().max(numeric.abs()).max(1e-6), "partial {}: {} vs {}", k, g, numeric);
        }
    }
}
