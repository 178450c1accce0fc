use std::f64::consts::FRAC_PI_2;

use esm_core::bvu::{merge_maps, LocalMap, MergeParams};
use esm_core::frame::{LOCAL_CELL, LOCAL_SIZE};
use esm_core::geometry::{Egomotion, Pose};
use esm_core::grid::Plane;
use esm_core::gu::{world_to_ego, GlobalMemory};
use esm_core::pu::Embedding;
use esm_core::world::LocalView;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BACKENDS: [&str; 2] = ["egocentric-warp", "world-anchored"];

fn patch(rng: &mut ChaCha8Rng) -> LocalMap {
    LocalMap::from_plane(Plane::from_shape_fn((LOCAL_SIZE, LOCAL_SIZE), |_| rng.random_range(-0.9..0.9))).unwrap()
}

fn motion() -> impl Strategy<Value = Egomotion> {
    (-10.0f64..10.0, -180.0f64..180.0, 0.0f64..0.1).prop_map(|(r, h, d)| Egomotion::from_degrees(r, h, d))
}

fn lattice_move() -> impl Strategy<Value = Egomotion> {
    (0..4i32, 0..3i32).prop_map(|(q, n)| Egomotion::new(0.0, FRAC_PI_2 * q as f64, LOCAL_CELL * n as f64))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn merge_stays_inside_the_open_interval(seed in 0u64..10_000, lambda in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let obs = LocalView { grid: Plane::from_shape_fn((LOCAL_SIZE, LOCAL_SIZE), |_| [-1.0, 0.0, 1.0][rng.random_range(0..3)]) };
        let warped = LocalMap::from_plane(Plane::from_shape_fn((LOCAL_SIZE, LOCAL_SIZE), |_| rng.random_range(-0.999..0.999))).unwrap();
        let out = merge_maps(&warped, &obs, &MergeParams::new(lambda).unwrap()).unwrap();
        for ((m, o), w) in out.grid.iter().zip(obs.grid.iter()).zip(warped.grid.iter()) {
            prop_assert!(m.abs() < 1.0);
            prop_assert!(m.abs() <= o.abs().max(w.abs()).tanh() + 1e-15);
        }
    }

    #[test]
    fn egocentric_memory_reads_back_its_last_write(seed in 0u64..10_000, moves in prop::collection::vec(motion(), 0..8)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = GlobalMemory::with_backend(BACKENDS[0], 80, 80).unwrap();
        for e in &moves {
            m.write_local(&patch(&mut rng));
            m.memory_warp(e);
        }
        let last = patch(&mut rng);
        m.write_local(&last);
        prop_assert_eq!(m.read_local(), last);
    }

    /// The world-anchored plane resamples off the lattice, so exact
    /// read-back is only expected on lattice moves.
    #[test]
    fn every_backend_reads_back_after_lattice_moves(seed in 0u64..10_000, moves in prop::collection::vec(lattice_move(), 0..8)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for name in BACKENDS {
            let mut m = GlobalMemory::with_backend(name, 80, 80).unwrap();
            for e in &moves {
                m.write_local(&patch(&mut rng));
                m.memory_warp(e);
            }
            let last = patch(&mut rng);
            m.write_local(&last);
            prop_assert_eq!(m.read_local(), last);
        }
    }

    #[test]
    fn backends_agree_on_lattice_translations(seed in 0u64..10_000, moves in prop::collection::vec(lattice_move(), 1..12)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = GlobalMemory::with_backend(BACKENDS[0], 96, 96).unwrap();
        let mut b = GlobalMemory::with_backend(BACKENDS[1], 96, 96).unwrap();
        for e in &moves {
            let m = patch(&mut rng);
            a.write_local(&m);
            b.write_local(&m);
            a.memory_warp(e);
            b.memory_warp(e);
        }
        for (x, y) in a.belief().iter().zip(b.belief().iter()) {
            prop_assert!((x - y).abs() <= 1e-6);
        }
    }

    /// Ledger coordinates are the composed rigid motion of where each
    /// place was written; no resampling.
    #[test]
    fn ledger_follows_composed_motion(moves in prop::collection::vec(motion(), 1..60), every in 1usize..6) {
        let mut m = GlobalMemory::with_backend(BACKENDS[0], 64, 64).unwrap();
        let mut pose = Pose::origin();
        let mut written = Vec::new();
        for (t, e) in moves.iter().enumerate() {
            if t % every == 0 {
                m.write_place(Embedding::zeros(2), t + 1).unwrap();
                written.push(pose);
            }
            m.memory_warp(e);
            pose = pose.compose(e);
        }
        let here = world_to_ego(&pose, LOCAL_CELL);
        let pivot = m.pivot();
        for (rec, at) in m.places().iter().zip(&written) {
            let (u, v) = here.apply((at.x / LOCAL_CELL, at.y / LOCAL_CELL));
            prop_assert!((rec.coord.0 - (u + pivot.0)).abs() <= 1e-9);
            prop_assert!((rec.coord.1 - (v + pivot.1)).abs() <= 1e-9);
        }
    }
}

#[test]
fn rotations_make_the_backends_diverge() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut a = GlobalMemory::with_backend(BACKENDS[0], 96, 96).unwrap();
    let mut b = GlobalMemory::with_backend(BACKENDS[1], 96, 96).unwrap();
    for _ in 0..20 {
        let m = patch(&mut rng);
        a.write_local(&m);
        b.write_local(&m);
        let e = Egomotion::from_degrees(7.0, 20.0, 0.05);
        a.memory_warp(&e);
        b.memory_warp(&e);
    }
    let diff = a.belief().iter().zip(b.belief().iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    println!("max cell difference after 20 turning steps: {diff:.3}");
    assert!(diff > 1e-6 && diff.is_finite());
}
