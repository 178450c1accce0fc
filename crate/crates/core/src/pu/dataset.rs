//! Views at random free poses, for training the encoder off-line.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{EsmError, Result};
use crate::geometry::Pose;
use crate::world::{observe_local, LocalView, MazeMap, SensorConfig};

/// Distance kept from walls when sampling positions, metres.
const CLEARANCE: f64 = 0.05;
const MAX_TRIES: usize = 10_000;

fn clear(maze: &MazeMap, x: f64, y: f64) -> bool {
    [(0.0, 0.0), (CLEARANCE, 0.0), (-CLEARANCE, 0.0), (0.0, CLEARANCE), (0.0, -CLEARANCE)]
        .iter()
        .all(|(dx, dy)| !maze.is_wall_point(x + dx, y + dy))
}

fn free_point<R: Rng + ?Sized>(maze: &MazeMap, rng: &mut R, near: Option<(f64, f64, f64)>) -> Result<(f64, f64)> {
    let (x0, x1, y0, y1) = maze.world_bounds();
    for _ in 0..MAX_TRIES {
        let (x, y) = match near {
            Some((cx, cy, r)) => {
                let (d, a) = (r * rng.random_range(0.0f64..1.0).sqrt(), rng.random_range(-PI..PI));
                (cx + d * a.cos(), cy + d * a.sin())
            }
            None => (rng.random_range(x0..x1), rng.random_range(y0..y1)),
        };
        if clear(maze, x, y) {
            return Ok((x, y));
        }
    }
    Err(EsmError::OutsideWorld("no free position found in the maze".into()))
}

/// `2 * pairs` samples with uniformly random headings. Sample `i` and
/// `i + pairs` lie within `jitter` metres of each other, so a history
/// index gap of `pairs` separates every revisit.
pub fn sample_place_history<R: Rng + ?Sized>(
    maze: &MazeMap,
    sensor: &SensorConfig,
    pairs: usize,
    jitter: f64,
    rng: &mut R,
) -> Result<Vec<(Pose, LocalView)>> {
    let mut first = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let (x, y) = free_point(maze, rng, None)?;
        first.push(Pose::new(x, y, rng.random_range(-PI..PI)));
    }
    let mut second = Vec::with_capacity(pairs);
    for p in &first {
        let (x, y) = free_point(maze, rng, Some((p.x, p.y, jitter)))?;
        second.push(Pose::new(x, y, rng.random_range(-PI..PI)));
    }
    first
        .into_iter()
        .chain(second)
        .map(|p| Ok((p, observe_local(maze, &p, sensor)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::parse_maze;
    use rand::SeedableRng;

    #[test]
    fn pairs_are_close_and_free() {
        let maze = parse_maze("cell 0.48\n#####\n#S..#\n#...#\n#####\n").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let h = sample_place_history(&maze, &SensorConfig::default(), 20, 0.2, &mut rng).unwrap();
        assert_eq!(h.len(), 40);
        for i in 0..20 {
            assert!(h[i].0.distance_to(&h[i + 20].0) <= 0.2 + 1e-12);
        }
        assert!(h.iter().all(|(p, v)| !maze.is_wall_point(p.x, p.y) && v.free_count() > 0));
    }
}
