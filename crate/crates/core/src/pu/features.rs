//! Rotation pooling.
//!
//! The 31x31 block centred on the agent cell is closed under quarter turns
//! about that cell. Cells are grouped into orbits of the turn group and each
//! orbit is reduced to its maximum, separately for the free (`v > 0`) and
//! occupied (`v < 0`) evidence. Any quarter turn of the view permutes cells
//! inside orbits, so the pooled vector is unchanged bit for bit.

use std::sync::OnceLock;

use crate::error::{EsmError, Result};
use crate::frame::LOCAL_SIZE;
use crate::grid::Plane;
use crate::world::LocalView;

const HALF: i32 = 15;
const CENTRE: i32 = (LOCAL_SIZE / 2) as i32;

/// Orbits of the 31x31 block: 1 fixed cell plus (31^2 - 1) / 4 quadruples.
pub const ORBITS: usize = 1 + ((2 * HALF as usize + 1).pow(2) - 1) / 4;
/// Two channels per orbit.
pub const FEATURE_DIM: usize = 2 * ORBITS;

/// Offset `(a, b)` turned by +90 degrees.
fn turn((a, b): (i32, i32)) -> (i32, i32) {
    (-b, a)
}

fn canonical(mut q: (i32, i32)) -> (i32, i32) {
    if q == (0, 0) {
        return q;
    }
    for _ in 0..4 {
        if q.0 >= 1 && q.1 >= 0 {
            return q;
        }
        q = turn(q);
    }
    unreachable!("every non-zero offset has a turn with a >= 1, b >= 0")
}

/// Cell lists of each orbit, ordered by canonical representative.
pub fn orbits() -> &'static [Vec<(usize, usize)>] {
    static CELLS: OnceLock<Vec<Vec<(usize, usize)>>> = OnceLock::new();
    CELLS.get_or_init(|| {
        let mut reps: Vec<(i32, i32)> = Vec::new();
        for a in -HALF..=HALF {
            for b in -HALF..=HALF {
                let c = canonical((a, b));
                if c == (a, b) {
                    reps.push(c);
                }
            }
        }
        reps.sort_unstable();
        reps.into_iter()
            .map(|rep| {
                let mut cells = vec![rep];
                let mut q = turn(rep);
                while q != rep {
                    cells.push(q);
                    q = turn(q);
                }
                cells
                    .into_iter()
                    .map(|(a, b)| ((CENTRE + a) as usize, (CENTRE + b) as usize))
                    .collect()
            })
            .collect()
    })
}

pub fn pool_plane(grid: &Plane) -> Result<Vec<f64>> {
    if grid.dim() != (LOCAL_SIZE, LOCAL_SIZE) {
        return Err(EsmError::ShapeMismatch {
            expected: format!("{LOCAL_SIZE}x{LOCAL_SIZE}"),
            got: format!("{}x{}", grid.nrows(), grid.ncols()),
        });
    }
    let orbits = orbits();
    let mut out = vec![0.0; FEATURE_DIM];
    for (k, cells) in orbits.iter().enumerate() {
        let mut free = 0.0f64;
        let mut occ = 0.0f64;
        for &(i, j) in cells {
            let v = grid[[i, j]];
            free = free.max(v);
            occ = occ.max(-v);
        }
        out[k] = free;
        out[ORBITS + k] = occ;
    }
    Ok(out)
}

pub fn pool_view(view: &LocalView) -> Result<Vec<f64>> {
    pool_plane(&view.grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn orbit_counts() {
        assert_eq!(ORBITS, 241);
        let o = orbits();
        assert_eq!(o.len(), ORBITS);
        let total: usize = o.iter().map(Vec::len).sum();
        assert_eq!(total, 31 * 31);
        assert_eq!(o.iter().filter(|c| c.len() == 1).count(), 1);
    }

    /// Independent oracle: turn the whole block by index arithmetic and
    /// compare pooled vectors.
    fn quarter_turn(p: &Plane) -> Plane {
        let mut out = Plane::zeros(p.dim());
        for i in 1..32usize {
            for j in 1..32usize {
                let (a, b) = (i as i32 - 16, j as i32 - 16);
                out[[(16 - b) as usize, (16 + a) as usize]] = p[[i, j]];
            }
        }
        out
    }

    #[test]
    fn pooling_is_invariant_to_quarter_turns() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let p = Plane::from_shape_fn((32, 32), |_| [-1.0, 0.0, 1.0][rng.random_range(0..3)]);
        let base = pool_plane(&p).unwrap();
        let mut q = p.clone();
        for _ in 0..3 {
            q = quarter_turn(&q);
            assert_eq!(pool_plane(&q).unwrap(), base);
        }
        assert_eq!(quarter_turn(&quarter_turn(&quarter_turn(&quarter_turn(&p))))
            .slice(ndarray::s![1.., 1..]), p.slice(ndarray::s![1.., 1..]));
    }

    #[test]
    fn channels_split_sign() {
        let mut p = Plane::zeros((32, 32));
        p[[16, 16]] = 0.7;
        p[[17, 16]] = -0.4;
        let f = pool_plane(&p).unwrap();
        assert_eq!(f[0..ORBITS].iter().filter(|&&v| v > 0.0).count(), 1);
        assert_eq!(f[ORBITS..].iter().filter(|&&v| v > 0.0).count(), 1);
        assert!(f.contains(&0.7) && f.contains(&0.4));
        assert!(pool_plane(&Plane::zeros((8, 8))).is_err());
    }
}
