//! Reference maps and matchers for comparison.

use rand::Rng;

use crate::error::{EsmError, Result};
use crate::grid::Plane;

/// I.i.d. uniform `[0, 1)` occupancy belief.
pub fn baseline_chance<R: Rng + ?Sized>(shape: (usize, usize), rng: &mut R) -> Plane {
    Plane::from_shape_fn(shape, |_| rng.random_range(0.0..1.0))
}

/// Negative mean squared cell difference; 0 is the best possible score.
pub fn baseline_pixelwise_matcher(a: &Plane, b: &Plane) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(EsmError::ShapeMismatch {
            expected: format!("{:?}", a.dim()),
            got: format!("{:?}", b.dim()),
        });
    }
    let n = a.len().max(1) as f64;
    Ok(-ndarray::Zip::from(a).and(b).fold(0.0, |acc, x, y| acc + (x - y) * (x - y)) / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn chance_mean_and_seed() {
        let mut r1 = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut r2 = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let a = baseline_chance((317, 317), &mut r1);
        assert_eq!(a, baseline_chance((317, 317), &mut r2));
        let mean = a.mean().unwrap();
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
    }

    #[test]
    fn pixelwise_examples() {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let v = Plane::from_shape_fn((32, 32), |_| [-1.0, 0.0, 1.0][r.random_range(0..3)]);
        assert_eq!(baseline_pixelwise_matcher(&v, &v).unwrap(), 0.0);
        let neg = v.mapv(|x| -x);
        let expect = -v.mapv(|x| (2.0 * x) * (2.0 * x)).mean().unwrap();
        assert!((baseline_pixelwise_matcher(&v, &neg).unwrap() - expect).abs() < 1e-12);
        assert!(baseline_pixelwise_matcher(&v, &Plane::zeros((3, 3))).is_err());
    }
}
