//! Storage strategies for the global belief plane.

use ndarray::s;
use serde_json::Value;

use crate::error::{EsmError, Result};
use crate::frame::LOCAL_SIZE;
use crate::geometry::{egomotion_to_affine, Affine2, Egomotion, Pose};
use crate::grid::{bilinear_sample, bilinear_sample_clamped, warp_plane, Plane};
use crate::registry::{param_f64, param_u64, Registry};

/// A belief plane that follows an agent. Poses are relative to the episode
/// start, whose egocentric frame is the "world plane".
pub trait MemoryBackend: Send {
    fn name(&self) -> &'static str;
    fn shape(&self) -> (usize, usize);
    fn cell(&self) -> f64;
    fn pose(&self) -> Pose;
    fn warp(&mut self, e: &Egomotion);
    /// Replace the centred window with `m`.
    fn write_window(&mut self, m: &Plane);
    fn read_window(&self) -> Plane;
    /// Belief in the agent's current frame, agent at the pivot.
    fn egocentric(&self) -> Plane;
    /// Belief in the frame of the start pose.
    fn world(&self) -> Plane;
    fn clear(&mut self);
    fn clone_box(&self) -> Box<dyn MemoryBackend>;
}

impl Clone for Box<dyn MemoryBackend> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

pub fn pivot_of(shape: (usize, usize)) -> (f64, f64) {
    ((shape.0 / 2) as f64, (shape.1 / 2) as f64)
}

/// Top-left index of the centred local window.
pub fn window_origin(shape: (usize, usize)) -> (usize, usize) {
    (shape.0 / 2 - LOCAL_SIZE / 2, shape.1 / 2 - LOCAL_SIZE / 2)
}

/// Takes world-plane cell offsets (from the pivot) to offsets in the frame
/// of `pose`.
pub fn world_to_ego(pose: &Pose, cell: f64) -> Affine2 {
    let r = Affine2::from_rotation_translation(-pose.theta, 0.0, 0.0);
    let (tx, ty) = r.apply((pose.x / cell, pose.y / cell));
    Affine2::from_rotation_translation(-pose.theta, -tx, -ty)
}

fn check_shape(shape: (usize, usize), cell: f64) -> Result<()> {
    if shape.0 < LOCAL_SIZE || shape.1 < LOCAL_SIZE {
        return Err(EsmError::Config(format!(
            "memory {}x{} is smaller than the {LOCAL_SIZE}x{LOCAL_SIZE} window",
            shape.0, shape.1
        )));
    }
    if !(cell > 0.0 && cell.is_finite()) {
        return Err(EsmError::Config(format!("memory cell size {cell} must be positive")));
    }
    Ok(())
}

/// The plane itself is resampled by every egomotion; the agent never
/// leaves the pivot.
#[derive(Debug, Clone)]
pub struct EgocentricWarp {
    belief: Plane,
    pose: Pose,
    cell: f64,
}

impl EgocentricWarp {
    pub fn new(shape: (usize, usize), cell: f64) -> Result<Self> {
        check_shape(shape, cell)?;
        Ok(Self {
            belief: Plane::zeros(shape),
            pose: Pose::origin(),
            cell,
        })
    }
}

impl MemoryBackend for EgocentricWarp {
    fn name(&self) -> &'static str {
        "egocentric-warp"
    }

    fn shape(&self) -> (usize, usize) {
        self.belief.dim()
    }

    fn cell(&self) -> f64 {
        self.cell
    }

    fn pose(&self) -> Pose {
        self.pose
    }

    fn warp(&mut self, e: &Egomotion) {
        self.pose = self.pose.compose(e);
        if e.is_null() {
            return;
        }
        let a = egomotion_to_affine(e, self.cell);
        self.belief = warp_plane(&self.belief, &a, pivot_of(self.shape()), 0.0);
    }

    fn write_window(&mut self, m: &Plane) {
        let (r0, c0) = window_origin(self.shape());
        self.belief
            .slice_mut(s![r0..r0 + LOCAL_SIZE, c0..c0 + LOCAL_SIZE])
            .assign(m);
    }

    fn read_window(&self) -> Plane {
        let (r0, c0) = window_origin(self.shape());
        self.belief
            .slice(s![r0..r0 + LOCAL_SIZE, c0..c0 + LOCAL_SIZE])
            .to_owned()
    }

    fn egocentric(&self) -> Plane {
        self.belief.clone()
    }

    fn world(&self) -> Plane {
        let a = world_to_ego(&self.pose, self.cell).inverse();
        warp_plane(&self.belief, &a, pivot_of(self.shape()), 0.0)
    }

    fn clear(&mut self) {
        self.belief.fill(0.0);
        self.pose = Pose::origin();
    }

    fn clone_box(&self) -> Box<dyn MemoryBackend> {
        Box::new(self.clone())
    }
}

/// The plane stays in the start frame; only the pose moves, and reads and
/// writes resample through it.
#[derive(Debug, Clone)]
pub struct WorldAnchored {
    plane: Plane,
    pose: Pose,
    cell: f64,
}

impl WorldAnchored {
    pub fn new(shape: (usize, usize), cell: f64) -> Result<Self> {
        check_shape(shape, cell)?;
        Ok(Self {
            plane: Plane::zeros(shape),
            pose: Pose::origin(),
            cell,
        })
    }
}

impl MemoryBackend for WorldAnchored {
    fn name(&self) -> &'static str {
        "world-anchored"
    }

    fn shape(&self) -> (usize, usize) {
        self.plane.dim()
    }

    fn cell(&self) -> f64 {
        self.cell
    }

    fn pose(&self) -> Pose {
        self.pose
    }

    fn warp(&mut self, e: &Egomotion) {
        self.pose = self.pose.compose(e);
    }

    fn write_window(&mut self, m: &Plane) {
        let shape = self.shape();
        let pivot = pivot_of(shape);
        let to_ego = world_to_ego(&self.pose, self.cell);
        let to_world = to_ego.inverse();
        let half = (LOCAL_SIZE / 2) as f64;
        let lo = -half - 0.5;
        let hi = half - 0.5;

        let mut u_min = f64::INFINITY;
        let mut u_max = f64::NEG_INFINITY;
        let mut v_min = f64::INFINITY;
        let mut v_max = f64::NEG_INFINITY;
        for q in [(lo, lo), (lo, hi), (hi, lo), (hi, hi)] {
            let (u, v) = to_world.apply(q);
            u_min = u_min.min(u + pivot.0);
            u_max = u_max.max(u + pivot.0);
            v_min = v_min.min(v + pivot.1);
            v_max = v_max.max(v + pivot.1);
        }
        let clamp = |x: f64, n: usize| x.max(0.0).min(n as f64 - 1.0) as usize;
        let (i0, i1) = (clamp(u_min.floor(), shape.0), clamp(u_max.ceil(), shape.0));
        let (j0, j1) = (clamp(v_min.floor(), shape.1), clamp(v_max.ceil(), shape.1));
        for i in i0..=i1 {
            for j in j0..=j1 {
                let (a, b) = to_ego.apply((i as f64 - pivot.0, j as f64 - pivot.1));
                let (u, v) = (snap(a) + half, snap(b) + half);
                if u >= -0.5 && u < LOCAL_SIZE as f64 - 0.5 && v >= -0.5 && v < LOCAL_SIZE as f64 - 0.5 {
                    self.plane[[i, j]] = bilinear_sample_clamped(m, u, v);
                }
            }
        }
    }

    fn read_window(&self) -> Plane {
        let pivot = pivot_of(self.shape());
        let to_world = world_to_ego(&self.pose, self.cell).inverse();
        let half = (LOCAL_SIZE / 2) as f64;
        Plane::from_shape_fn((LOCAL_SIZE, LOCAL_SIZE), |(i, j)| {
            let (u, v) = to_world.apply((i as f64 - half, j as f64 - half));
            bilinear_sample(&self.plane, u + pivot.0, v + pivot.1, 0.0)
        })
    }

    fn egocentric(&self) -> Plane {
        let a = world_to_ego(&self.pose, self.cell);
        warp_plane(&self.plane, &a, pivot_of(self.shape()), 0.0)
    }

    fn world(&self) -> Plane {
        self.plane.clone()
    }

    fn clear(&mut self) {
        self.plane.fill(0.0);
        self.pose = Pose::origin();
    }

    fn clone_box(&self) -> Box<dyn MemoryBackend> {
        Box::new(self.clone())
    }
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r
    } else {
        x
    }
}

fn shape_params(p: &Value) -> Result<((usize, usize), f64)> {
    let rows = param_u64(p, "rows", 500)? as usize;
    let cols = param_u64(p, "cols", rows as u64)? as usize;
    Ok(((rows, cols), param_f64(p, "cell", crate::frame::LOCAL_CELL)?))
}

fn build_ego(p: &Value) -> Result<Box<dyn MemoryBackend>> {
    let (shape, cell) = shape_params(p)?;
    Ok(Box::new(EgocentricWarp::new(shape, cell)?))
}

fn build_world(p: &Value) -> Result<Box<dyn MemoryBackend>> {
    let (shape, cell) = shape_params(p)?;
    Ok(Box::new(WorldAnchored::new(shape, cell)?))
}

/// `"egocentric-warp"` and `"world-anchored"`; parameters `rows`, `cols`,
/// `cell`.
pub fn backend_registry() -> Registry<dyn MemoryBackend> {
    Registry::new("memory backend")
        .with("egocentric-warp", build_ego)
        .with("world-anchored", build_world)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use serde_json::json;

    fn patch(seed: u64) -> Plane {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Plane::from_shape_fn((32, 32), |_| rng.random_range(-0.9..0.9))
    }

    #[test]
    fn world_to_ego_matches_single_step() {
        let e = Egomotion::new(0.1, 0.3, 0.07);
        let a = egomotion_to_affine(&e, 0.24);
        let b = world_to_ego(&Pose::origin().compose(&e), 0.24);
        for q in [(0.0, 0.0), (3.0, -2.0), (-7.5, 1.25)] {
            let (x, y) = a.apply(q);
            let (u, v) = b.apply(q);
            assert!((x - u).abs() < 1e-12 && (y - v).abs() < 1e-12);
        }
    }

    #[test]
    fn both_backends_read_back_their_writes() {
        let reg = backend_registry();
        for name in ["egocentric-warp", "world-anchored"] {
            let mut b = reg.build(name, &json!({"rows": 64})).unwrap();
            assert_eq!(b.shape(), (64, 64));
            let m = patch(1);
            b.write_window(&m);
            assert_eq!(b.read_window(), m, "{name}");
            b.clear();
            assert!(b.read_window().iter().all(|&v| v == 0.0));
        }
        assert!(reg.build("egocentric-warp", &json!({"rows": 16})).is_err());
    }

    #[test]
    fn backends_agree_on_whole_cell_translations() {
        let reg = backend_registry();
        let mut a = reg.build("egocentric-warp", &json!({"rows": 96})).unwrap();
        let mut b = reg.build("world-anchored", &json!({"rows": 96})).unwrap();
        let moves = [(0.0, 0.24), (std::f64::consts::FRAC_PI_2, 0.48), (0.0, 0.24), (-std::f64::consts::FRAC_PI_2, 0.24)];
        for (k, (h, d)) in moves.iter().enumerate() {
            let m = patch(k as u64);
            a.write_window(&m);
            b.write_window(&m);
            let e = Egomotion::new(0.0, *h, *d);
            a.warp(&e);
            b.warp(&e);
        }
        let (ea, eb) = (a.egocentric(), b.egocentric());
        for (x, y) in ea.iter().zip(eb.iter()) {
            assert!((x - y).abs() <= 1e-12);
        }
        assert_eq!(a.read_window(), b.read_window());
    }
}
