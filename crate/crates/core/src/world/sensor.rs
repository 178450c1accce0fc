//! Range sensing and egocentric free-space observations.
//!
//! Rays are traced through the maze with an exact cell traversal. The
//! traced segments are then swept through a target plane (the agent's own
//! 32x32 frame, or any other frame for ground truth), marking every cell
//! the free part of a ray passes through. Walls bordering swept space and
//! lying inside the sensor's cone are marked occupied.

use std::f64::consts::TAU;

use ndarray::Array2;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{EsmError, Result};
use crate::frame::{FrameSpec, LOCAL_EXTENT, LOCAL_SIZE};
use crate::geometry::Pose;
use crate::grid::Plane;
use crate::world::maze::MazeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    /// radians
    pub fov: f64,
    pub n_rays: usize,
    /// metres
    pub max_range: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            fov: 90f64.to_radians(),
            n_rays: 64,
            max_range: LOCAL_EXTENT / 2.0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fov >= 0.0 && self.fov <= TAU + 1e-12) {
            return Err(EsmError::Config("sensor fov must be within [0, 360] degrees".into()));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(EsmError::Config("sensor max_range must be positive".into()));
        }
        Ok(())
    }

    /// Ray bearings (egocentric, radians): `n_rays` evenly spaced bins
    /// across the field of view, sampled at bin centres.
    pub fn ray_angles(&self) -> Vec<f64> {
        if self.fov <= 0.0 || self.n_rays == 0 {
            return Vec::new();
        }
        let step = self.fov / self.n_rays as f64;
        (0..self.n_rays)
            .map(|k| -self.fov / 2.0 + (k as f64 + 0.5) * step)
            .collect()
    }

    fn covers(&self, bearing: f64) -> bool {
        self.fov >= TAU - 1e-12 || bearing.abs() <= self.fov / 2.0 + 1e-12
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthScan {
    pub angles: Vec<f64>,
    pub ranges: Vec<f64>,
    pub max_range: f64,
    pub fov: f64,
}

/// Egocentric observation: +1 observed free, -1 observed occupied, 0 unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalView {
    pub grid: Plane,
}

impl LocalView {
    pub fn zeros() -> Self {
        Self {
            grid: Plane::zeros((LOCAL_SIZE, LOCAL_SIZE)),
        }
    }

    /// Free cells as 1, everything else as 0.
    pub fn binarized(&self) -> Plane {
        self.grid.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn free_count(&self) -> usize {
        self.grid.iter().filter(|&&v| v > 0.0).count()
    }
}

/// Distance along a world-frame ray to the first wall, capped at `max_range`.
pub fn cast_ray(maze: &MazeMap, x: f64, y: f64, angle: f64, max_range: f64) -> f64 {
    let (gx, gy) = maze.world_to_grid(x, y);
    // grid rows grow southwards, so the y component flips
    let dx = angle.cos();
    let dy = -angle.sin();
    let max_t = max_range / maze.cell_size;

    let mut cx = gx.floor() as isize;
    let mut cy = gy.floor() as isize;
    let (step_x, mut t_max_x, t_delta_x) = axis_setup(gx, dx);
    let (step_y, mut t_max_y, t_delta_y) = axis_setup(gy, dy);

    loop {
        let t = t_max_x.min(t_max_y);
        if t >= max_t {
            return max_range;
        }
        if t_max_x < t_max_y {
            cx += step_x;
            t_max_x += t_delta_x;
        } else {
            cy += step_y;
            t_max_y += t_delta_y;
        }
        if maze.is_wall_cell(cy, cx) {
            return t * maze.cell_size;
        }
    }
}

fn axis_setup(pos: f64, dir: f64) -> (isize, f64, f64) {
    if dir > 0.0 {
        (1, (pos.floor() + 1.0 - pos) / dir, 1.0 / dir)
    } else if dir < 0.0 {
        (-1, (pos - pos.floor()) / -dir, -1.0 / dir)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

pub fn raycast(maze: &MazeMap, p: &Pose, sensor: &SensorConfig) -> Result<DepthScan> {
    maze.check_pose(p)?;
    let angles = sensor.ray_angles();
    let ranges = angles
        .iter()
        .map(|a| cast_ray(maze, p.x, p.y, p.theta + a, sensor.max_range))
        .collect();
    Ok(DepthScan {
        angles,
        ranges,
        max_range: sensor.max_range,
        fov: sensor.fov,
    })
}

/// Visit every plane cell crossed by the open segment `a -> b` (index
/// coordinates, cell centres on integers).
fn sweep_segment(frame: &FrameSpec, a: (f64, f64), b: (f64, f64), mut visit: impl FnMut(usize, usize)) {
    let (h, w) = frame.shape;
    let (su, sv) = (a.0 + 0.5, a.1 + 0.5);
    let (du, dv) = (b.0 - a.0, b.1 - a.1);
    let len = du.hypot(dv);
    let mut ci = su.floor() as isize;
    let mut cj = sv.floor() as isize;
    let mut mark = |i: isize, j: isize| {
        if i >= 0 && j >= 0 && (i as usize) < h && (j as usize) < w {
            visit(i as usize, j as usize);
        }
    };
    mark(ci, cj);
    if len == 0.0 {
        return;
    }
    let (di, dj) = (du / len, dv / len);
    let (step_i, mut t_i, dt_i) = axis_setup(su, di);
    let (step_j, mut t_j, dt_j) = axis_setup(sv, dj);
    // the far end lies on a wall boundary; do not step into the wall
    let end = len - 1e-9;
    loop {
        let t = t_i.min(t_j);
        if t >= end {
            break;
        }
        if t_i < t_j {
            ci += step_i;
            t_i += dt_i;
        } else {
            cj += step_j;
            t_j += dt_j;
        }
        mark(ci, cj);
    }
}

/// Free and occupied cells seen from a set of poses, expressed in `frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observed {
    pub free: Array2<bool>,
    pub occupied: Array2<bool>,
}

impl Observed {
    pub fn new(shape: (usize, usize)) -> Self {
        Self {
            free: Array2::from_elem(shape, false),
            occupied: Array2::from_elem(shape, false),
        }
    }

    pub fn observed(&self) -> Array2<bool> {
        ndarray::Zip::from(&self.free)
            .and(&self.occupied)
            .map_collect(|&f, &o| f || o)
    }

    pub fn free_count(&self) -> usize {
        self.free.iter().filter(|&&f| f).count()
    }
}

/// Accumulates observations from successive poses into one frame.
pub struct Accumulator<'a> {
    maze: &'a MazeMap,
    sensor: SensorConfig,
    frame: FrameSpec,
    pub observed: Observed,
    scratch: Array2<bool>,
    touched: Vec<(usize, usize)>,
}

impl<'a> Accumulator<'a> {
    pub fn new(maze: &'a MazeMap, sensor: &SensorConfig, frame: FrameSpec) -> Self {
        Self {
            maze,
            sensor: *sensor,
            frame,
            observed: Observed::new(frame.shape),
            scratch: Array2::from_elem(frame.shape, false),
            touched: Vec::new(),
        }
    }

    pub fn add_pose(&mut self, p: &Pose) -> Result<()> {
        let scan = raycast(self.maze, p, &self.sensor)?;
        self.add_scan(p, &scan);
        Ok(())
    }

    pub fn add_scan(&mut self, p: &Pose, scan: &DepthScan) {
        let frame = self.frame;
        let origin = frame.world_to_index(p.x, p.y);
        let scratch = &mut self.scratch;
        let touched = &mut self.touched;
        let mut visit = |i: usize, j: usize| {
            if !scratch[[i, j]] {
                scratch[[i, j]] = true;
                touched.push((i, j));
            }
        };
        if let Some((i, j)) = frame.cell_at(origin.0, origin.1) {
            visit(i, j);
        }
        for (a, r) in scan.angles.iter().zip(&scan.ranges) {
            let dir = p.theta + a;
            let (ex, ey) = (p.x + r * dir.cos(), p.y + r * dir.sin());
            let end = frame.world_to_index(ex, ey);
            sweep_segment(&frame, origin, end, &mut visit);
        }

        let (h, w) = frame.shape;
        let reach = scan.max_range + frame.cell * std::f64::consts::SQRT_2;
        for &(i, j) in &self.touched {
            self.observed.free[[i, j]] = true;
        }
        if !scan.angles.is_empty() {
            for &(i, j) in &self.touched {
                for di in -1isize..=1 {
                    for dj in -1isize..=1 {
                        let (ni, nj) = (i as isize + di, j as isize + dj);
                        if ni < 0 || nj < 0 || ni as usize >= h || nj as usize >= w {
                            continue;
                        }
                        let (ni, nj) = (ni as usize, nj as usize);
                        if self.scratch[[ni, nj]] || self.observed.occupied[[ni, nj]] {
                            continue;
                        }
                        let (wx, wy) = frame.index_to_world(ni as f64, nj as f64);
                        if !self.maze.is_wall_point(wx, wy) {
                            continue;
                        }
                        let (f, l) = p.to_local(wx, wy);
                        if f.hypot(l) <= reach && self.sensor.covers(l.atan2(f)) {
                            self.observed.occupied[[ni, nj]] = true;
                        }
                    }
                }
            }
        }
        for (i, j) in self.touched.drain(..) {
            self.scratch[[i, j]] = false;
        }
    }

    /// Final sets; cells ever seen free are never reported occupied.
    pub fn finish(self) -> Observed {
        self.snapshot()
    }

    /// The sets as [`finish`](Self::finish) would report them so far.
    pub fn snapshot(&self) -> Observed {
        let mut out = self.observed.clone();
        ndarray::Zip::from(&mut out.occupied)
            .and(&out.free)
            .for_each(|o, &f| *o = *o && !f);
        out
    }
}

pub fn observe_in_frame(
    maze: &MazeMap,
    poses: &[Pose],
    sensor: &SensorConfig,
    frame: FrameSpec,
) -> Result<Observed> {
    let mut acc = Accumulator::new(maze, sensor, frame);
    for p in poses {
        acc.add_pose(p)?;
    }
    Ok(acc.finish())
}

/// Three-valued 32x32 observation in the agent's own frame.
pub fn observe_local(maze: &MazeMap, p: &Pose, sensor: &SensorConfig) -> Result<LocalView> {
    let scan = raycast(maze, p, sensor)?;
    Ok(view_from_scan(maze, sensor, p, &scan))
}

/// [`observe_local`] for a scan that was already taken at `p`.
pub fn view_from_scan(maze: &MazeMap, sensor: &SensorConfig, p: &Pose, scan: &DepthScan) -> LocalView {
    let mut acc = Accumulator::new(maze, sensor, FrameSpec::local(*p));
    acc.add_scan(p, scan);
    LocalView {
        grid: three_valued(&acc.finish()),
    }
}

pub fn three_valued(obs: &Observed) -> Plane {
    ndarray::Zip::from(&obs.free)
        .and(&obs.occupied)
        .map_collect(|&f, &o| if f { 1.0 } else if o { -1.0 } else { 0.0 })
}

/// Binary ground truth: union of everything seen free from `poses`,
/// expressed in the egocentric frame of the last pose.
pub fn gt_accumulated_local(maze: &MazeMap, poses: &[Pose], sensor: &SensorConfig) -> Result<LocalView> {
    let Some(last) = poses.last() else {
        return Ok(LocalView::zeros());
    };
    let obs = observe_in_frame(maze, poses, sensor, FrameSpec::local(*last))?;
    Ok(LocalView {
        grid: obs.free.mapv(|f| if f { 1.0 } else { 0.0 }),
    })
}

/// Emulated perception error: each non-zero cell flips sign with
/// `flip_prob`, otherwise is halved with `attenuate_prob`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservationCorruption {
    pub flip_prob: f64,
    pub attenuate_prob: f64,
}

impl ObservationCorruption {
    pub fn is_off(&self) -> bool {
        self.flip_prob <= 0.0 && self.attenuate_prob <= 0.0
    }

    pub fn apply(&self, view: &mut LocalView, rng: &mut dyn RngCore) {
        if self.is_off() {
            return;
        }
        let centre = (LOCAL_SIZE / 2, LOCAL_SIZE / 2);
        for ((i, j), v) in view.grid.indexed_iter_mut() {
            if *v == 0.0 || (i, j) == centre {
                continue;
            }
            if rng.random::<f64>() < self.flip_prob {
                *v = -*v;
            } else if rng.random::<f64>() < self.attenuate_prob {
                *v *= 0.5;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::maze::parse_maze;

    fn room(w: usize, h: usize, cell: f64) -> MazeMap {
        // S in the middle of an open w x h interior
        let mut s = format!("cell {cell}\n");
        s.push_str(&"#".repeat(w + 2));
        s.push('\n');
        for r in 0..h {
            s.push('#');
            for c in 0..w {
                s.push(if r == h / 2 && c == w / 2 { 'S' } else { '.' });
            }
            s.push_str("#\n");
        }
        s.push_str(&"#".repeat(w + 2));
        s.push('\n');
        parse_maze(&s).unwrap()
    }

    #[test]
    fn flat_wall_range() {
        // 5-wide room of 0.25 m cells: centre to east wall face = 2.5 cells
        let m = room(5, 5, 0.25);
        let p = Pose::new(0.125, 0.0, 0.0);
        let r = cast_ray(&m, p.x, p.y, 0.0, 10.0);
        assert!((r - 0.5).abs() < 1e-12, "{r}");
    }

    #[test]
    fn corridor_longer_than_range() {
        let m = parse_maze("cell 0.5\n##############\n#S...........#\n##############\n").unwrap();
        let r = cast_ray(&m, 0.0, 0.0, 0.0, 2.0);
        assert_eq!(r, 2.0);
    }

    #[test]
    fn diagonal_into_corner_is_sqrt2_times_perpendicular() {
        let m = room(5, 5, 0.25);
        // start cell centre is 2.5 cells from every wall face
        let perp = cast_ray(&m, 0.0, 0.0, 0.0, 10.0);
        let diag = cast_ray(&m, 0.0, 0.0, std::f64::consts::FRAC_PI_4, 10.0);
        assert!((perp - 0.625).abs() < 1e-12);
        assert!((diag - 2f64.sqrt() * perp).abs() < 1e-9, "{diag}");
    }

    #[test]
    fn outside_world_is_rejected() {
        let m = room(3, 3, 0.5);
        let r = raycast(&m, &Pose::new(2.0, 0.0, 0.0), &SensorConfig::default());
        assert!(matches!(r, Err(EsmError::OutsideWorld(_))));
        assert!(observe_local(&m, &Pose::new(0.0, -0.9, 0.0), &SensorConfig::default()).is_err());
    }

    #[test]
    fn scan_shape() {
        let m = room(9, 9, 0.24);
        let s = raycast(&m, &Pose::origin(), &SensorConfig::default()).unwrap();
        assert_eq!(s.angles.len(), 64);
        assert!(s.angles.windows(2).all(|w| w[0] < w[1]));
        assert!((s.angles[0] + s.angles[63]).abs() < 1e-12);
        assert!(s.ranges.iter().all(|&r| r > 0.0 && r <= s.max_range));
    }

    #[test]
    fn sealed_cell_sees_itself_and_its_walls() {
        let m = parse_maze("cell 0.24\n###\n#S#\n###\n").unwrap();
        let sensor = SensorConfig {
            fov: TAU,
            ..SensorConfig::default()
        };
        let v = observe_local(&m, &Pose::origin(), &sensor).unwrap();
        for ((i, j), &x) in v.grid.indexed_iter() {
            let di = (i as isize - 16).abs();
            let dj = (j as isize - 16).abs();
            let want = match (di, dj) {
                (0, 0) => 1.0,
                _ if di <= 1 && dj <= 1 => -1.0,
                _ => 0.0,
            };
            assert_eq!(x, want, "cell ({i},{j})");
        }
    }

    #[test]
    fn zero_fov_sees_only_the_agent_cell() {
        let m = room(9, 9, 0.24);
        let sensor = SensorConfig {
            fov: 0.0,
            ..SensorConfig::default()
        };
        let v = observe_local(&m, &Pose::origin(), &sensor).unwrap();
        assert_eq!(v.grid[[16, 16]], 1.0);
        assert_eq!(v.grid.iter().filter(|&&x| x != 0.0).count(), 1);
    }

    #[test]
    fn quarter_turn_rotates_the_visible_set() {
        // point-set oracle: with an all-round sensor the set of world cells
        // seen (and their labels) cannot depend on the agent's heading
        let m = parse_maze(
            "cell 0.24\n#########\n#...#...#\n#.......#\n#.#...#.#\n#...S...#\n#.......#\n##.....##\n#.......#\n#########\n",
        )
        .unwrap();
        let sensor = SensorConfig {
            fov: TAU,
            ..SensorConfig::default()
        };
        let world_set = |theta: f64| {
            let p = Pose::new(0.0, 0.0, theta);
            let v = observe_local(&m, &p, &sensor).unwrap();
            let mut s: Vec<((i64, i64), i64)> = v
                .grid
                .indexed_iter()
                .filter(|(_, &x)| x != 0.0)
                .map(|((i, j), &x)| {
                    let (wx, wy) = p.to_world((i as f64 - 16.0) * 0.24, (j as f64 - 16.0) * 0.24);
                    (((wx / 0.24).round() as i64, (wy / 0.24).round() as i64), x as i64)
                })
                .collect();
            s.sort();
            s
        };
        let s0 = world_set(0.0);
        assert!(s0.len() > 20);
        for k in 1..4 {
            assert_eq!(world_set(k as f64 * std::f64::consts::FRAC_PI_2), s0, "turn {k}");
        }
    }

    #[test]
    fn accumulated_t1_is_binarized_observation() {
        let m = room(11, 11, 0.24);
        let p = Pose::new(0.1, -0.05, 0.3);
        let sensor = SensorConfig::default();
        let gt = gt_accumulated_local(&m, &[p], &sensor).unwrap();
        let v = observe_local(&m, &p, &sensor).unwrap();
        assert_eq!(gt.grid, v.binarized());
    }

    #[test]
    fn corruption_is_seeded() {
        use rand::SeedableRng;
        let m = room(9, 9, 0.24);
        let v = observe_local(&m, &Pose::origin(), &SensorConfig::default()).unwrap();
        let c = ObservationCorruption {
            flip_prob: 0.2,
            attenuate_prob: 0.2,
        };
        let run = || {
            let mut w = v.clone();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
            c.apply(&mut w, &mut rng);
            w
        };
        let a = run();
        assert_eq!(a, run());
        assert_ne!(a, v);
        assert_eq!(a.grid[[16, 16]], 1.0);
        let mut same = v.clone();
        ObservationCorruption::default().apply(&mut same, &mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
        assert_eq!(same, v);
    }
}
