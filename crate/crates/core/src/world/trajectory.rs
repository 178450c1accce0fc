//! Pre-planned trajectories: CSV of `dtheta_deg, heading_deg, distance_m`.

use serde::{Deserialize, Serialize};

use crate::error::{EsmError, Result};
use crate::geometry::{validate_egomotion, ActionLimits, Egomotion, Pose};
use crate::world::maze::MazeMap;
use crate::world::sensor::cast_ray;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Egomotion>,
    pub name: String,
    pub seed: u64,
}

impl Trajectory {
    pub fn new(name: impl Into<String>, steps: Vec<Egomotion>) -> Self {
        Self {
            steps,
            name: name.into(),
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Parse the CSV body and check every step against the limits.
    pub fn parse(text: &str, lim: &ActionLimits) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut steps = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() == 1 && rec[0].is_empty() {
                continue;
            }
            if rec.len() != 3 {
                return Err(EsmError::Parse {
                    line,
                    msg: format!("expected 3 fields, got {}", rec.len()),
                });
            }
            let field = |k: usize| -> Result<f64> {
                rec[k].parse::<f64>().map_err(|_| EsmError::Parse {
                    line,
                    msg: format!("'{}' is not a number", &rec[k]),
                })
            };
            let e = Egomotion::from_degrees(field(0)?, field(1)?, field(2)?);
            let e = validate_egomotion(e, lim).map_err(|err| match err {
                EsmError::LimitExceeded(m) => EsmError::LimitExceeded(format!("line {line}: {m}")),
                other => other,
            })?;
            steps.push(e);
        }
        Ok(Self::new("trajectory", steps))
    }

    /// Execute from the maze start; fails at the first step whose motion
    /// would cross into a wall. Steps are numbered from 1, as in episodes.
    pub fn check_rollout(&self, maze: &MazeMap) -> Result<Vec<Pose>> {
        let mut p = maze.start;
        let mut poses = Vec::with_capacity(self.steps.len());
        for (k, e) in self.steps.iter().enumerate() {
            let rotated = Pose::new(p.x, p.y, p.theta + e.dtheta);
            if e.distance > 0.0 {
                let free = cast_ray(maze, rotated.x, rotated.y, rotated.theta + e.heading, e.distance);
                if free < e.distance {
                    return Err(EsmError::CollisionOnRollout { step: k + 1 });
                }
            }
            p = p.compose(e);
            if maze.is_wall_point(p.x, p.y) {
                return Err(EsmError::CollisionOnRollout { step: k + 1 });
            }
            poses.push(p);
        }
        Ok(poses)
    }

    /// Poses after each step, starting from `start` (not included).
    pub fn poses_from(&self, start: Pose) -> Vec<Pose> {
        self.steps
            .iter()
            .scan(start, |p, e| {
                *p = p.compose(e);
                Some(*p)
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# {}: dtheta_deg, heading_deg, distance_m\n", self.name);
        for e in &self.steps {
            s.push_str(&format!(
                "{}, {}, {}\n",
                e.dtheta.to_degrees(),
                e.heading.to_degrees(),
                e.distance
            ));
        }
        s
    }
}

pub fn load_trajectory(text: &str, maze: &MazeMap, lim: &ActionLimits) -> Result<Trajectory> {
    let t = Trajectory::parse(text, lim)?;
    t.check_rollout(maze)?;
    Ok(t)
}

/// Builds step lists from coarse moves, splitting each move into equal
/// sub-steps that respect the action limits.
#[derive(Debug, Clone)]
pub struct TrajectoryBuilder {
    lim: ActionLimits,
    steps: Vec<Egomotion>,
}

impl TrajectoryBuilder {
    pub fn new(lim: ActionLimits) -> Self {
        Self {
            lim,
            steps: Vec::new(),
        }
    }

    fn pieces(total: f64, limit: f64) -> usize {
        ((total.abs() / limit) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn forward(self, metres: f64) -> Self {
        self.walk(0.0, metres)
    }

    /// Move `metres` in direction `heading_deg` without turning.
    pub fn walk(mut self, heading_deg: f64, metres: f64) -> Self {
        let n = Self::pieces(metres, self.lim.trans_limit);
        let d = metres / n as f64;
        for _ in 0..n {
            self.steps.push(Egomotion::from_degrees(0.0, heading_deg, d));
        }
        self
    }

    /// Turn in place; positive is counterclockwise.
    pub fn turn(self, degrees: f64) -> Self {
        let step = self.lim.rot_limit.to_degrees();
        self.turn_with_step(degrees, step)
    }

    pub fn turn_with_step(mut self, degrees: f64, max_step_deg: f64) -> Self {
        let n = Self::pieces(degrees, max_step_deg.min(self.lim.rot_limit.to_degrees()));
        let a = degrees / n as f64;
        for _ in 0..n {
            self.steps.push(Egomotion::from_degrees(a, 0.0, 0.0));
        }
        self
    }

    /// Turn and advance together, `n` identical steps.
    pub fn arc(mut self, total_deg: f64, metres: f64, n: usize) -> Self {
        for _ in 0..n {
            self.steps.push(Egomotion::from_degrees(
                total_deg / n as f64,
                0.0,
                metres / n as f64,
            ));
        }
        self
    }

    pub fn wait(mut self, n: usize) -> Self {
        self.steps.extend(std::iter::repeat_n(Egomotion::null(), n));
        self
    }

    pub fn step(mut self, e: Egomotion) -> Self {
        self.steps.push(e);
        self
    }

    pub fn build(self, name: &str) -> Trajectory {
        Trajectory::new(name, self.steps)
    }
}
