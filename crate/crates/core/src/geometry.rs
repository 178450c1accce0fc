//! Continuous planar poses, per-step egomotion and the rigid grid
//! transforms used to re-express maps after the agent moves.
//!
//! Conventions: the world frame is x/y with counterclockwise-positive
//! heading. An egomotion rotates first, then translates along
//! `heading` measured from the post-rotation facing direction.
//! Egocentric grids put "forward" on increasing row and "left" on
//! increasing column, so a rotation in (row, col) index space has the
//! same sign as the rotation in the world.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{EsmError, Result};

const LIMIT_EPS: f64 = 1e-12;

/// Wrap an angle to `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let w = a - two_pi * ((a + PI) / two_pi).floor();
    // floor can land exactly on the excluded upper bound after rounding
    if w >= PI {
        w - two_pi
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Default for Pose {
    fn default() -> Self {
        Self::origin()
    }
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn origin() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    /// Apply one egomotion (rotate, then translate along the new heading).
    pub fn compose(&self, e: &Egomotion) -> Pose {
        let theta = wrap_angle(self.theta + e.dtheta);
        let dir = theta + e.heading;
        Pose {
            x: self.x + e.distance * dir.cos(),
            y: self.y + e.distance * dir.sin(),
            theta,
        }
    }

    /// The egomotion that takes `self` to `other`.
    pub fn motion_to(&self, other: &Pose) -> Egomotion {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        let distance = dx.hypot(dy);
        let dtheta = wrap_angle(other.theta - self.theta);
        let heading = if distance == 0.0 {
            0.0
        } else {
            wrap_angle(dy.atan2(dx) - other.theta)
        };
        Egomotion {
            dtheta,
            heading,
            distance,
        }
    }

    pub fn distance_to(&self, other: &Pose) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    /// World point expressed in this pose's egocentric (forward, left) metres.
    pub fn to_local(&self, wx: f64, wy: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let dx = wx - self.x;
        let dy = wy - self.y;
        (c * dx + s * dy, -s * dx + c * dy)
    }

    pub fn to_world(&self, fwd: f64, left: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * fwd - s * left, self.y + s * fwd + c * left)
    }
}

/// One step of agent motion: rotate by `dtheta`, then move `distance`
/// metres in direction `heading` relative to the rotated facing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Egomotion {
    pub dtheta: f64,
    pub heading: f64,
    pub distance: f64,
}

impl Egomotion {
    /// Negative distances are folded into the heading.
    pub fn new(dtheta: f64, heading: f64, distance: f64) -> Self {
        if distance < 0.0 {
            Self {
                dtheta,
                heading: wrap_angle(heading + PI),
                distance: -distance,
            }
        } else {
            Self {
                dtheta,
                heading,
                distance,
            }
        }
    }

    pub fn null() -> Self {
        Self {
            dtheta: 0.0,
            heading: 0.0,
            distance: 0.0,
        }
    }

    pub fn from_degrees(dtheta_deg: f64, heading_deg: f64, distance: f64) -> Self {
        Self::new(dtheta_deg.to_radians(), heading_deg.to_radians(), distance)
    }

    pub fn is_null(&self) -> bool {
        self.dtheta == 0.0 && self.distance == 0.0
    }

    /// Translation expressed in the frame before this step's rotation.
    fn displacement(&self) -> (f64, f64) {
        let a = self.dtheta + self.heading;
        (self.distance * a.cos(), self.distance * a.sin())
    }

    /// Motion that undoes this one: `p.compose(e).compose(e.inverse()) == p`.
    pub fn inverse(&self) -> Egomotion {
        Egomotion {
            dtheta: -self.dtheta,
            heading: wrap_angle(self.dtheta + self.heading + PI),
            distance: self.distance,
        }
    }

    /// Single egomotion equal to applying `self` and then `next`.
    pub fn then(&self, next: &Egomotion) -> Egomotion {
        let (t1x, t1y) = self.displacement();
        let (n2x, n2y) = next.displacement();
        let (s, c) = self.dtheta.sin_cos();
        let tx = t1x + c * n2x - s * n2y;
        let ty = t1y + s * n2x + c * n2y;
        let dtheta = self.dtheta + next.dtheta;
        let distance = tx.hypot(ty);
        let heading = if distance == 0.0 {
            0.0
        } else {
            wrap_angle(ty.atan2(tx) - dtheta)
        };
        Egomotion {
            dtheta,
            heading,
            distance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionLimits {
    /// radians per step
    pub rot_limit: f64,
    /// metres per step
    pub trans_limit: f64,
    /// seconds
    pub step_period: f64,
}

impl Default for ActionLimits {
    fn default() -> Self {
        Self {
            rot_limit: 10f64.to_radians(),
            trans_limit: 0.1,
            step_period: 0.25,
        }
    }
}

impl ActionLimits {
    pub fn new(rot_limit: f64, trans_limit: f64, step_period: f64) -> Result<Self> {
        if !(rot_limit > 0.0 && trans_limit > 0.0 && step_period > 0.0) {
            return Err(EsmError::Config(
                "action limits must all be positive".to_string(),
            ));
        }
        Ok(Self {
            rot_limit,
            trans_limit,
            step_period,
        })
    }
}

pub fn validate_egomotion(e: Egomotion, lim: &ActionLimits) -> Result<Egomotion> {
    if !(e.dtheta.is_finite() && e.heading.is_finite() && e.distance.is_finite()) {
        return Err(EsmError::LimitExceeded(format!("non-finite egomotion {e:?}")));
    }
    if e.dtheta.abs() > lim.rot_limit + LIMIT_EPS {
        return Err(EsmError::LimitExceeded(format!(
            "|dtheta| = {:.4} deg > {:.4} deg",
            e.dtheta.abs().to_degrees(),
            lim.rot_limit.to_degrees()
        )));
    }
    if e.distance > lim.trans_limit + LIMIT_EPS {
        return Err(EsmError::LimitExceeded(format!(
            "distance = {:.4} m > {:.4} m",
            e.distance, lim.trans_limit
        )));
    }
    Ok(e)
}

pub fn compose_pose(p: &Pose, e: &Egomotion) -> Pose {
    p.compose(e)
}

/// Rigid 2D transform `q -> R q + t` as a 2x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine2 {
    pub m: [[f64; 3]; 2],
}

impl Affine2 {
    pub fn identity() -> Self {
        Self {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        }
    }

    pub fn from_rotation_translation(angle: f64, tx: f64, ty: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: [[c, -s, tx], [s, c, ty]],
        }
    }

    pub fn apply(&self, q: (f64, f64)) -> (f64, f64) {
        let m = &self.m;
        (
            m[0][0] * q.0 + m[0][1] * q.1 + m[0][2],
            m[1][0] * q.0 + m[1][1] * q.1 + m[1][2],
        )
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Affine2) -> Affine2 {
        let a = &self.m;
        let b = &other.m;
        let mut m = [[0.0; 3]; 2];
        for i in 0..2 {
            for j in 0..3 {
                m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
            m[i][2] += a[i][2];
        }
        Affine2 { m }
    }

    /// Inverse of a rigid transform (transpose of the rotation).
    pub fn inverse(&self) -> Affine2 {
        let m = &self.m;
        let (r00, r01, r10, r11) = (m[0][0], m[1][0], m[0][1], m[1][1]);
        let (tx, ty) = (m[0][2], m[1][2]);
        Affine2 {
            m: [
                [r00, r01, -(r00 * tx + r01 * ty)],
                [r10, r11, -(r10 * tx + r11 * ty)],
            ],
        }
    }

    pub fn linear(&self) -> [[f64; 2]; 2] {
        [[self.m[0][0], self.m[0][1]], [self.m[1][0], self.m[1][1]]]
    }

    pub fn translation(&self) -> (f64, f64) {
        (self.m[0][2], self.m[1][2])
    }

    /// Largest deviation of the linear part from a proper rotation.
    pub fn rigidity_error(&self) -> f64 {
        let r = self.linear();
        let rtr = [
            [
                r[0][0] * r[0][0] + r[1][0] * r[1][0],
                r[0][0] * r[0][1] + r[1][0] * r[1][1],
            ],
            [
                r[0][1] * r[0][0] + r[1][1] * r[1][0],
                r[0][1] * r[0][1] + r[1][1] * r[1][1],
            ],
        ];
        let det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
        let mut err = (det - 1.0).abs();
        for (i, row) in rtr.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((v - target).abs());
            }
        }
        err
    }
}

/// Transform taking a point's previous-egocentric grid offset (cells,
/// relative to the agent) to its offset in the current egocentric frame.
pub fn egomotion_to_affine(e: &Egomotion, cell_size: f64) -> Affine2 {
    debug_assert!(cell_size > 0.0);
    let (s, c) = e.heading.sin_cos();
    let d = e.distance / cell_size;
    Affine2::from_rotation_translation(-e.dtheta, -d * c, -d * s)
}
