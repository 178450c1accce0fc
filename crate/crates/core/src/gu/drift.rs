//! Loop-closure drift correction: spread the closing residual linearly
//! over the loop, then rebuild the memory by replay.

use super::memory::{GlobalMemory, LoopClosureEvent};
use crate::bvu::LocalMap;
use crate::error::{EsmError, Result};
use crate::geometry::{wrap_angle, Pose};

/// Rigid residual that moves the pose at `t_now` onto the pose at
/// `t_matched`: rotation about the matched position, then a translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub rotation: f64,
    pub translation: (f64, f64),
}

impl Residual {
    pub fn between(now: &Pose, matched: &Pose) -> Self {
        let rotation = wrap_angle(matched.theta - now.theta);
        let (s, c) = rotation.sin_cos();
        let (dx, dy) = (now.x - matched.x, now.y - matched.y);
        Self {
            rotation,
            translation: (-(c * dx - s * dy), -(s * dx + c * dy)),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.rotation == 0.0 && self.translation == (0.0, 0.0)
    }

    /// Translation the residual applies to the pose at `t_now`, metres.
    pub fn magnitude(&self, now: &Pose, matched: &Pose) -> f64 {
        now.distance_to(matched)
    }

    /// Apply fraction `f` of the residual, pivoting about `centre`.
    pub fn apply_fraction(&self, p: &Pose, centre: (f64, f64), f: f64) -> Pose {
        let (s, c) = (f * self.rotation).sin_cos();
        let (dx, dy) = (p.x - centre.0, p.y - centre.1);
        Pose::new(
            centre.0 + c * dx - s * dy + f * self.translation.0,
            centre.1 + s * dx + c * dy + f * self.translation.1,
            p.theta + f * self.rotation,
        )
    }
}

/// Poses with the residual spread linearly over `t_matched..=t_now`; later
/// poses take the full correction, earlier ones none.
pub fn redistribute(poses: &[Pose], t_matched: usize, t_now: usize) -> Result<Vec<Pose>> {
    if t_matched >= t_now || t_now >= poses.len() {
        return Err(EsmError::MissingHistory {
            from: t_matched,
            to: t_now,
        });
    }
    let m = poses[t_matched];
    let res = Residual::between(&poses[t_now], &m);
    if res.is_zero() {
        return Ok(poses.to_vec());
    }
    let span = (t_now - t_matched) as f64;
    Ok(poses
        .iter()
        .enumerate()
        .map(|(k, p)| {
            if k <= t_matched {
                *p
            } else {
                let f = ((k - t_matched) as f64 / span).min(1.0);
                res.apply_fraction(p, (m.x, m.y), f)
            }
        })
        .collect())
}

/// Corrected pose log and the memory rebuilt from it up to `t_now`.
pub fn correct_drift(
    memory: &GlobalMemory,
    poses: &[Pose],
    locals: &[LocalMap],
    event: &LoopClosureEvent,
) -> Result<(Vec<Pose>, GlobalMemory)> {
    let missing = EsmError::MissingHistory {
        from: event.t_matched,
        to: event.t_now,
    };
    if event.t_now >= poses.len() || event.t_now >= locals.len() || event.t_matched >= event.t_now {
        return Err(missing);
    }
    let res = Residual::between(&poses[event.t_now], &poses[event.t_matched]);
    if res.is_zero() {
        return Ok((poses.to_vec(), memory.clone()));
    }
    let corrected = redistribute(poses, event.t_matched, event.t_now)?;
    let rebuilt = memory.replay(&corrected[..=event.t_now], locals)?;
    Ok((corrected, rebuilt))
}
