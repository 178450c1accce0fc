//! Grid frames: how world points land on a plane of cells.

use serde::{Deserialize, Serialize};

use crate::geometry::Pose;

/// Side of the square egocentric local map, in cells.
pub const LOCAL_SIZE: usize = 32;
/// Physical extent of the local map, metres.
pub const LOCAL_EXTENT: f64 = 7.68;
/// 7.68 m / 32 cells.
pub const LOCAL_CELL: f64 = LOCAL_EXTENT / LOCAL_SIZE as f64;

/// Agent position inside the local map: the centre of cell (16, 16).
pub const LOCAL_PIVOT: (f64, f64) = ((LOCAL_SIZE / 2) as f64, (LOCAL_SIZE / 2) as f64);

/// A plane of `shape` cells of side `cell` metres, anchored so that the
/// reference `pose` sits at index coordinates `pivot` facing +row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub pose: Pose,
    pub pivot: (f64, f64),
    pub cell: f64,
    pub shape: (usize, usize),
}

impl FrameSpec {
    /// The 32x32 egocentric frame of an agent at `pose`.
    pub fn local(pose: Pose) -> Self {
        Self {
            pose,
            pivot: LOCAL_PIVOT,
            cell: LOCAL_CELL,
            shape: (LOCAL_SIZE, LOCAL_SIZE),
        }
    }

    /// Plane of `h x w` cells centred on `pose` (pivot at `(h/2, w/2)`).
    pub fn centred(pose: Pose, h: usize, w: usize, cell: f64) -> Self {
        Self {
            pose,
            pivot: ((h / 2) as f64, (w / 2) as f64),
            cell,
            shape: (h, w),
        }
    }

    pub fn world_to_index(&self, wx: f64, wy: f64) -> (f64, f64) {
        let (f, l) = self.pose.to_local(wx, wy);
        (self.pivot.0 + f / self.cell, self.pivot.1 + l / self.cell)
    }

    pub fn index_to_world(&self, u: f64, v: f64) -> (f64, f64) {
        self.pose
            .to_world((u - self.pivot.0) * self.cell, (v - self.pivot.1) * self.cell)
    }

    /// Cell containing index coordinates `(u, v)`, if inside the plane.
    pub fn cell_at(&self, u: f64, v: f64) -> Option<(usize, usize)> {
        let i = (u + 0.5).floor();
        let j = (v + 0.5).floor();
        if i < 0.0 || j < 0.0 || i >= self.shape.0 as f64 || j >= self.shape.1 as f64 {
            None
        } else {
            Some((i as usize, j as usize))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_frame_constants() {
        assert!((LOCAL_CELL - 0.24).abs() < 1e-15);
        let f = FrameSpec::local(Pose::origin());
        assert_eq!(f.cell_at(16.0, 16.0), Some((16, 16)));
        assert_eq!(f.world_to_index(0.24, 0.0), (17.0, 16.0));
        assert_eq!(f.cell_at(-0.6, 3.0), None);
    }

    #[test]
    fn index_world_round_trip() {
        let f = FrameSpec::centred(Pose::new(1.0, -2.0, 0.7), 100, 80, 0.1);
        let (x, y) = f.index_to_world(12.25, 70.5);
        let (u, v) = f.world_to_index(x, y);
        assert!((u - 12.25).abs() < 1e-9 && (v - 70.5).abs() < 1e-9);
    }
}
