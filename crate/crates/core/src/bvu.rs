//! Local mapper: warp the accumulated egocentric map by the egomotion,
//! then merge the new observation through `tanh(λ·obs + (1-λ)·warped)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{EsmError, Result};
use crate::frame::{LOCAL_CELL, LOCAL_PIVOT, LOCAL_SIZE};
use crate::geometry::{egomotion_to_affine, Affine2, Egomotion};
use crate::grid::{self, Plane};
use crate::world::LocalView;

/// Value written where a warp samples outside the previous map.
pub const UNKNOWN: f64 = 0.0;

/// Accumulated egocentric free-space belief, values in `(-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMap {
    pub grid: Plane,
}

impl Default for LocalMap {
    fn default() -> Self {
        Self::zeros()
    }
}

impl LocalMap {
    pub fn zeros() -> Self {
        Self {
            grid: Plane::zeros((LOCAL_SIZE, LOCAL_SIZE)),
        }
    }

    pub fn from_plane(grid: Plane) -> Result<Self> {
        check_shape(&grid)?;
        Ok(Self { grid })
    }

    pub fn write_pgm<W: Write>(&self, out: &mut W) -> Result<()> {
        grid::write_pgm(out, &self.grid)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        grid::write_plane_csv(out, &self.grid)
    }
}

fn check_shape(p: &Plane) -> Result<()> {
    if p.dim() != (LOCAL_SIZE, LOCAL_SIZE) {
        return Err(EsmError::ShapeMismatch {
            expected: format!("{LOCAL_SIZE}x{LOCAL_SIZE}"),
            got: format!("{}x{}", p.nrows(), p.ncols()),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeParams {
    pub lambda: f64,
}

impl Default for MergeParams {
    fn default() -> Self {
        Self { lambda: 0.5 }
    }
}

impl MergeParams {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(EsmError::Config(format!("lambda {lambda} outside [0, 1]")));
        }
        Ok(Self { lambda })
    }
}

/// `(e^{2z} - 1) / (e^{2z} + 1)`, evaluated through `expm1` so small
/// arguments keep full precision.
#[inline]
pub fn squash(z: f64) -> f64 {
    if z.abs() > 20.0 {
        return z.tanh();
    }
    let e = (2.0 * z).exp_m1();
    e / (e + 2.0)
}

/// Warp any egocentric plane about `pivot`; fill marks unknown space.
pub fn warp_map(m: &Plane, a: &Affine2, pivot: (f64, f64), fill: f64) -> Plane {
    grid::warp_plane(m, a, pivot, fill)
}

pub fn merge_maps(warped: &LocalMap, obs: &LocalView, p: &MergeParams) -> Result<LocalMap> {
    check_shape(&warped.grid)?;
    check_shape(&obs.grid)?;
    let lam = p.lambda;
    let grid = ndarray::Zip::from(&obs.grid)
        .and(&warped.grid)
        .map_collect(|&o, &w| squash(lam * o + (1.0 - lam) * w));
    Ok(LocalMap { grid })
}

pub fn bvu_step(prev: &LocalMap, e: &Egomotion, obs: &LocalView, p: &MergeParams) -> Result<LocalMap> {
    let a = egomotion_to_affine(e, LOCAL_CELL);
    let warped = LocalMap {
        grid: warp_map(&prev.grid, &a, LOCAL_PIVOT, UNKNOWN),
    };
    merge_maps(&warped, obs, p)
}
