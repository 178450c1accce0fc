//! North-up rendering of the world plane with a separate overlay table.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::backend::pivot_of;
use super::memory::{GlobalMemory, LoopClosureEvent};
use crate::error::Result;
use crate::geometry::Pose;
use crate::grid::{to_gray, Plane};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayPoint {
    pub kind: String,
    pub t: usize,
    /// Image row and column, pixels.
    pub row: f64,
    pub col: f64,
}

/// How world metres map to image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderGeometry {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    /// Pixel holding the start position.
    pub origin_pixel: (f64, f64),
}

impl RenderGeometry {
    /// Image `(row, col)` of a world point; rows grow southwards.
    pub fn pixel(&self, x: f64, y: f64) -> (f64, f64) {
        (self.origin_pixel.0 - y / self.cell_size, self.origin_pixel.1 + x / self.cell_size)
    }
}

#[derive(Debug, Clone)]
pub struct Rendered {
    pub image: Array2<u8>,
    pub geometry: RenderGeometry,
    pub overlay: Vec<OverlayPoint>,
}

/// World plane as an 8-bit image: the plane's `(row, col)` axes are the
/// start frame's (east, north), so the image is the plane transposed and
/// flipped vertically.
pub fn render_global(m: &GlobalMemory, poses: &[Pose], events: &[LoopClosureEvent]) -> Rendered {
    render_world(&m.world_belief(), m.cell(), poses, events)
}

/// Same as [`render_global`] for a world plane read back from disk.
pub fn render_world(world: &Plane, cell: f64, poses: &[Pose], events: &[LoopClosureEvent]) -> Rendered {
    let (h, w) = world.dim();
    let image = Array2::from_shape_fn((w, h), |(i, j)| to_gray(world[[j, w - 1 - i]]));
    let pivot = pivot_of((h, w));
    let geometry = RenderGeometry {
        rows: w,
        cols: h,
        cell_size: cell,
        origin_pixel: ((w - 1) as f64 - pivot.1, pivot.0),
    };
    let mut overlay = Vec::new();
    for (t, p) in poses.iter().enumerate() {
        let (row, col) = geometry.pixel(p.x, p.y);
        overlay.push(OverlayPoint {
            kind: "pose".into(),
            t,
            row,
            col,
        });
    }
    for e in events {
        if let Some(p) = poses.get(e.t_now) {
            let (row, col) = geometry.pixel(p.x, p.y);
            overlay.push(OverlayPoint {
                kind: "closure".into(),
                t: e.t_now,
                row,
                col,
            });
        }
    }
    Rendered {
        image,
        geometry,
        overlay,
    }
}

pub fn write_image_pgm<W: std::io::Write>(out: &mut W, image: &Array2<u8>) -> Result<()> {
    let (h, w) = image.dim();
    write!(out, "P5\n{w} {h}\n255\n")?;
    let bytes: Vec<u8> = image.iter().copied().collect();
    out.write_all(&bytes)?;
    Ok(())
}

pub fn write_overlay_csv<W: std::io::Write>(out: W, overlay: &[OverlayPoint]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    for p in overlay {
        wr.serialize(p)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvu::LocalMap;

    #[test]
    fn empty_memory_is_mid_grey() {
        let m = GlobalMemory::with_backend("egocentric-warp", 64, 64).unwrap();
        let r = render_global(&m, &[], &[]);
        assert!(r.image.iter().all(|&v| v == 128));
    }

    #[test]
    fn write_at_start_lands_in_the_centre_north_up() {
        let mut m = GlobalMemory::with_backend("egocentric-warp", 64, 64).unwrap();
        let mut g = Plane::zeros((32, 32));
        // one cell ahead of the agent (east at the start) and one to its left (north)
        g[[17, 16]] = 1.0;
        g[[16, 17]] = -1.0;
        m.write_local(&LocalMap::from_plane(g).unwrap());
        let r = render_global(&m, &[Pose::origin()], &[]);
        let (r0, c0) = r.geometry.pixel(0.0, 0.0);
        let (r0, c0) = (r0 as usize, c0 as usize);
        assert_eq!(r.image[[r0, c0 + 1]], 255);
        assert_eq!(r.image[[r0 - 1, c0]], 0);
        let lit = r.image.iter().filter(|&&v| v != 128).count();
        assert_eq!(lit, 2);
        assert_eq!((r.overlay[0].row, r.overlay[0].col), (r0 as f64, c0 as f64));
    }
}
