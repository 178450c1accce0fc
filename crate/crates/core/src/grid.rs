//! Dense planes, bilinear sampling and rigid warps.
//!
//! Index coordinates put cell centres on integers: cell `(i, j)` is
//! sampled at `(i, j)` exactly, so sampling on the lattice reproduces the
//! stored values without interpolation error.

use std::io::Write;

use ndarray::Array2;

use crate::error::Result;
use crate::geometry::Affine2;

pub type Plane = Array2<f64>;

/// Sample coordinates this close to an integer are snapped onto it, so that
/// lattice-exact transforms (90 degree turns, whole-cell shifts) stay exact
/// despite `cos(pi/2) != 0` in floating point.
const SNAP: f64 = 1e-9;

#[inline]
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < SNAP {
        r
    } else {
        x
    }
}

#[inline]
fn at(src: &Plane, i: isize, j: isize, fill: f64) -> f64 {
    let (h, w) = src.dim();
    if i < 0 || j < 0 || i as usize >= h || j as usize >= w {
        fill
    } else {
        src[[i as usize, j as usize]]
    }
}

/// Snapped cell index and fraction of `x`, when every neighbour it needs
/// lies inside `0..n`.
#[inline]
fn split(x: f64, n: usize) -> Option<(usize, f64)> {
    if !(x > -SNAP && x < n as f64) {
        return None;
    }
    let i = x as usize;
    let f = x - i as f64;
    let (i, f) = if f < SNAP {
        (i, 0.0)
    } else if f > 1.0 - SNAP {
        (i + 1, 0.0)
    } else {
        (i, f)
    };
    (i < n && (f == 0.0 || i + 1 < n)).then_some((i, f))
}

/// Bilinear sample at index coordinates `(u, v)`; neighbours outside the
/// plane read as `fill`.
pub fn bilinear_sample(src: &Plane, u: f64, v: f64, fill: f64) -> f64 {
    let u = snap(u);
    let v = snap(v);
    let (h, w) = src.dim();
    if u <= -1.0 || v <= -1.0 || u >= h as f64 || v >= w as f64 {
        return fill;
    }
    let i0 = u.floor();
    let j0 = v.floor();
    let fu = u - i0;
    let fv = v - j0;
    let (i, j) = (i0 as isize, j0 as isize);
    let v00 = at(src, i, j, fill);
    if fu == 0.0 && fv == 0.0 {
        return v00;
    }
    let v01 = at(src, i, j + 1, fill);
    let v10 = at(src, i + 1, j, fill);
    let v11 = at(src, i + 1, j + 1, fill);
    v00 * (1.0 - fu) * (1.0 - fv) + v01 * (1.0 - fu) * fv + v10 * fu * (1.0 - fv) + v11 * fu * fv
}

/// Like [`bilinear_sample`], but neighbours outside the plane take the
/// nearest edge value instead of a fill.
pub fn bilinear_sample_clamped(src: &Plane, u: f64, v: f64) -> f64 {
    let (h, w) = src.dim();
    let u = snap(u).clamp(0.0, (h - 1) as f64);
    let v = snap(v).clamp(0.0, (w - 1) as f64);
    bilinear_sample(src, u, v, 0.0)
}

/// Rows and columns spanned by cells that are not exactly zero.
fn nonzero_bounds(flat: &[f64], w: usize) -> Option<((usize, usize), (usize, usize))> {
    let mut rows: Option<(usize, usize)> = None;
    let (mut c0, mut c1) = (usize::MAX, 0);
    for (i, row) in flat.chunks_exact(w).enumerate() {
        let Some(first) = row.iter().position(|&v| v != 0.0) else {
            continue;
        };
        let last = row.iter().rposition(|&v| v != 0.0).expect("row has a non-zero");
        rows = Some((rows.map_or(i, |r| r.0), i));
        c0 = c0.min(first);
        c1 = c1.max(last);
    }
    rows.map(|r| (r, (c0, c1)))
}

/// Spatial-transformer warp: `out(o) = src(a^-1(o))`, where `a` acts on
/// offsets from `pivot` (index coordinates). Samples falling outside the
/// source read as `fill`.
pub fn warp_plane(src: &Plane, a: &Affine2, pivot: (f64, f64), fill: f64) -> Plane {
    let inv = a.inverse();
    let (h, w) = src.dim();
    let r = inv.linear();
    let (tx, ty) = inv.translation();
    let data = src.as_standard_layout();
    let flat = data.as_slice().expect("standard layout");
    let mut out = vec![fill; h * w];
    // With a zero fill, outputs that only see zeros stay zero: visit just
    // the image of the non-zero block.
    let (rows, cols) = if fill == 0.0 {
        let Some(((i0, i1), (j0, j1))) = nonzero_bounds(flat, w) else {
            return Plane::zeros((h, w));
        };
        let corners = [(i0, j0), (i0, j1), (i1, j0), (i1, j1)].map(|(i, j)| {
            a.apply((i as f64 - pivot.0, j as f64 - pivot.1))
        });
        let span = |k: usize, n: usize, c: f64| {
            let lo = corners.iter().map(|q| if k == 0 { q.0 } else { q.1 }).fold(f64::INFINITY, f64::min) + c;
            let hi = corners.iter().map(|q| if k == 0 { q.0 } else { q.1 }).fold(f64::NEG_INFINITY, f64::max) + c;
            let lo = (lo.floor() - 2.0).max(0.0) as usize;
            let hi = ((hi.ceil() + 2.0).max(0.0) as usize).min(n);
            lo..hi.max(lo)
        };
        (span(0, h, pivot.0), span(1, w, pivot.1))
    } else {
        (0..h, 0..w)
    };
    for i in rows {
        let row = &mut out[i * w..(i + 1) * w];
        let qi = i as f64 - pivot.0;
        // source coordinate is affine in j
        let base_u = r[0][0] * qi + tx + pivot.0;
        let base_v = r[1][0] * qi + ty + pivot.1;
        for j in cols.clone() {
            let qj = j as f64 - pivot.1;
            let u = base_u + r[0][1] * qj;
            let v = base_v + r[1][1] * qj;
            row[j] = match (split(u, h), split(v, w)) {
                (Some((i0, fu)), Some((j0, fv))) => {
                    let k = i0 * w + j0;
                    let (di, dj) = ((fu > 0.0) as usize * w, (fv > 0.0) as usize);
                    let v00 = flat[k];
                    if di == 0 && dj == 0 {
                        v00
                    } else {
                        let (v01, v10, v11) = (flat[k + dj], flat[k + di], flat[k + di + dj]);
                        v00 * (1.0 - fu) * (1.0 - fv) + v01 * (1.0 - fu) * fv + v10 * fu * (1.0 - fv) + v11 * fu * fv
                    }
                }
                _ => bilinear_sample(src, u, v, fill),
            };
        }
    }
    Array2::from_shape_vec((h, w), out).expect("h * w values")
}

/// Map a belief value in `[-1, 1]` to an 8-bit grey level.
pub fn to_gray(v: f64) -> u8 {
    (255.0 * (v + 1.0) / 2.0).round().clamp(0.0, 255.0) as u8
}

/// Binary PGM (P5, 8-bit); row 0 is written first.
pub fn write_pgm<W: Write>(out: &mut W, plane: &Plane) -> Result<()> {
    let (h, w) = plane.dim();
    write!(out, "P5\n{w} {h}\n255\n")?;
    let bytes: Vec<u8> = plane.iter().map(|&v| to_gray(v)).collect();
    out.write_all(&bytes)?;
    Ok(())
}

/// One CSV record per row, values printed with round-trip precision.
pub fn write_plane_csv<W: Write>(out: W, plane: &Plane) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in plane.rows() {
        wr.write_record(row.iter().map(|v| v.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_plane_csv(text: &str) -> Result<Plane> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|e| crate::error::EsmError::Parse {
                    line: line + 1,
                    msg: format!("'{s}': {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let h = rows.len();
    let w = rows.first().map_or(0, |r| r.len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((h, w), flat).map_err(|e| crate::error::EsmError::ShapeMismatch {
        expected: format!("{h}x{w}"),
        got: e.to_string(),
    })
}

/// Little-endian f64 dump, row-major.
pub fn plane_to_le_bytes(plane: &Plane) -> Vec<u8> {
    plane.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn plane_from_le_bytes(bytes: &[u8], shape: (usize, usize)) -> Result<Plane> {
    let n = shape.0 * shape.1;
    if bytes.len() != n * 8 {
        return Err(crate::error::EsmError::ShapeMismatch {
            expected: format!("{} bytes", n * 8),
            got: format!("{} bytes", bytes.len()),
        });
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Array2::from_shape_vec(shape, vals).expect("length checked"))
}
