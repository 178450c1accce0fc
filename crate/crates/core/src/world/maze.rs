//! ASCII maze environments.
//!
//! ```text
//! # comment lines start with "# "
//! cell 0.24
//! #####
//! #S..#
//! #####
//! ```
//! `#` is a wall, `.` free space, `S` the (free) start cell. The world
//! origin is the centre of the start cell, x points right (east) and y up
//! (north, towards earlier text lines).

use ndarray::Array2;

use crate::error::{EsmError, Result};
use crate::geometry::Pose;

#[derive(Debug, Clone, PartialEq)]
pub struct MazeMap {
    /// `true` = wall; indexed `[row, col]` in text order.
    pub occupancy: Array2<bool>,
    pub cell_size: f64,
    pub start_cell: (usize, usize),
    pub start: Pose,
}

fn is_comment(line: &str) -> bool {
    let mut chars = line.chars();
    chars.next() == Some('#') && chars.next().is_some_and(char::is_whitespace)
}

pub fn parse_maze(text: &str) -> Result<MazeMap> {
    let mut cell_size: Option<f64> = None;
    let mut rows: Vec<(usize, Vec<bool>)> = Vec::new();
    let mut start: Option<(usize, usize)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() || is_comment(line) {
            continue;
        }
        if let Some(rest) = line.trim_start().strip_prefix("cell") {
            if cell_size.is_some() || !rows.is_empty() {
                return Err(EsmError::Parse {
                    line: line_no,
                    msg: "'cell' header must appear once, before the grid".into(),
                });
            }
            let v: f64 = rest.trim().parse().map_err(|_| EsmError::Parse {
                line: line_no,
                msg: format!("bad cell size '{}'", rest.trim()),
            })?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(EsmError::Parse {
                    line: line_no,
                    msg: "cell size must be positive".into(),
                });
            }
            cell_size = Some(v);
            continue;
        }
        if cell_size.is_none() {
            return Err(EsmError::Parse {
                line: line_no,
                msg: "missing 'cell <meters>' header".into(),
            });
        }
        let r = rows.len();
        let mut row = Vec::with_capacity(line.len());
        for (c, ch) in line.chars().enumerate() {
            match ch {
                '#' => row.push(true),
                '.' => row.push(false),
                'S' => {
                    if start.is_some() {
                        return Err(EsmError::Parse {
                            line: line_no,
                            msg: "more than one start cell 'S'".into(),
                        });
                    }
                    start = Some((r, c));
                    row.push(false);
                }
                other => {
                    return Err(EsmError::Parse {
                        line: line_no,
                        msg: format!("unexpected character '{other}' at column {}", c + 1),
                    })
                }
            }
        }
        if let Some((_, first)) = rows.first() {
            if first.len() != row.len() {
                return Err(EsmError::Parse {
                    line: line_no,
                    msg: format!("ragged row: {} cells, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push((line_no, row));
    }

    let cell_size = cell_size.ok_or_else(|| EsmError::Parse {
        line: 0,
        msg: "missing 'cell <meters>' header".into(),
    })?;
    if rows.is_empty() {
        return Err(EsmError::InvalidMaze("empty grid".into()));
    }
    let h = rows.len();
    let w = rows[0].1.len();
    let flat: Vec<bool> = rows.into_iter().flat_map(|(_, r)| r).collect();
    let occupancy = Array2::from_shape_vec((h, w), flat).expect("rows checked rectangular");

    for ((r, c), &wall) in occupancy.indexed_iter() {
        let edge = r == 0 || c == 0 || r == h - 1 || c == w - 1;
        if edge && !wall {
            return Err(EsmError::InvalidMaze(format!(
                "boundary cell ({r}, {c}) is open"
            )));
        }
    }
    let start_cell = start.ok_or_else(|| EsmError::InvalidMaze("no start cell 'S'".into()))?;

    Ok(MazeMap {
        occupancy,
        cell_size,
        start_cell,
        start: Pose::origin(),
    })
}

impl MazeMap {
    pub fn rows(&self) -> usize {
        self.occupancy.nrows()
    }

    pub fn cols(&self) -> usize {
        self.occupancy.ncols()
    }

    pub fn free_cells(&self) -> usize {
        self.occupancy.iter().filter(|&&w| !w).count()
    }

    /// Out-of-range cells count as walls.
    pub fn is_wall_cell(&self, row: isize, col: isize) -> bool {
        if row < 0 || col < 0 || row as usize >= self.rows() || col as usize >= self.cols() {
            return true;
        }
        self.occupancy[[row as usize, col as usize]]
    }

    /// Continuous grid coordinates `(col, row)` of a world point; integer
    /// values are cell boundaries.
    pub fn world_to_grid(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.start_cell.1 as f64 + 0.5 + x / self.cell_size,
            self.start_cell.0 as f64 + 0.5 - y / self.cell_size,
        )
    }

    pub fn grid_to_world(&self, gx: f64, gy: f64) -> (f64, f64) {
        (
            (gx - self.start_cell.1 as f64 - 0.5) * self.cell_size,
            (self.start_cell.0 as f64 + 0.5 - gy) * self.cell_size,
        )
    }

    pub fn cell_of(&self, x: f64, y: f64) -> (isize, isize) {
        let (gx, gy) = self.world_to_grid(x, y);
        (gy.floor() as isize, gx.floor() as isize)
    }

    pub fn is_wall_point(&self, x: f64, y: f64) -> bool {
        let (r, c) = self.cell_of(x, y);
        self.is_wall_cell(r, c)
    }

    /// World-frame bounding box `(x_min, x_max, y_min, y_max)` of the grid.
    pub fn world_bounds(&self) -> (f64, f64, f64, f64) {
        let (x0, y0) = self.grid_to_world(0.0, 0.0);
        let (x1, y1) = self.grid_to_world(self.cols() as f64, self.rows() as f64);
        (x0.min(x1), x0.max(x1), y0.min(y1), y0.max(y1))
    }

    pub fn check_pose(&self, p: &Pose) -> Result<()> {
        if !(p.x.is_finite() && p.y.is_finite()) || self.is_wall_point(p.x, p.y) {
            return Err(EsmError::OutsideWorld(format!(
                "({:.3}, {:.3}) is not in a free cell",
                p.x, p.y
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("cell {}\n", self.cell_size);
        for (r, row) in self.occupancy.rows().into_iter().enumerate() {
            for (c, &wall) in row.iter().enumerate() {
                s.push(if wall {
                    '#'
                } else if (r, c) == self.start_cell {
                    'S'
                } else {
                    '.'
                });
            }
            s.push('\n');
        }
        s
    }
}
