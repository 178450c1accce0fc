//! Run bundles: everything a run produced, on disk, in a form the `eval`,
//! `pr` and `render` commands can read back without rerunning.
//!
//! Per-step binary files hold steps `1..=T` back to back in step order.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::episode::{global_plane_report, pr_curves, window_trend, ClosureRecord, EpisodeResult};
use super::metrics::MetricsReport;
use super::pr::{write_pr_csv, PrCurve};
use crate::bvu::LocalMap;
use crate::error::{EsmError, Result};
use crate::frame::{FrameSpec, LOCAL_CELL, LOCAL_SIZE};
use crate::geometry::{Egomotion, Pose};
use crate::grid::{plane_from_le_bytes, plane_to_le_bytes, Plane};
use crate::gu::{render_world, write_image_pgm, write_overlay_csv, LoopClosureEvent, Rendered};
use crate::pu::Embedding;
use crate::world::{parse_maze, raycast, Accumulator, LocalView, MazeMap};

const CELLS: usize = LOCAL_SIZE * LOCAL_SIZE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: u32,
    pub steps: usize,
    pub backend: String,
    pub seed: u64,
    pub embedding_dim: usize,
    pub memory_rows: usize,
    pub memory_cols: usize,
    pub closures: usize,
    pub corrections: usize,
    pub final_local: Option<MetricsReport>,
    pub final_global: Option<MetricsReport>,
    /// Per matcher; empty when the trajectory has no revisits.
    pub pr: Vec<PrSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrSummary {
    pub matcher: String,
    pub auc: f64,
    pub gt_pairs: usize,
    pub detections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMeta {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    /// Pixel (row, col) of the start position.
    pub origin_pixel: (f64, f64),
    pub memory_rows: usize,
    pub memory_cols: usize,
    pub backend: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct PoseRow {
    t: usize,
    true_x: f64,
    true_y: f64,
    true_theta: f64,
    est_x: f64,
    est_y: f64,
    est_theta: f64,
    dtheta: f64,
    heading: f64,
    distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct PlaceRow {
    t: usize,
    row: f64,
    col: f64,
    offset: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct ClosureRow {
    t_now: usize,
    t_matched: usize,
    embed_dist: f64,
    cell_dist: f64,
    corrected: bool,
}

pub fn summarize(cfg: &RunConfig, r: &EpisodeResult) -> Summary {
    let (memory_rows, memory_cols) = r.memory.shape();
    Summary {
        schema: super::config::SCHEMA,
        steps: r.steps(),
        backend: cfg.backend.clone(),
        seed: cfg.seed,
        embedding_dim: r.embeddings.first().map_or(0, |e| e.dim()),
        memory_rows,
        memory_cols,
        closures: r.closures.len(),
        corrections: r.closures.iter().filter(|c| c.corrected).count(),
        final_local: r.reports("local").last().cloned(),
        final_global: r.final_global().cloned(),
        pr: r.pr.iter().flatten().map(|(n, c)| pr_summary(n, c)).collect(),
    }
}

fn pr_summary(name: &str, c: &PrCurve) -> PrSummary {
    PrSummary {
        matcher: name.to_string(),
        auc: c.auc,
        gt_pairs: c.gt_pairs,
        detections: c.detections,
    }
}

fn write_csv_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut wr = csv::Writer::from_path(path)?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

fn read_csv_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for r in rdr.deserialize() {
        out.push(r?);
    }
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn write_rendered(dir: &Path, r: &Rendered, meta: &GlobalMeta) -> Result<()> {
    let mut f = BufWriter::new(fs::File::create(dir.join("global.pgm"))?);
    write_image_pgm(&mut f, &r.image)?;
    write_json(&dir.join("global_meta.json"), meta)?;
    write_overlay_csv(fs::File::create(dir.join("overlay.csv"))?, &r.overlay)
}

fn render_bundle(world: &Plane, poses: &[Pose], events: &[LoopClosureEvent], backend: &str) -> (Rendered, GlobalMeta) {
    let r = render_world(world, LOCAL_CELL, poses, events);
    let (memory_rows, memory_cols) = world.dim();
    let meta = GlobalMeta {
        rows: r.geometry.rows,
        cols: r.geometry.cols,
        cell_size: r.geometry.cell_size,
        origin_pixel: r.geometry.origin_pixel,
        memory_rows,
        memory_cols,
        backend: backend.to_string(),
    };
    (r, meta)
}

fn write_pr(dir: &Path, curves: &[(String, PrCurve)]) -> Result<()> {
    let refs: Vec<(&str, &PrCurve)> = curves.iter().map(|(n, c)| (n.as_str(), c)).collect();
    write_pr_csv(fs::File::create(dir.join("pr.csv"))?, &refs)
}

/// Write the full bundle for one run into `dir` (created if missing).
pub fn write_bundle(dir: &Path, cfg: &RunConfig, maze: &MazeMap, trajectory_csv: &str, r: &EpisodeResult) -> Result<Summary> {
    fs::create_dir_all(dir)?;
    let summary = summarize(cfg, r);
    write_json(&dir.join("summary.json"), &summary)?;
    fs::write(dir.join("config.json"), cfg.to_bundle_json()? + "\n")?;
    fs::write(dir.join("maze.txt"), maze.to_text())?;
    fs::write(dir.join("trajectory.csv"), trajectory_csv)?;

    write_csv_rows(
        &dir.join("poses.csv"),
        (0..r.true_poses.len()).map(|t| {
            let (tp, bp) = (r.true_poses[t], r.believed_poses[t]);
            let e = if t == 0 { Egomotion::null() } else { r.measured[t - 1] };
            PoseRow {
                t,
                true_x: tp.x,
                true_y: tp.y,
                true_theta: tp.theta,
                est_x: bp.x,
                est_y: bp.y,
                est_theta: bp.theta,
                dtheta: e.dtheta,
                heading: e.heading,
                distance: e.distance,
            }
        }),
    )?;
    write_csv_rows(&dir.join("metrics.csv"), &r.metrics)?;

    let dim = summary.embedding_dim as u64;
    write_csv_rows(
        &dir.join("places.csv"),
        r.memory.places().iter().map(|p| PlaceRow {
            t: p.t,
            row: p.coord.0,
            col: p.coord.1,
            offset: (p.t as u64 - 1) * dim * 8,
        }),
    )?;
    let emb: Vec<u8> = r.embeddings[1..]
        .iter()
        .flat_map(|e| e.as_slice().iter().flat_map(|v| v.to_le_bytes()))
        .collect();
    fs::write(dir.join("embeddings.bin"), emb)?;
    let views: Vec<u8> = r.views[1..]
        .iter()
        .flat_map(|v| v.grid.iter().map(|&x| x.round() as i8 as u8))
        .collect();
    fs::write(dir.join("views.bin"), views)?;
    let locals: Vec<u8> = r.locals[1..].iter().flat_map(|l| plane_to_le_bytes(&l.grid)).collect();
    fs::write(dir.join("locals.bin"), locals)?;
    let world = r.memory.world_belief();
    fs::write(dir.join("world_belief.bin"), plane_to_le_bytes(&world))?;

    write_csv_rows(
        &dir.join("closures.csv"),
        r.closures.iter().map(|c| ClosureRow {
            t_now: c.event.t_now,
            t_matched: c.event.t_matched,
            embed_dist: c.event.embed_dist,
            cell_dist: c.event.cell_dist,
            corrected: c.corrected,
        }),
    )?;
    let events: Vec<LoopClosureEvent> = r.closures.iter().map(|c| c.event).collect();
    let (rendered, meta) = render_bundle(&world, &r.believed_poses, &events, &cfg.backend);
    write_rendered(dir, &rendered, &meta)?;
    write_pr(dir, r.pr.as_deref().unwrap_or(&[]))?;
    Ok(summary)
}

/// A bundle read back from disk.
#[derive(Debug, Clone)]
pub struct RunBundle {
    pub config: RunConfig,
    pub summary: Summary,
    pub maze: MazeMap,
    pub true_poses: Vec<Pose>,
    pub believed_poses: Vec<Pose>,
    /// Entry 0 is an empty placeholder, as in [`EpisodeResult`].
    pub views: Vec<LocalView>,
    pub locals: Vec<LocalMap>,
    pub embeddings: Vec<Embedding>,
    pub world_belief: Plane,
    pub closures: Vec<ClosureRecord>,
}

fn missing(dir: &Path, name: &str) -> EsmError {
    EsmError::Config(format!("{} is not a run bundle: {name} missing", dir.display()))
}

fn read(dir: &Path, name: &str) -> Result<Vec<u8>> {
    fs::read(dir.join(name)).map_err(|_| missing(dir, name))
}

fn chunks<T>(bytes: &[u8], size: usize, steps: usize, name: &str, f: impl Fn(&[u8]) -> Result<T>) -> Result<Vec<T>> {
    if bytes.len() != size * steps {
        return Err(EsmError::ShapeMismatch {
            expected: format!("{name}: {} bytes", size * steps),
            got: format!("{} bytes", bytes.len()),
        });
    }
    bytes.chunks_exact(size.max(1)).take(steps).map(f).collect()
}

impl RunBundle {
    pub fn load(dir: &Path) -> Result<Self> {
        let text = |name: &str| -> Result<String> { fs::read_to_string(dir.join(name)).map_err(|_| missing(dir, name)) };
        let config = RunConfig::from_json(&text("config.json")?)?;
        let summary: Summary = serde_json::from_str(&text("summary.json")?)?;
        let maze = parse_maze(&text("maze.txt")?)?;
        let n = summary.steps;

        let rows: Vec<PoseRow> = read_csv_rows(&dir.join("poses.csv")).map_err(|_| missing(dir, "poses.csv"))?;
        if rows.len() != n + 1 {
            return Err(EsmError::Config(format!("poses.csv has {} rows, expected {}", rows.len(), n + 1)));
        }
        let true_poses = rows.iter().map(|r| Pose::new(r.true_x, r.true_y, r.true_theta)).collect();
        let believed_poses = rows.iter().map(|r| Pose::new(r.est_x, r.est_y, r.est_theta)).collect();

        let dim = summary.embedding_dim;
        let mut embeddings = vec![Embedding::zeros(dim)];
        embeddings.extend(chunks(&read(dir, "embeddings.bin")?, dim * 8, n, "embeddings.bin", |c| {
            Embedding::new(c.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
        })?);
        let mut views = vec![LocalView::zeros()];
        views.extend(chunks(&read(dir, "views.bin")?, CELLS, n, "views.bin", |c| {
            let grid = Plane::from_shape_vec((LOCAL_SIZE, LOCAL_SIZE), c.iter().map(|&b| b as i8 as f64).collect())
                .expect("length checked");
            Ok(LocalView { grid })
        })?);
        let mut locals = vec![LocalMap::zeros()];
        locals.extend(chunks(&read(dir, "locals.bin")?, CELLS * 8, n, "locals.bin", |c| {
            LocalMap::from_plane(plane_from_le_bytes(c, (LOCAL_SIZE, LOCAL_SIZE))?)
        })?);
        let world_belief = plane_from_le_bytes(
            &read(dir, "world_belief.bin")?,
            (summary.memory_rows, summary.memory_cols),
        )?;
        let closures = read_csv_rows::<ClosureRow>(&dir.join("closures.csv"))
            .map_err(|_| missing(dir, "closures.csv"))?
            .into_iter()
            .map(|c| ClosureRecord {
                event: LoopClosureEvent {
                    t_now: c.t_now,
                    t_matched: c.t_matched,
                    embed_dist: c.embed_dist,
                    cell_dist: c.cell_dist,
                },
                corrected: c.corrected,
            })
            .collect();
        Ok(Self {
            config,
            summary,
            maze,
            true_poses,
            believed_poses,
            views,
            locals,
            embeddings,
            world_belief,
            closures,
        })
    }

    pub fn steps(&self) -> usize {
        self.summary.steps
    }

    /// Recompute the map metrics from the stored maps: the per-window local
    /// trend and checkpoints, and the final global map.
    pub fn evaluate(&self) -> Result<Vec<MetricsReport>> {
        let cfg = &self.config;
        let sensor = cfg.sensor.to_sensor()?;
        let scans = self
            .true_poses
            .iter()
            .map(|p| raycast(&self.maze, p, &sensor))
            .collect::<Result<Vec<_>>>()?;
        let n = self.steps();
        let mut out = Vec::new();
        let mut a = 1;
        while a <= n {
            let b = (a + cfg.eval_interval - 1).min(n);
            let trend = window_trend(&self.maze, &sensor, &self.true_poses, &scans, &self.locals, a, b)?;
            let mut checkpoint = trend.last().cloned().expect("window is not empty");
            checkpoint.area_tag = "local".into();
            out.extend(trend);
            out.push(checkpoint);
            a = b + 1;
        }
        if n > 0 {
            let (h, w) = self.world_belief.dim();
            let frame = FrameSpec::centred(self.maze.start, h, w, LOCAL_CELL);
            let mut gt = Accumulator::new(&self.maze, &sensor, frame);
            for (p, s) in self.true_poses[1..].iter().zip(&scans[1..]) {
                gt.add_scan(p, s);
            }
            out.push(global_plane_report(&self.world_belief, &self.maze, &gt, frame, n)?);
        }
        Ok(out)
    }

    pub fn pr_curves(&self) -> Result<Option<Vec<(String, PrCurve)>>> {
        pr_curves(
            &self.config,
            &self.true_poses,
            &self.believed_poses,
            &self.views,
            &self.embeddings,
            LOCAL_CELL,
        )
    }

    pub fn write_pr(&self, dir: &Path) -> Result<Option<Vec<(String, PrCurve)>>> {
        let curves = self.pr_curves()?;
        write_pr(dir, curves.as_deref().unwrap_or(&[]))?;
        Ok(curves)
    }

    pub fn render(&self, dir: &Path) -> Result<GlobalMeta> {
        let events: Vec<LoopClosureEvent> = self.closures.iter().map(|c| c.event).collect();
        let (r, meta) = render_bundle(&self.world_belief, &self.believed_poses, &events, &self.config.backend);
        write_rendered(dir, &r, &meta)?;
        Ok(meta)
    }
}
