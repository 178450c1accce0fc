//! One simulated episode: sense, map locally, integrate globally, detect
//! and correct loop closures, and score the maps against ground truth.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::RunConfig;
use super::matcher::{matcher_registry, PlaceSample};
use super::metrics::{normalize, report, MetricsReport};
use super::pr::{candidate_pairs, gt_closures, pr_curve, score_pairs, PrCurve};
use crate::bvu::{bvu_step, LocalMap, MergeParams};
use crate::error::Result;
use crate::frame::FrameSpec;
use crate::geometry::{Egomotion, Pose};
use crate::grid::{bilinear_sample, Plane};
use crate::gu::{correct_drift, GlobalMemory, LoopClosureEvent, Residual};
use crate::pu::{encode_place, untrained_encoder, EncoderParams, Embedding};
use crate::world::{parse_maze, raycast, view_from_scan, Accumulator, DepthScan, LocalView, MazeMap, SensorConfig, Trajectory};

/// Everything an episode reads besides its configuration.
#[derive(Debug, Clone)]
pub struct EpisodeInputs {
    pub maze: MazeMap,
    pub trajectory: Trajectory,
    pub encoder: EncoderParams,
}

impl EpisodeInputs {
    /// Read the maze, trajectory and encoder named by `cfg`.
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let maze = parse_maze(&std::fs::read_to_string(&cfg.maze)?)?;
        let trajectory = Trajectory::parse(&std::fs::read_to_string(&cfg.trajectory)?, &cfg.limits.to_limits()?)?;
        let encoder = match &cfg.encoder {
            Some(p) => EncoderParams::load(p)?,
            None => untrained_encoder(cfg.seed),
        };
        Ok(Self {
            maze,
            trajectory,
            encoder,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureRecord {
    pub event: LoopClosureEvent,
    pub corrected: bool,
}

/// Per-step logs are indexed by step `t`; entry 0 is the start, before
/// any motion or observation.
#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub true_poses: Vec<Pose>,
    /// Dead-reckoned from measured egomotion, after any corrections.
    pub believed_poses: Vec<Pose>,
    pub measured: Vec<Egomotion>,
    pub views: Vec<LocalView>,
    pub locals: Vec<LocalMap>,
    pub embeddings: Vec<Embedding>,
    pub memory: GlobalMemory,
    pub closures: Vec<ClosureRecord>,
    /// Checkpoint reports (`local`, `global`) and the per-step `local-trend`
    /// curve inside each evaluation window.
    pub metrics: Vec<MetricsReport>,
    /// `None` when the trajectory never revisits a place.
    pub pr: Option<Vec<(String, PrCurve)>>,
}

impl EpisodeResult {
    pub fn steps(&self) -> usize {
        self.true_poses.len().saturating_sub(1)
    }

    pub fn reports(&self, tag: &str) -> impl Iterator<Item = &MetricsReport> + '_ {
        let tag = tag.to_string();
        self.metrics.iter().filter(move |m| m.area_tag == tag)
    }

    pub fn final_global(&self) -> Option<&MetricsReport> {
        self.reports("global").last()
    }

    pub fn auc(&self, matcher: &str) -> Option<f64> {
        self.pr
            .as_ref()?
            .iter()
            .find(|(n, _)| n == matcher)
            .map(|(_, c)| c.auc)
    }
}

/// Cells of the world plane whose centre lies inside the maze grid.
pub fn maze_region(maze: &MazeMap, frame: &FrameSpec) -> Array2<bool> {
    let (x0, x1, y0, y1) = maze.world_bounds();
    Array2::from_shape_fn(frame.shape, |(i, j)| {
        let (x, y) = frame.index_to_world(i as f64, j as f64);
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    })
}

/// The memory's world plane placed in the maze: the start frame, centred.
pub fn world_frame(memory: &GlobalMemory, start: Pose) -> FrameSpec {
    let (h, w) = memory.shape();
    FrameSpec::centred(start, h, w, memory.cell())
}

/// World plane against everything seen free so far, over the maze area.
pub fn global_plane_report(
    world: &Plane,
    maze: &MazeMap,
    gt: &Accumulator,
    frame: FrameSpec,
    t: usize,
) -> Result<MetricsReport> {
    let obs = gt.snapshot();
    let gt_plane = obs.free.mapv(|f| if f { 1.0 } else { 0.0 });
    report(&normalize(world), &gt_plane, Some(&maze_region(maze, &frame)), t, "global")
}

/// Resample a local map taken at `from` into the local frame of `to`;
/// cells outside the source read as 0 (no belief).
pub fn local_in_frame(m: &Plane, from: Pose, to: Pose) -> Plane {
    let (src, dst) = (FrameSpec::local(from), FrameSpec::local(to));
    Plane::from_shape_fn(dst.shape, |(i, j)| {
        let (x, y) = dst.index_to_world(i as f64, j as f64);
        let (u, v) = src.world_to_index(x, y);
        bilinear_sample(m, u, v, 0.0)
    })
}

/// Local maps of steps `a..=b`, each brought into the frame of step `b`,
/// against what was seen over the window, on the cells seen.
pub fn window_trend(
    maze: &MazeMap,
    sensor: &SensorConfig,
    poses: &[Pose],
    scans: &[DepthScan],
    locals: &[LocalMap],
    a: usize,
    b: usize,
) -> Result<Vec<MetricsReport>> {
    let mut acc = Accumulator::new(maze, sensor, FrameSpec::local(poses[b]));
    for k in a..=b {
        acc.add_scan(&poses[k], &scans[k]);
    }
    let obs = acc.finish();
    let gt = obs.free.mapv(|f| if f { 1.0 } else { 0.0 });
    let mask = obs.observed();
    (a..=b)
        .map(|s| {
            let pred = local_in_frame(&locals[s].grid, poses[s], poses[b]);
            report(&normalize(&pred), &gt, Some(&mask), s, "local-trend")
        })
        .collect()
}

pub fn run_episode(cfg: &RunConfig) -> Result<EpisodeResult> {
    let inputs = EpisodeInputs::load(cfg)?;
    run_episode_with(&inputs, cfg)
}

pub fn run_episode_with(inputs: &EpisodeInputs, cfg: &RunConfig) -> Result<EpisodeResult> {
    cfg.validate()?;
    let maze = &inputs.maze;
    let sensor = cfg.sensor.to_sensor()?;
    let limits = cfg.limits.to_limits()?;
    let merge = MergeParams::new(cfg.lambda)?;
    let closure = cfg.closure.params();
    let noise = cfg.noise_model()?;
    let mut noise_rng = noise.rng();
    let mut corrupt_rng = {
        use rand::SeedableRng;
        rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x0b5e_4e))
    };

    let true_poses = {
        let mut p = vec![maze.start];
        p.extend(inputs.trajectory.check_rollout(maze)?);
        p
    };
    let steps = inputs.trajectory.len();

    let mut memory = GlobalMemory::with_backend(&cfg.backend, cfg.memory_size, cfg.memory_size)?;
    let world = world_frame(&memory, maze.start);
    let mut world_gt = Accumulator::new(maze, &sensor, world);

    let mut believed = vec![Pose::origin()];
    let mut measured = Vec::with_capacity(steps);
    let mut views = vec![LocalView::zeros()];
    let mut locals = vec![LocalMap::zeros()];
    let mut embeddings = vec![Embedding::zeros(inputs.encoder.output_dim())];
    let mut scans: Vec<DepthScan> = vec![raycast(maze, &true_poses[0], &sensor)?];
    let mut closures = Vec::new();
    let mut metrics = Vec::new();
    let mut last_correction: Option<usize> = None;

    for t in 1..=steps {
        let e_true = inputs.trajectory.steps[t - 1];
        let e = noise.perturb(&e_true, &limits, &mut noise_rng);
        let pose = true_poses[t];

        let scan = raycast(maze, &pose, &sensor).map_err(|err| err.at_step(t))?;
        let mut view = view_from_scan(maze, &sensor, &pose, &scan);
        cfg.corruption.apply(&mut view, &mut corrupt_rng);
        world_gt.add_scan(&pose, &scan);

        let local = bvu_step(&locals[t - 1], &e, &view, &merge).map_err(|err| err.at_step(t))?;
        memory.memory_warp(&e);
        memory.write_local(&local);

        let emb = encode_place(&inputs.encoder, &view).map_err(|err| err.at_step(t))?;
        let event = memory.detect_loop_closure(&emb, t, &closure);
        memory.write_place(emb.clone(), t).map_err(|err| err.at_step(t))?;

        believed.push(believed[t - 1].compose(&e));
        measured.push(e);
        views.push(view);
        locals.push(local);
        embeddings.push(emb);
        scans.push(scan);

        if let Some(ev) = event {
            let corrected = cfg.closure.correct
                && last_correction.is_none_or(|c| t - c >= cfg.closure.refractory)
                && accept_residual(&believed[ev.t_now], &believed[ev.t_matched], cfg);
            if corrected {
                let (poses, rebuilt) = correct_drift(&memory, &believed, &locals, &ev).map_err(|err| err.at_step(t))?;
                believed = poses;
                memory = rebuilt;
                last_correction = Some(t);
            }
            closures.push(ClosureRecord { event: ev, corrected });
        }

        if t % cfg.eval_interval == 0 || t == steps {
            let a = ((t - 1) / cfg.eval_interval) * cfg.eval_interval + 1;
            let trend = window_trend(maze, &sensor, &true_poses, &scans, &locals, a, t).map_err(|err| err.at_step(t))?;
            let mut checkpoint = trend.last().cloned().expect("window holds step t");
            checkpoint.area_tag = "local".into();
            metrics.extend(trend);
            metrics.push(checkpoint);
            metrics.push(global_plane_report(&memory.world_belief(), maze, &world_gt, world, t).map_err(|err| err.at_step(t))?);
        }
    }

    let pr = if steps == 0 {
        None
    } else {
        pr_curves(cfg, &true_poses, &believed, &views, &embeddings, memory.cell())?
    };

    Ok(EpisodeResult {
        true_poses,
        believed_poses: believed,
        measured,
        views,
        locals,
        embeddings,
        memory,
        closures,
        metrics,
        pr,
    })
}

fn accept_residual(now: &Pose, matched: &Pose, cfg: &RunConfig) -> bool {
    let r = Residual::between(now, matched);
    let d = now.distance_to(matched);
    d >= cfg.closure.min_residual
        && d <= cfg.closure.max_residual
        && r.rotation.abs() <= cfg.closure.max_rotation_deg.to_radians()
}

/// One curve per configured matcher, or `None` without revisits.
pub fn pr_curves(
    cfg: &RunConfig,
    true_poses: &[Pose],
    believed: &[Pose],
    views: &[LocalView],
    embeddings: &[Embedding],
    cell: f64,
) -> Result<Option<Vec<(String, PrCurve)>>> {
    let gt = gt_closures(true_poses, cfg.pr.eps_pos, cfg.closure.recency_window);
    if gt.is_empty() {
        return Ok(None);
    }
    let pairs = candidate_pairs(believed, cfg.closure.close_radius * cell, cfg.closure.recency_window);
    let samples: Vec<PlaceSample> = views
        .iter()
        .zip(embeddings)
        .enumerate()
        .map(|(t, (v, e))| PlaceSample {
            t,
            view: &v.grid,
            embedding: e,
        })
        .collect();
    let reg = matcher_registry();
    let mut out = Vec::new();
    for name in &cfg.pr.matchers {
        let m = reg.build(name, &json!({"seed": cfg.seed}))?;
        let det = score_pairs(&pairs, m.as_ref(), &samples);
        out.push((name.clone(), pr_curve(&det, &gt, cfg.pr.match_slack)?));
    }
    Ok(Some(out))
}
