//! Global memory: a belief plane behind a backend plus a sparse ledger of
//! place embeddings.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::backend::{backend_registry, pivot_of, window_origin, world_to_ego, MemoryBackend};
use crate::bvu::LocalMap;
use crate::error::{EsmError, Result};
use crate::frame::{LOCAL_CELL, LOCAL_SIZE};
use crate::geometry::{egomotion_to_affine, Egomotion, Pose};
use crate::grid::Plane;
use crate::pu::{embedding_distance, Embedding};

pub const DEFAULT_MEMORY_SIZE: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct PlaceRecord {
    /// Continuous egocentric `(row, col)` in cells, kept exact under motion.
    pub coord: (f64, f64),
    pub embedding: Embedding,
    pub t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopClosureEvent {
    pub t_now: usize,
    pub t_matched: usize,
    pub embed_dist: f64,
    pub cell_dist: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClosureParams {
    /// Embedding distance threshold.
    pub alpha: f64,
    /// Search radius around the agent, cells.
    pub close_radius: f64,
    /// Places younger than this many steps are ignored.
    pub recency_window: usize,
}

impl Default for ClosureParams {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            close_radius: 16.0,
            recency_window: 64,
        }
    }
}

/// Ones exactly on the centred local window.
pub fn attention_mask(shape: (usize, usize)) -> Array2<u8> {
    let mut r = Array2::zeros(shape);
    let (r0, c0) = window_origin(shape);
    r.slice_mut(s![r0..r0 + LOCAL_SIZE, c0..c0 + LOCAL_SIZE]).fill(1);
    r
}

#[derive(Clone)]
pub struct GlobalMemory {
    backend: Box<dyn MemoryBackend>,
    places: Vec<PlaceRecord>,
}

impl std::fmt::Debug for GlobalMemory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GlobalMemory")
            .field("backend", &self.backend.name())
            .field("shape", &self.backend.shape())
            .field("places", &self.places.len())
            .finish()
    }
}

impl GlobalMemory {
    pub fn new(backend: Box<dyn MemoryBackend>) -> Self {
        Self {
            backend,
            places: Vec::new(),
        }
    }

    /// Backend by registry name, `rows x cols` cells of the local-map size.
    pub fn with_backend(name: &str, rows: usize, cols: usize) -> Result<Self> {
        let b = backend_registry().build(name, &json!({"rows": rows, "cols": cols, "cell": LOCAL_CELL}))?;
        Ok(Self::new(b))
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.backend.shape()
    }

    pub fn cell(&self) -> f64 {
        self.backend.cell()
    }

    pub fn pivot(&self) -> (f64, f64) {
        pivot_of(self.shape())
    }

    /// Tracked pose relative to the episode start.
    pub fn pose(&self) -> Pose {
        self.backend.pose()
    }

    pub fn belief(&self) -> Plane {
        self.backend.egocentric()
    }

    pub fn world_belief(&self) -> Plane {
        self.backend.world()
    }

    pub fn places(&self) -> &[PlaceRecord] {
        &self.places
    }

    /// Empty belief and ledger, same backend and shape.
    pub fn cleared(&self) -> Self {
        let mut backend = self.backend.clone_box();
        backend.clear();
        Self::new(backend)
    }

    pub fn memory_warp(&mut self, e: &Egomotion) {
        self.backend.warp(e);
        if e.is_null() {
            return;
        }
        let a = egomotion_to_affine(e, self.cell());
        let pivot = self.pivot();
        for p in &mut self.places {
            let (u, v) = a.apply((p.coord.0 - pivot.0, p.coord.1 - pivot.1));
            p.coord = (u + pivot.0, v + pivot.1);
        }
    }

    pub fn write_local(&mut self, m: &LocalMap) {
        self.backend.write_window(&m.grid);
    }

    pub fn read_local(&self) -> LocalMap {
        LocalMap {
            grid: self.backend.read_window(),
        }
    }

    pub fn write_place(&mut self, emb: Embedding, t: usize) -> Result<()> {
        if let Some(last) = self.places.last() {
            if t <= last.t {
                return Err(EsmError::NonMonotonicTime { t, last: last.t });
            }
        }
        self.places.push(PlaceRecord {
            coord: self.pivot(),
            embedding: emb,
            t,
        });
        Ok(())
    }

    /// Ledger records passing the closeness and recency tests, with their
    /// distance from the agent in cells.
    pub fn candidates(&self, t_now: usize, close_radius: f64, recency_window: usize) -> Vec<(&PlaceRecord, f64)> {
        let pivot = self.pivot();
        self.places
            .iter()
            .filter(|p| t_now > p.t && t_now - p.t > recency_window)
            .map(|p| (p, (p.coord.0 - pivot.0).hypot(p.coord.1 - pivot.1)))
            .filter(|&(_, d)| d <= close_radius)
            .collect()
    }

    pub fn detect_loop_closure(&self, emb_now: &Embedding, t_now: usize, cp: &ClosureParams) -> Option<LoopClosureEvent> {
        let mut best: Option<LoopClosureEvent> = None;
        for (rec, cell_dist) in self.candidates(t_now, cp.close_radius, cp.recency_window) {
            let d = embedding_distance(emb_now, &rec.embedding);
            if best.is_none_or(|b| d < b.embed_dist) {
                best = Some(LoopClosureEvent {
                    t_now,
                    t_matched: rec.t,
                    embed_dist: d,
                    cell_dist,
                });
            }
        }
        best.filter(|e| e.embed_dist <= cp.alpha)
    }

    /// Rebuild belief and ledger coordinates from scratch: replay `locals`
    /// (index = step, entry 0 unused) under `poses` (index = step, entry 0
    /// is the start).
    pub fn replay(&self, poses: &[Pose], locals: &[LocalMap]) -> Result<Self> {
        let t_end = poses.len().saturating_sub(1);
        if locals.len() < poses.len() {
            return Err(EsmError::MissingHistory { from: 0, to: t_end });
        }
        let mut out = self.cleared();
        let start = poses.first().copied().unwrap_or_default();
        out.backend.warp(&Pose::origin().motion_to(&start));
        for t in 1..poses.len() {
            out.backend.warp(&poses[t - 1].motion_to(&poses[t]));
            out.backend.write_window(&locals[t].grid);
        }
        let here = world_to_ego(&poses[t_end], self.cell());
        let pivot = self.pivot();
        for rec in &self.places {
            let p = poses.get(rec.t).ok_or(EsmError::MissingHistory { from: rec.t, to: t_end })?;
            let (u, v) = here.apply((p.x / self.cell(), p.y / self.cell()));
            out.places.push(PlaceRecord {
                coord: (u + pivot.0, v + pivot.1),
                ..rec.clone()
            });
        }
        Ok(out)
    }
}
