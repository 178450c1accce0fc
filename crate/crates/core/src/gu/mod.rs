//! Global memory: egocentric belief plane, place ledger, loop closure and
//! drift correction.

mod backend;
mod drift;
mod memory;
mod render;

pub use backend::{backend_registry, pivot_of, window_origin, world_to_ego, EgocentricWarp, MemoryBackend, WorldAnchored};
pub use drift::{correct_drift, redistribute, Residual};
pub use memory::{
    attention_mask, ClosureParams, GlobalMemory, LoopClosureEvent, PlaceRecord, DEFAULT_MEMORY_SIZE,
};
pub use render::{render_global, render_world, write_image_pgm, write_overlay_csv, OverlayPoint, RenderGeometry, Rendered};

use crate::bvu::LocalMap;
use crate::geometry::Egomotion;
use crate::pu::Embedding;

pub fn memory_warp(m: &mut GlobalMemory, e: &Egomotion) {
    m.memory_warp(e)
}

pub fn write_local(m: &mut GlobalMemory, local: &LocalMap) {
    m.write_local(local)
}

pub fn read_local(m: &GlobalMemory) -> LocalMap {
    m.read_local()
}

pub fn write_place(m: &mut GlobalMemory, emb: Embedding, t: usize) -> crate::Result<()> {
    m.write_place(emb, t)
}

pub fn detect_loop_closure(
    m: &GlobalMemory,
    emb_now: &Embedding,
    t_now: usize,
    params: &ClosureParams,
) -> Option<LoopClosureEvent> {
    m.detect_loop_closure(emb_now, t_now, params)
}
