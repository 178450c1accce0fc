//! Egocentric spatial memory.
//!
//! An agent moving through a maze accumulates a 32x32 egocentric
//! free-space map by warping its previous map with each egomotion and
//! merging the new observation through a `tanh` of a weighted sum. Local
//! maps are written into a larger egocentric grid memory whose read/write
//! heads stay fixed at its centre; place embeddings stored alongside
//! support loop-closure detection and drift correction under noisy
//! odometry.
//!
//! Interchangeable pieces (memory backends, place matchers, optimizers,
//! odometry noise) are trait objects registered by name in
//! [`registry::Registry`] instances and chosen from run configs.

pub mod bvu;
pub mod error;
pub mod eval;
pub mod frame;
pub mod geometry;
pub mod grid;
pub mod gu;
pub mod noise;
pub mod pu;
pub mod registry;
pub mod world;

pub use error::{EsmError, Result};
