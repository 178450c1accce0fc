//! Episode runner, metrics, precision-recall and run bundles.

pub mod baselines;
pub mod bundle;
pub mod config;
pub mod episode;
pub mod matcher;
pub mod metrics;
pub mod pr;

pub use baselines::{baseline_chance, baseline_pixelwise_matcher};
pub use config::{seed_override, RunConfig, TrainPuConfig, SCHEMA};
pub use episode::{run_episode, run_episode_with, ClosureRecord, EpisodeInputs, EpisodeResult};
pub use matcher::{matcher_registry, PlaceMatcher, PlaceSample};
pub use metrics::{report, MetricsReport};
pub use pr::{gt_closures, pr_curve, write_pr_csv, Detection, PrCurve, PrPoint};
