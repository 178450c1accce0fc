//! Run configuration files (`"schema": 1`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bvu::MergeParams;
use crate::error::{EsmError, Result};
use crate::geometry::ActionLimits;
use crate::gu::{backend_registry, ClosureParams, DEFAULT_MEMORY_SIZE};
use crate::noise::{noise_registry, NoiseModel};
use crate::pu::{MiningConfig, TrainConfig};
use crate::world::{ObservationCorruption, SensorConfig};

use super::matcher::matcher_registry;
use super::pr::DEFAULT_MATCH_SLACK;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSettings {
    pub fov_deg: f64,
    pub n_rays: usize,
    pub max_range: f64,
}

impl Default for SensorSettings {
    fn default() -> Self {
        let s = SensorConfig::default();
        Self {
            fov_deg: s.fov.to_degrees(),
            n_rays: s.n_rays,
            max_range: s.max_range,
        }
    }
}

impl SensorSettings {
    pub fn to_sensor(&self) -> Result<SensorConfig> {
        let s = SensorConfig {
            fov: self.fov_deg.to_radians(),
            n_rays: self.n_rays,
            max_range: self.max_range,
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSettings {
    /// Relative level, e.g. 0.15 for 15 %.
    pub level: f64,
    pub kind: String,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        Self {
            level: 0.0,
            kind: "uniform".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClosureSettings {
    pub alpha: f64,
    pub close_radius: f64,
    pub recency_window: usize,
    /// Apply drift correction on accepted closures.
    pub correct: bool,
    /// Residuals shorter than this (metres) are left alone.
    pub min_residual: f64,
    /// Residuals longer than this (metres) are treated as false matches.
    pub max_residual: f64,
    pub max_rotation_deg: f64,
    /// Steps after a correction during which no other correction runs.
    pub refractory: usize,
}

impl Default for ClosureSettings {
    fn default() -> Self {
        let c = ClosureParams::default();
        Self {
            alpha: c.alpha,
            close_radius: c.close_radius,
            recency_window: c.recency_window,
            correct: true,
            min_residual: 0.1,
            max_residual: 1.0,
            max_rotation_deg: 30.0,
            refractory: 32,
        }
    }
}

impl ClosureSettings {
    pub fn params(&self) -> ClosureParams {
        ClosureParams {
            alpha: self.alpha,
            close_radius: self.close_radius,
            recency_window: self.recency_window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrSettings {
    /// Ground-truth revisit radius, metres.
    pub eps_pos: f64,
    pub match_slack: usize,
    pub matchers: Vec<String>,
}

impl Default for PrSettings {
    fn default() -> Self {
        Self {
            eps_pos: 0.3,
            match_slack: DEFAULT_MATCH_SLACK,
            matchers: vec!["embedding".into(), "pixelwise".into(), "random".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitSettings {
    pub rot_deg: f64,
    pub trans: f64,
    pub step_period: f64,
}

impl Default for LimitSettings {
    fn default() -> Self {
        let l = ActionLimits::default();
        Self {
            rot_deg: l.rot_limit.to_degrees(),
            trans: l.trans_limit,
            step_period: l.step_period,
        }
    }
}

impl LimitSettings {
    pub fn to_limits(&self) -> Result<ActionLimits> {
        ActionLimits::new(self.rot_deg.to_radians(), self.trans, self.step_period)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub maze: PathBuf,
    pub trajectory: PathBuf,
    #[serde(default)]
    pub sensor: SensorSettings,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub noise: NoiseSettings,
    #[serde(default)]
    pub corruption: ObservationCorruption,
    #[serde(default)]
    pub closure: ClosureSettings,
    #[serde(default = "default_backend")]
    pub backend: String,
    #[serde(default = "default_memory_size")]
    pub memory_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_eval_interval")]
    pub eval_interval: usize,
    /// Trained encoder parameters; a seeded untrained encoder otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoder: Option<PathBuf>,
    #[serde(default)]
    pub pr: PrSettings,
    #[serde(default)]
    pub limits: LimitSettings,
}

fn default_lambda() -> f64 {
    MergeParams::default().lambda
}

fn default_backend() -> String {
    "egocentric-warp".into()
}

fn default_memory_size() -> usize {
    DEFAULT_MEMORY_SIZE
}

fn default_eval_interval() -> usize {
    32
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn parse_config<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| EsmError::Config(e.to_string()))?;
    match raw.get("schema").and_then(|v| v.as_u64()) {
        Some(s) if s == SCHEMA as u64 => {}
        Some(s) => return Err(EsmError::Config(format!("unsupported schema {s} (expected {SCHEMA})"))),
        None => return Err(EsmError::Config("missing \"schema\": 1".into())),
    }
    serde_json::from_value(raw).map_err(|e| EsmError::Config(e.to_string()))
}

/// `ESM_SEED`, if set, replaces the seed from the file.
pub fn seed_override() -> Result<Option<u64>> {
    match std::env::var("ESM_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| EsmError::Config(format!("ESM_SEED '{v}' is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

impl RunConfig {
    /// Config with every optional field at its default.
    pub fn new(maze: impl Into<PathBuf>, trajectory: impl Into<PathBuf>) -> Self {
        serde_json::from_value(json!({
            "schema": SCHEMA,
            "maze": maze.into(),
            "trajectory": trajectory.into(),
        }))
        .expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        parse_config(text)
    }

    /// Parse, make paths absolute relative to the file, apply `ESM_SEED`
    /// and validate.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EsmError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.maze = resolve(base, &cfg.maze);
        cfg.trajectory = resolve(base, &cfg.trajectory);
        cfg.encoder = cfg.encoder.map(|p| resolve(base, &p));
        cfg.output_dir = cfg.output_dir.map(|p| resolve(base, &p));
        if let Some(seed) = seed_override()? {
            cfg.seed = seed;
        }
        cfg.validate()?;
        for p in [Some(&cfg.maze), Some(&cfg.trajectory), cfg.encoder.as_ref()].into_iter().flatten() {
            if !p.is_file() {
                return Err(EsmError::Config(format!("referenced file {} does not exist", p.display())));
            }
        }
        Ok(cfg)
    }

    /// Checks that do not touch the filesystem.
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(EsmError::Config(format!("unsupported schema {}", self.schema)));
        }
        if self.eval_interval == 0 {
            return Err(EsmError::Config("eval_interval must be >= 1".into()));
        }
        MergeParams::new(self.lambda)?;
        if !(self.noise.level >= 0.0 && self.noise.level < 1.0) {
            return Err(EsmError::Config(format!("noise level {} outside [0, 1)", self.noise.level)));
        }
        noise_registry().build(&self.noise.kind, &json!({}))?;
        backend_registry().build(&self.backend, &json!({"rows": 32}))?;
        let mreg = matcher_registry();
        for m in &self.pr.matchers {
            mreg.build(m, &json!({}))?;
        }
        self.sensor.to_sensor()?;
        self.limits.to_limits()?;
        if self.memory_size < crate::frame::LOCAL_SIZE {
            return Err(EsmError::Config(format!("memory_size {} < 32", self.memory_size)));
        }
        let c = &self.closure;
        if !(c.alpha >= 0.0 && c.close_radius >= 0.0 && c.min_residual <= c.max_residual) {
            return Err(EsmError::Config("closure thresholds must be non-negative and ordered".into()));
        }
        for p in [self.corruption.flip_prob, self.corruption.attenuate_prob] {
            if !(0.0..=1.0).contains(&p) {
                return Err(EsmError::Config(format!("corruption probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        let kind = noise_registry().build(&self.noise.kind, &json!({}))?;
        Ok(NoiseModel::with_kind(self.noise.level, self.seed, kind))
    }

    /// Canonical JSON with the output directory dropped, so the copy stored
    /// in a bundle does not depend on where the bundle was written.
    pub fn to_bundle_json(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = None;
        Ok(serde_json::to_string_pretty(&c)?)
    }
}

/// Configuration of `esm train-pu`: sample views at random free poses of a
/// maze, mine triplets, train, write the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainPuConfig {
    pub schema: u32,
    pub maze: PathBuf,
    #[serde(default)]
    pub sensor: SensorSettings,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub mining: MiningConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub seed: u64,
    pub output: PathBuf,
}

fn default_samples() -> usize {
    1500
}

impl TrainPuConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        parse_config(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EsmError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.maze = resolve(base, &cfg.maze);
        cfg.output = resolve(base, &cfg.output);
        if let Some(seed) = seed_override()? {
            cfg.seed = seed;
        }
        cfg.train.seed = cfg.seed;
        cfg.sensor.to_sensor()?;
        cfg.train.validate()?;
        if !cfg.maze.is_file() {
            return Err(EsmError::Config(format!("referenced file {} does not exist", cfg.maze.display())));
        }
        if cfg.samples < 2 {
            return Err(EsmError::Config("samples must be >= 2".into()));
        }
        Ok(cfg)
    }
}
