use thiserror::Error;

pub type Result<T> = std::result::Result<T, EsmError>;

#[derive(Debug, Error)]
pub enum EsmError {
    #[error("egomotion exceeds action limits: {0}")]
    LimitExceeded(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid maze: {0}")]
    InvalidMaze(String),

    #[error("pose is outside the free space of the world: {0}")]
    OutsideWorld(String),

    #[error("trajectory collides with a wall at step {step}")]
    CollisionOnRollout { step: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("no valid triplet could be mined from the history")]
    EmptyResult,

    #[error("place written at t={t} but ledger already holds t={last}")]
    NonMonotonicTime { t: usize, last: usize },

    #[error("pose history does not cover steps {from}..={to}")]
    MissingHistory { from: usize, to: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("trajectory has no revisits, loop-closure ground truth is empty")]
    EmptyGroundTruth,

    #[error("unknown {kind} strategy '{name}' (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<EsmError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl EsmError {
    pub fn at_step(self, step: usize) -> Self {
        match self {
            e @ EsmError::AtStep { .. } => e,
            e => EsmError::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }

    /// Step index carried by this error, if it was raised inside an episode.
    pub fn step(&self) -> Option<usize> {
        match self {
            EsmError::AtStep { step, .. } => Some(*step),
            EsmError::CollisionOnRollout { step } => Some(*step),
            _ => None,
        }
    }
}
