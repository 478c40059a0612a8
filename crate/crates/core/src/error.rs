use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid latent factors: {0}")]
    InvalidLatents(String),
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
    #[error("invalid body {index} ({role}): {reason}")]
    InvalidBody {
        index: usize,
        role: String,
        reason: String,
    },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("simulation diverged: body {body} ({role}) became non-finite at step {step}")]
    SimulationDiverged {
        body: usize,
        role: String,
        step: usize,
    },
    #[error("unknown task family `{0}`")]
    UnknownFamily(String),
    #[error("task id {id} out of range for {family} ({count} tasks)")]
    TaskOutOfRange {
        family: String,
        id: usize,
        count: usize,
    },
    #[error("action index {index} out of range (action space has {size} actions)")]
    ActionOutOfRange { index: usize, size: usize },
    #[error("invalid trajectory comparison: {0}")]
    InvalidComparison(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot select {requested} actions from {available} candidates")]
    SelectionTooLarge { requested: usize, available: usize },
    #[error("performance surface grid is too small for gradient evaluation ({0})")]
    HullTooSmall(String),
    #[error("every sampled latent vector diverged in round {0}")]
    AllSamplesDiverged(usize),
    #[error("refusing to overwrite existing file {0} (pass --force)")]
    WouldOverwrite(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
