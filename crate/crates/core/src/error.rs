use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid material: {0}")]
    Material(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("region {index} lies outside the strip: {reason}")]
    RegionOutside { index: usize, reason: String },

    #[error("invalid fault setup: {0}")]
    Fault(String),

    #[error("spectral size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("history already pushed for step {0}")]
    DoublePush(u64),

    #[error("kernel table has no entry for wavenumber {0}")]
    MissingKernel(f64),

    #[error("time step mismatch: {0}")]
    TimeStep(String),

    #[error("coupling error: {0}")]
    Coupling(String),

    #[error("non-finite value transferred across boundary {boundary} at node {node}")]
    NonFinite { boundary: usize, node: usize },

    #[error("unsupported by the boundary-integral reference solver: {0}")]
    Unsupported(String),

    #[error("instability at step {step} (t = {time:.6} s): max |v| = {max_velocity:.3e} m/s")]
    Unstable {
        step: u64,
        time: f64,
        max_velocity: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("grids are not nested: {0}")]
    NotNested(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
