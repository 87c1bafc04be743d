use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gamma = {gamma} outside the admissible interval (1, {upper}) for d = {dim}")]
    GammaOutOfRange { gamma: f64, dim: usize, upper: f64 },

    #[error("dimension must be between 1 and {max}, got {dim}")]
    InvalidDimension { dim: usize, max: usize },

    #[error("perturbation framework requires n > 2, got n = {n} (gamma = {gamma}, d = {dim})")]
    WeightUndefined { n: f64, gamma: f64, dim: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    InvalidAxis { axis: usize, dim: usize },

    #[error("unsupported stencil order {0} (expected 2 or 4)")]
    InvalidStencilOrder(usize),

    #[error("multi-index order {order} exceeds the configured maximum {max}")]
    MultiIndexTooLarge { order: usize, max: usize },

    #[error("density {rho:e} at or below the floor {floor:e} in cell {cell}")]
    DensityFloor { cell: usize, rho: f64, floor: f64 },

    #[error(
        "Gram matrix deviates from identity by {deviation:e} (tolerance {tolerance:e}); \
         velocity grid too coarse"
    )]
    GramDeviation { deviation: f64, tolerance: f64 },

    #[error(
        "state left the perturbative envelope in cell {cell}: |rho - 1| = {drho:.3e}, \
         |u| = {speed:.3e}, envelope {envelope}"
    )]
    Envelope {
        cell: usize,
        drho: f64,
        speed: f64,
        envelope: f64,
    },

    #[error("CFL violation: dt = {dt:e} exceeds the stable bound {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("discrete Maxwellian correction failed in cell {cell}: {reason}")]
    Correction { cell: usize, reason: String },

    #[error("vacuum: density {rho:e} in cell {cell}")]
    Vacuum { cell: usize, rho: f64 },

    #[error("decay fit refused: {0}")]
    Fit(String),

    #[error("snapshot decode error: {0}")]
    Snapshot(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("invalid solver configuration: {0}")]
    SolverConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Runtime aborts (envelope, CFL, vacuum, correction) as opposed to
    /// configuration or I/O failures.
    pub fn is_runtime_abort(&self) -> bool {
        matches!(
            self,
            Error::Envelope { .. }
                | Error::Cfl { .. }
                | Error::Vacuum { .. }
                | Error::DensityFloor { .. }
                | Error::Correction { .. }
        )
    }
}
