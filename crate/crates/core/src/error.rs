use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("window outside grid: cells {start}..{end} but grid has {available}")]
    WindowOutOfRange {
        start: usize,
        end: usize,
        available: usize,
    },

    #[error("time step {dt} violates stability bound ({rate} * dt must stay below {bound})")]
    UnstableStep { dt: f64, rate: f64, bound: f64 },

    #[error("non-finite state at t = {time}: {what}")]
    NonFinite { time: f64, what: String },

    #[error("imaginary-time propagation did not converge after {iterations} steps (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("critical-pump bracket failure: scanned [{lo}, {hi}] without a sign change")]
    Bracket { lo: f64, hi: f64 },

    #[error("cavity empty at t0; correlation undefined")]
    EmptyCavity,

    #[error("series too short: {len} samples, need at least {need}")]
    SeriesTooShort { len: usize, need: usize },

    #[error("record mismatch: {0}")]
    RecordMismatch(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("cell (f_d = {fd}, omega_d/2pi = {wd_khz} kHz): {source}")]
    Cell {
        fd: f64,
        wd_khz: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{failed} of {total} trajectories failed")]
    EnsembleFailed { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical failures map to exit code 3, configuration problems to 2.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFinite { .. }
            | Error::UnstableStep { .. }
            | Error::NoConvergence { .. }
            | Error::Bracket { .. }
            | Error::EmptyCavity
            | Error::EnsembleFailed { .. } => true,
            Error::Cell { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
