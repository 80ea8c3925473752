use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unstable queue: service rate {r} does not exceed mean arrival rate {lambda}")]
    Unstable { r: f64, lambda: f64 },

    #[error("operation not supported for this arrival model: {0}")]
    UnsupportedModel(&'static str),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("no admissible coding duration for delay bound {delay}")]
    EmptyAdmissibleSet { delay: u32 },

    #[error("no crossing of the delay and channel exponents for T = {duration}")]
    NoCrossing { duration: u32 },

    #[error("exponent scan reached its cap of {cap} batches without the objective turning up")]
    ScanCapReached { cap: u64 },

    #[error("non-positive batch service rNT = {0}")]
    NonPositiveService(f64),

    #[error("queue truncation at {cap} too small: {mass:e} mass above the cap")]
    CapTooSmall { cap: usize, mass: f64 },

    #[error("simulation unresolved: {0}")]
    Unresolved(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoCrossing { .. } | Error::EmptyAdmissibleSet { .. } => 3,
            Error::CapTooSmall { .. } | Error::Unresolved(_) => 4,
            _ => 2,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
