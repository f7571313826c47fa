use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown kernel profile `{0}`")]
    UnknownProfile(String),

    #[error("kernel support [{lo}, {hi}] is not strictly inside the domain (0, {length})")]
    SupportOutOfDomain { lo: f64, hi: f64, length: f64 },

    #[error("only {nodes} grid nodes inside the kernel support, need at least {min}")]
    GridTooCoarse { nodes: usize, min: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("non-finite or exploding state at time step {step} (max |X| = {max_abs})")]
    BlowUp { step: usize, max_abs: f64 },

    #[error("degenerate denominator ({0}): diffusivity is not identifiable from this path")]
    DegenerateDenominator(String),

    #[error("spot volatility vanishes at time index {index}; the MNE is not applicable (use SMNE)")]
    ZeroSpotVol { index: usize },

    #[error("conditioning event violated for {kind}: {reason}")]
    ConditioningEvent { kind: String, reason: String },

    #[error("insufficient runs: {got} available, need at least {need}")]
    InsufficientRuns { got: usize, need: usize },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("run {run}: {source}")]
    Run { run: usize, source: Box<Error> },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag, used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnknownProfile(_) => "unknown_profile",
            Error::SupportOutOfDomain { .. } => "support_out_of_domain",
            Error::GridTooCoarse { .. } => "grid_too_coarse",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::InvalidConfig(_) => "invalid_config",
            Error::BlowUp { .. } => "blow_up",
            Error::DegenerateDenominator(_) => "degenerate_denominator",
            Error::ZeroSpotVol { .. } => "zero_spot_vol",
            Error::ConditioningEvent { .. } => "conditioning_event",
            Error::InsufficientRuns { .. } => "insufficient_runs",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Run { source, .. } => source.kind(),
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
