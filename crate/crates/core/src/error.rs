use thiserror::Error;

/// Errors raised by the simulator and the experiment harnesses.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("all amplitudes vanish; cannot normalize a zero vector")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("outcome {outcome} is forbidden: Born probability {born_prob:e} is zero")]
    ForbiddenOutcome { outcome: usize, born_prob: f64 },

    #[error("outcome index {outcome} out of range for {outcomes} outcomes")]
    OutcomeOutOfRange { outcome: usize, outcomes: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("invalid density operator: {0}")]
    InvalidDensity(String),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("dimension {0} exceeds the supported maximum of 8192")]
    TooLarge(usize),

    #[error("priorities are all zero")]
    AllZeroPriorities,

    #[error("invalid alternative set: {0}")]
    InvalidAlternatives(String),

    #[error("no admissible alternative")]
    NoAdmissibleAlternative,

    #[error("norm is undefined for alternative `{0}`")]
    NormUndefined(String),

    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("degenerate sequence: the top order statistics are all equal")]
    DegenerateSequence,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
