use thiserror::Error;

/// Errors produced by the design pipeline.
///
/// Variants split into two families: malformed input (`is_input() == true`)
/// and numerical trouble. The CLI maps them to different exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dataset contains no strata")]
    NoStrata,
    #[error("stratum `{0}` is empty")]
    EmptyStratum(String),
    #[error("stratum `{0}` has no treated units")]
    NoTreatedUnits(String),
    #[error("stratum `{0}` has no control units")]
    NoControlUnits(String),
    #[error("duplicate stratum id `{0}`")]
    DuplicateStratum(String),
    #[error("propensity out of range: {value} (must lie strictly inside (0, 1))")]
    PropensityOutOfRange { value: f64 },
    #[error("outcome must be 0 or 1, got {0}")]
    NonBinaryOutcome(f64),
    #[error("invalid stratum weight {weight} for `{stratum}`")]
    InvalidWeight { stratum: String, weight: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("budget n_r = {n_r} is too small for {strata} strata (need at least {min})")]
    BudgetTooSmall { n_r: u64, strata: usize, min: u64 },
    #[error("arm is empty")]
    EmptyArm,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("arm count must be positive (stratum index {stratum})")]
    NonPositiveArmCount { stratum: usize },
    #[error("all standard deviations are zero")]
    AllSigmasZero,
    #[error("invalid mean bounds [{lower}, {upper}]")]
    InvalidMeanBounds { lower: f64, upper: f64 },
    #[error("coordinate {value} is below the floor {floor}")]
    BelowFloor { value: f64, floor: f64 },
    #[error("need at least one point")]
    NoPoints,
    #[error("bootstrap redraws exhausted for stratum `{0}`")]
    RedrawsExhausted(String),
    #[error("projection did not converge: {0}")]
    ProjectionFailed(String),
    #[error("objective is not finite")]
    NonFiniteObjective,
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

impl Error {
    /// True for problems with user input, false for numerical failures.
    pub fn is_input(&self) -> bool {
        !matches!(
            self,
            Error::RedrawsExhausted(_) | Error::ProjectionFailed(_) | Error::NonFiniteObjective
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
