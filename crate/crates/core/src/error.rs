use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("left the admissible cone: h = {h:e} at t = {t}")]
    ConeViolation { t: f64, h: f64 },

    #[error("energy drift {drift:e} exceeds budget {budget:e}")]
    ToleranceNotMet { drift: f64, budget: f64 },

    #[error("fewer than two minima of v in the integrated range")]
    PeriodNotFound,

    #[error("conformal factor is not positive at sample {index} (u = {value:e})")]
    NonPositiveFactor { index: usize, value: f64 },

    #[error("|a||x| = {0} is outside the Taylor domain")]
    OutOfDomain(f64),

    #[error("orbit argument t = {t} outside the integrated range [{lo}, {hi}]")]
    OrbitRangeExceeded { t: f64, lo: f64, hi: f64 },

    #[error("operation requires a = 0")]
    NotRadial,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("calibrated constant varies by {spread:e} along t")]
    CalibrationUnstable { spread: f64 },

    #[error("singular linear system (pivot {pivot:e} at row {row})")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("Neumann series increments grew for {0} consecutive terms")]
    SeriesDiverged(usize),

    #[error("interior extension needs high-frequency data, got degree {0}")]
    LowFrequencyInput(usize),

    #[error("exterior extension needs data orthogonal to constants")]
    ConstantModePresent,

    #[error("boundary datum norm {norm:e} exceeds {bound:e}")]
    RangeViolation { norm: f64, bound: f64 },

    #[error("iterate left the admissible domain: {0}")]
    OutsideDomain(String),

    #[error("fixed-point iteration is not contracting (Lipschitz estimate {0})")]
    ContractionFailed(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
