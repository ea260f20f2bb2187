use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = EtdfError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum EtdfError {
    #[error("stiffness/discontinuity failure: step size underflow at t = {t:.12e}")]
    StepUnderflow { t: f64 },

    #[error("integration exceeded {max_steps} steps at t = {t:.12e}")]
    TooManySteps { t: f64, max_steps: usize },

    #[error("non-finite state encountered at t = {t:.12e}")]
    NonFinite { t: f64 },

    #[error("inconsistent monodromy: det P0 = {det:.6e} is not positive")]
    InconsistentMonodromy { det: f64 },

    #[error("assignment impossible: pair is not controllable (det = {det:.6e})")]
    AssignmentImpossible { det: f64 },

    #[error("determinant obstruction: {0}")]
    DeterminantObstruction(String),

    #[error("ill-conditioned assignment: achieved spectrum {achieved:?} (max deviation {deviation:.3e})")]
    IllConditionedAssignment { achieved: Vec<Complex64>, deviation: f64 },

    #[error("section projection failed after {iterations} Newton iterations")]
    SectionProjectionFailed { iterations: usize },

    #[error("pole proximity: lambda = {lambda} is within {distance:.3e} of 1 - epsilon")]
    PoleProximity { lambda: Complex64, distance: f64 },

    #[error("parameter mu = {mu} exceeds the declared bound {bound}")]
    MuOutOfBounds { mu: Complex64, bound: f64 },

    #[error("degenerate trivial multiplier: eigenvalue 1 of P0 is not simple")]
    DegenerateTrivialMultiplier,

    #[error("degenerate normalization: denominator {0:.3e}")]
    DegenerateNormalization(f64),

    #[error("eigenvalue computation failed: {0}")]
    EigenFailure(String),

    #[error("no periodic orbit: {0}")]
    NoPeriodicOrbit(String),

    #[error("orbit not found: {0}")]
    OrbitNotFound(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("expression error: {0}")]
    Expression(String),
}
