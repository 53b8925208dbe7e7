use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid too small: {n} points (need at least {min})")]
    GridTooSmall { n: usize, min: usize },

    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },

    #[error("density is negative or corrupt at node {index} (value {value:e})")]
    CorruptDensity { index: usize, value: f64 },

    #[error("density cannot be normalized (total mass {mass:e})")]
    NonNormalizable { mass: f64 },

    #[error("time derivative needs neighbouring slices around index {index}")]
    MissingTimeNeighbor { index: usize },

    #[error("interval [{a}, {b}] is not inside the grid [{x_min}, {x_max}]")]
    IntervalOutsideGrid { a: f64, b: f64, x_min: f64, x_max: f64 },

    #[error("drift is not a gradient field: b/2D and grad(phi) differ by {mismatch:e}")]
    NotGradientDrift { mismatch: f64 },

    #[error("this scenario needs gamma > 0; use the free recoil solution for gamma = 0")]
    WrongScenario,

    #[error("particle {particle} left the tabulated drift domain at x = {x}, t = {t}")]
    DriftOutOfDomain { particle: usize, x: f64, t: f64 },

    #[error("drift table covers t in [{t_min}, {t_max}], requested t = {t}")]
    DriftHorizon { t: f64, t_min: f64, t_max: f64 },

    #[error("not enough samples: {got} (need at least {min})")]
    TooFewSamples { got: usize, min: usize },

    #[error("solver produced a non-finite value at step {step}")]
    StabilityViolation { step: usize },

    #[error("negative density {value:e} at node {index} after step {step}")]
    NegativeDensity { step: usize, index: usize, value: f64 },

    #[error("initial state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("potential is not bounded below on the grid (node {index})")]
    PotentialUnbounded { index: usize },

    #[error(
        "density reached the domain edge at t = {t} (edge/peak = {ratio:e}); widen the domain"
    )]
    BoundaryReached { t: f64, ratio: f64 },

    #[error("phase step {step:.3} rad between nodes {index} and {next} is under-resolved", next = index + 1)]
    PhaseUnderResolved { index: usize, step: f64 },

    #[error("singular tridiagonal system at row {row}")]
    SingularSystem { row: usize },

    #[error("series too short: {reason}")]
    SeriesTooShort { reason: String },

    #[error("ambiguous dispersion exponent {exponent:.4} (matches no regime)")]
    AmbiguousDispersion { exponent: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
