use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("integer overflow in group arithmetic")]
    Overflow,

    #[error("element {element} does not conform to group {spec}")]
    RepresentationMismatch { spec: String, element: String },

    #[error("invalid group spec: {0}")]
    InvalidSpec(String),

    #[error("invalid generating set: {0}")]
    InvalidGenerators(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ball exceeds the memory cap of {cap} vertices")]
    MemoryCap { cap: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("cache checksum mismatch for {path}")]
    ChecksumMismatch { path: String },

    #[error("cache format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("cache key mismatch: {0}")]
    KeyMismatch(String),

    #[error("solver did not converge: residual {residual:e} after {iterations} iterations (tolerance {tol:e})")]
    NonConvergence {
        residual: f64,
        iterations: usize,
        tol: f64,
    },

    #[error("vertex {index} does not have all neighbours inside the ball")]
    NotInterior { index: usize },

    #[error("field has a non-positive value {value} at vertex {index}")]
    NonPositive { index: usize, value: f64 },

    #[error("field is not harmonic: |Lu| = {value:e} at vertex {index} exceeds {tol:e}")]
    NotHarmonic { index: usize, value: f64, tol: f64 },

    #[error("fields live on different balls")]
    MismatchedBalls,

    #[error("empty field battery")]
    EmptyBattery,

    #[error("R below R1(K): smallest Gram eigenvalue {lambda_min:e} vs largest {lambda_max:e}")]
    BelowR1 { lambda_min: f64, lambda_max: f64 },

    #[error("target vertex {0} is not covered by the image")]
    Uncovered(String),

    #[error("fiber over {target} has {size} points, more than q = {q}")]
    FiberOverflow { target: String, size: usize, q: u64 },

    #[error("W_y is empty at {0}")]
    EmptyW(String),

    #[error("map is not injective: {0}")]
    NotInjective(String),

    #[error("region not fully determined by the window: {0}")]
    UndeterminedRegion(String),

    #[error("mean-value constant undefined: the field vanishes on the ball")]
    ZeroDenominator,
}
