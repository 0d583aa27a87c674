use thiserror::Error;

/// Errors raised by the verification engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("invalid intensity: {0}")]
    InvalidIntensity(String),

    #[error("density is not finite at {point:?}: {value}")]
    NonFiniteDensity { point: Vec<f64>, value: f64 },

    #[error("density value {value} at {point:?} exceeds the rejection bound {bound}")]
    DensityBoundExceeded {
        point: Vec<f64>,
        value: f64,
        bound: f64,
    },

    #[error("quadrature needs {evaluations} evaluations, cap is {cap}; use a Monte Carlo evaluation instead")]
    QuadratureCap { evaluations: u128, cap: u64 },

    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("invalid epsilon vector: {0}")]
    InvalidEpsilon(String),

    #[error("partition size {n} is outside 1..={max}")]
    PartitionSize { n: usize, max: usize },

    #[error("epsilon is not constant on block {block:?}")]
    EpsilonNotConstant { block: Vec<usize> },

    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("sample {index} is not finite: {value}")]
    NonFiniteSample { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("simplex integration needs more than {cap} evaluations on path {path}")]
    SimplexCap { cap: u64, path: usize },

    #[error("worker pool: {0}")]
    WorkerPool(String),
}

pub type Result<T> = std::result::Result<T, Error>;
