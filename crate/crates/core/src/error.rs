use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("no transition path from chart `{from}` to chart `{to}`")]
    NoPath { from: String, to: String },

    #[error("point {coords:?} lies outside the overlap of `{from}` -> `{to}`")]
    OutOfOverlap {
        from: String,
        to: String,
        coords: Vec<f64>,
    },

    #[error("point {coords:?} lies outside the domain of chart `{chart}`")]
    OutOfDomain { chart: String, coords: Vec<f64> },

    #[error("unknown chart `{0}`")]
    UnknownChart(String),

    #[error("singular transition jacobian `{from}` -> `{to}` (|det| = {det:e})")]
    SingularJacobian { from: String, to: String, det: f64 },

    #[error("fields live on different charts (`{left}` vs `{right}`)")]
    ChartMismatch { left: String, right: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point is not critical: |d h_{index}| = {norm:e}")]
    NotCritical { index: usize, norm: f64 },

    #[error("eigenvalue pattern unstable across trials ({agreeing}/{trials} agree)")]
    DegenerateSpectrum { agreeing: usize, trials: usize },

    #[error("branch label {0} does not belong to the model")]
    UnknownLabel(String),

    #[error("parameter sequence must be positive and strictly decreasing")]
    SequenceInvalid,

    #[error("gluing `{name}` is not symplectic")]
    NonSymplecticMap { name: String },

    #[error("momentum g_{index} does not descend through `{gluing}` at {sample:?} (residual {residual:e})")]
    MomentumMismatch {
        gluing: String,
        index: usize,
        sample: Vec<f64>,
        residual: f64,
    },

    #[error("glued atlas failed validation: {}", failures.join("; "))]
    AtlasInvalid { failures: Vec<String> },

    #[error("elliptic factors are not supported by the cotangent construction")]
    EllipticFactorUnsupported,

    #[error("epsilon = {0} must satisfy 0 < epsilon < pi/8")]
    EpsilonOutOfRange(f64),

    #[error("state {coords:?} left the atlas from chart `{chart}`")]
    LeftAtlas { chart: String, coords: Vec<f64> },

    #[error("implicit solve did not converge after {iterations} iterations (update {update:e})")]
    NoConvergence { iterations: usize, update: f64 },

    #[error("seed {index} is off the level (residual {residual:e})")]
    SeedOffLevel { index: usize, residual: f64 },

    #[error("cannot parse model `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
