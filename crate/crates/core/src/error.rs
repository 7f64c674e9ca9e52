use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node id {id} out of range for a network of {n} nodes")]
    NodeOutOfRange { id: usize, n: usize },

    #[error("self-exposure on node {0} is not allowed in a simple network")]
    SelfLoop(usize),

    #[error("duplicate exposure {0} -> {1} in a simple network")]
    DuplicateEdge(usize, usize),

    #[error("exposure {src} -> {dst} has non-positive or non-finite weight {weight}")]
    InvalidWeight { src: usize, dst: usize, weight: f64 },

    #[error("capital ratio of node {node} must be finite and non-negative, got {value}")]
    InvalidGamma { node: usize, value: f64 },

    #[error("recovery rate must lie in [0, 1), got {0}")]
    InvalidRecovery(f64),

    #[error("degree sequence is unbalanced: out-stubs {out_stubs}, in-stubs {in_stubs}")]
    Unbalanced { out_stubs: usize, in_stubs: usize },

    #[error("degree vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid permutation for node {node}: {reason}")]
    InvalidPermutation { node: usize, reason: String },

    #[error("node {node} has out-degree {expected} but {got} weights were supplied")]
    WeightCount { node: usize, expected: usize, got: usize },

    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("invalid limit model: {0}")]
    InvalidModel(String),

    #[error("mean degree is zero")]
    ZeroMeanDegree,

    #[error("network is supercritical (resilience {0} <= 0); first-order amplification is not valid")]
    Supercritical(f64),

    #[error("degree class ({0}, {1}) has no mass in the model")]
    UnknownClass(usize, usize),

    #[error("time {tau} outside the admissible range [0, {lambda})")]
    TimeOutOfRange { tau: f64, lambda: f64 },

    #[error("fixed-point iteration did not converge (residual {residual})")]
    NoConvergence { residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{}: {source}", path.display())]
    File {
        path: std::path::PathBuf,
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NodeOutOfRange { .. } => "node_out_of_range",
            Error::SelfLoop(_) => "self_loop",
            Error::DuplicateEdge(..) => "duplicate_edge",
            Error::InvalidWeight { .. } => "invalid_weight",
            Error::InvalidGamma { .. } => "invalid_gamma",
            Error::InvalidRecovery(_) => "invalid_recovery",
            Error::Unbalanced { .. } => "unbalanced_degrees",
            Error::LengthMismatch(..) => "length_mismatch",
            Error::InvalidPermutation { .. } => "invalid_permutation",
            Error::WeightCount { .. } => "weight_count",
            Error::ProbabilityOutOfRange(_) => "probability_out_of_range",
            Error::InvalidModel(_) => "invalid_model",
            Error::ZeroMeanDegree => "zero_mean_degree",
            Error::Supercritical(_) => "supercritical",
            Error::UnknownClass(..) => "unknown_class",
            Error::TimeOutOfRange { .. } => "time_out_of_range",
            Error::NoConvergence { .. } => "no_convergence",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Io(_) | Error::File { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
