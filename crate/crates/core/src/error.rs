//! Error types shared across the crate.

use thiserror::Error;

/// Errors from graph construction and graph statistics.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum GraphError {
    #[error("node index {index} out of range for graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("edge ({src}, {dst}) has negative weight {weight}")]
    NegativeWeight { src: usize, dst: usize, weight: f64 },
    #[error("duplicate edge ({src}, {dst})")]
    DuplicateEdge { src: usize, dst: usize },
    #[error("graph must have at least {min} nodes, got {n}")]
    TooFewNodes { n: usize, min: usize },
    #[error("weight matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("reciprocity is undefined on an edgeless graph")]
    EdgelessGraph,
    #[error("threshold must be nonnegative, got {0}")]
    NegativeThreshold(f64),
}

/// Errors from dataset generation.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum SynthError {
    #[error("scale-free generation needs at least 3 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("pair count must be at least 2, got {0}")]
    TooFewPairs(usize),
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    BadTrainFraction(f64),
    #[error("parameter {name} must be positive, got {value}")]
    BadParameter { name: &'static str, value: f64 },
}

/// Errors from authentication-log parsing and graph building.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum AuthError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("window length must be positive")]
    BadWindow,
}

/// Errors from layer and model evaluation.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("noise length {got} does not match noise_dim*n = {expected}")]
    NoiseLength { got: usize, expected: usize },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

/// Errors from the training loop.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum TrainError {
    #[error("train split is empty")]
    EmptyTrainSplit,
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Errors from evaluation pipelines.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum EvalError {
    #[error("need at least {min} test pairs, got {got}")]
    TooFewTestPairs { got: usize, min: usize },
    #[error("scores and labels must have equal nonzero length")]
    BadScoreInput,
    #[error("classification metrics need both a positive and a negative label")]
    SingleClassLabels,
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Errors from metric computation.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum MetricsError {
    #[error("graph collections must be nonempty")]
    EmptyCollection,
    #[error("collections must have equal length, got {left} and {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("edge-increasing ratio is undefined for an edgeless input graph")]
    EdgelessInput,
}
