use alloc::string::String;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("rule set needs at least one player node")]
    NoPlayers,
    #[error("node count {0} is too large")]
    TooManyNodes(usize),
    #[error("node {node} out of range (n_total = {n_total})")]
    NodeOutOfRange { node: u32, n_total: usize },
    #[error("edge {edge} out of range (n_edges = {n_edges})")]
    EdgeOutOfRange { edge: u32, n_edges: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CrfError {
    #[error("score table has zero time steps")]
    Empty,
    #[error("{what}: expected {expected} values, got {actual}")]
    Shape { what: &'static str, expected: usize, actual: usize },
    #[error("path length {path} does not match table length {table}")]
    LengthMismatch { path: usize, table: usize },
    #[error("edge {0} out of range for the rule set")]
    EdgeOutOfRange(u32),
    #[error("non-finite score at {what} index {index}")]
    NonFinite { what: &'static str, index: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScorerError {
    #[error("window has {window} nodes but rules expect {rules}")]
    NodeCount { window: usize, rules: usize },
    #[error("NaN or infinite position for node {node} at step {step}")]
    NonFinitePosition { step: usize, node: usize },
    #[error("parameter {what} has length {actual}, expected {expected}")]
    Dimension { what: &'static str, expected: usize, actual: usize },
    #[error("training data is empty")]
    EmptyDataset,
    #[error("gold path for window {window} has length {gold}, window has {steps} steps")]
    GoldLength { window: usize, gold: usize, steps: usize },
    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error(transparent)]
    Crf(#[from] CrfError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabelError {
    #[error("cannot decimate {from_hz} Hz to {to_hz} Hz by an integer ratio")]
    NonIntegerRatio { from_hz: f64, to_hz: f64 },
    #[error("invalid rate {0}")]
    InvalidRate(f64),
    #[error("touch times are not strictly increasing at touch {index}")]
    TouchOrder { index: usize },
    #[error("episode has no touches")]
    NoTouches,
    #[error("first touch at step {step}, expected step 0")]
    LateFirstTouch { step: usize },
    #[error("touch {index} falls after the ball went out of play")]
    TouchAfterOut { index: usize },
    #[error("touch {index} by node {node} is not a valid actor for its kind")]
    BadActor { index: usize, node: u32 },
    #[error("touch {index} at step {step} is beyond the episode ({len} steps)")]
    TouchBeyondEpisode { index: usize, step: usize, len: usize },
    #[error("episode {0} has no frames")]
    EmptyEpisode(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("predicted path has {pred} steps, gold has {gold}")]
    LengthMismatch { pred: usize, gold: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("no events to estimate a density from")]
    NoEvents,
    #[error("pass networks are empty")]
    EmptyNetwork,
    #[error("invalid grid or bandwidth")]
    InvalidGrid,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}
