use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Each variant maps to a stable machine-readable [`Error::tag`], which the CLI
/// prints on failure and the C interface maps to an integer code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("edge ({u}, {v}) references a node outside [0, {num_nodes})")]
    EdgeOutOfRange { u: usize, v: usize, num_nodes: usize },

    #[error("missing dataset file {0}")]
    MissingFile(PathBuf),

    #[error("count mismatch for {field}: meta.json says {expected}, files contain {found}")]
    CountMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("label {label} of node {node} is outside [0, {num_classes})")]
    LabelOutOfRange {
        node: usize,
        label: i64,
        num_classes: usize,
    },

    #[error("node {node} appears in both the {first} and {second} splits")]
    SplitOverlap {
        node: usize,
        first: &'static str,
        second: &'static str,
    },

    #[error("malformed input in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("node {0} has no incoming edges; add self-loops before attention")]
    EmptySegment(usize),

    #[error("mask selects no nodes")]
    EmptyMask,

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },

    #[error("backward requires a 1x1 loss, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },

    #[error("adaptive depth undefined: {0}; pass an explicit depth")]
    DepthDomain(String),

    #[error("fully-adjacent layer over {nodes} nodes exceeds the cap of {cap}")]
    FaTooLarge { nodes: usize, cap: usize },

    #[error("width-doubling needs {units} hidden units, above the cap of {cap}")]
    WidthTooLarge { units: usize, cap: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("gradient check requires a deterministic forward pass (dropout must be 0)")]
    Nondeterministic,

    #[error("no gradient recorded for {0}")]
    MissingGradient(String),

    #[error("run {run} failed: {source}")]
    Run {
        run: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short stable identifier, suitable for scripts parsing CLI output.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::EdgeOutOfRange { .. } => "edge_out_of_range",
            Error::MissingFile(_) => "missing_file",
            Error::CountMismatch { .. } => "count_mismatch",
            Error::LabelOutOfRange { .. } => "label_out_of_range",
            Error::SplitOverlap { .. } => "split_overlap",
            Error::Parse { .. } => "parse",
            Error::Infeasible(_) => "infeasible",
            Error::Shape { .. } => "shape",
            Error::EmptySegment(_) => "empty_segment",
            Error::EmptyMask => "empty_mask",
            Error::Unknown { .. } => "unknown",
            Error::NonScalarLoss { .. } => "non_scalar_loss",
            Error::DepthDomain(_) => "depth_domain",
            Error::FaTooLarge { .. } => "fa_too_large",
            Error::WidthTooLarge { .. } => "width_too_large",
            Error::Config(_) => "config",
            Error::Diverged { .. } => "diverged",
            Error::Nondeterministic => "nondeterministic",
            Error::MissingGradient(_) => "missing_gradient",
            Error::Run { source, .. } => source.tag(),
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}
