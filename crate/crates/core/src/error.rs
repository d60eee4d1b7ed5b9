use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("expected {expected} values, got {actual}")]
    DataLength { expected: usize, actual: usize },
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("row {row} out of range for {rows} rows")]
    RowOutOfRange { row: usize, rows: usize },
    #[error("log of non-positive value {0}")]
    NonPositiveLog(f64),
    #[error("backward requires a 1x1 loss, got {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("{0} produced a non-finite value")]
    NonFinite(&'static str),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),
    #[error("column `{column}` is not numeric (row {row}: `{value}`)")]
    NonNumericColumn {
        column: String,
        row: usize,
        value: String,
    },
    #[error("class {class} has {count} instances, need at least {needed}")]
    ClassTooSmall {
        class: usize,
        count: usize,
        needed: usize,
    },
    #[error("class {0} has no instances")]
    EmptyClass(usize),
    #[error("split ratio must lie in (0, 1), got {0}")]
    InvalidRatio(f64),

    #[error("row {0} is not in the neighbor index")]
    UnindexedRow(usize),
    #[error("k must be in 1..={k_max}, got {k}")]
    InvalidK { k: usize, k_max: usize },

    #[error("vector dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("weights must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("aggregation needs at least one neighbor")]
    NoNeighbors,

    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("decision set has {set} entries but the sample has {sample}")]
    DecisionSetSize { set: usize, sample: usize },

    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("ranking table is empty")]
    EmptyTable,

    #[error("invalid oversampling plan: {0}")]
    InvalidPlan(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}
