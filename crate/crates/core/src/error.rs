use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the toolkit can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("fewer than two samples in integration window [{t_start}, {t_end}] s")]
    EmptyWindow { t_start: f64, t_end: f64 },
    #[error("timestamps not strictly increasing at sample {index}")]
    NonMonotonicTime { index: usize },
    #[error("initial capacity must be positive, got {0}")]
    NonPositiveQ0(f64),
    #[error("grid point {point} outside trajectory span [{lo}, {hi}]")]
    OutOfRangeGrid { point: f64, lo: f64, hi: f64 },
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("no rest periods found in stream")]
    UnsegmentableStream,
    #[error("expected a {expected} cycle, got {actual}")]
    WrongCycleType {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("invalid feature schema: {0}")]
    InvalidSchema(String),

    #[error("coordinate descent did not converge after {sweeps} sweeps")]
    DidNotConverge { sweeps: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid regression input: {0}")]
    InvalidRegression(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("prefix length {n} outside 1..={len}")]
    PrefixOutOfRange { n: usize, len: usize },
    #[error("classification state is empty")]
    EmptyState,
    #[error("invalid training set: {0}")]
    InvalidTrainingSet(String),

    #[error("invalid fusion weights ({w1}, {w2})")]
    InvalidWeights { w1: f64, w2: f64 },
    #[error("cycle at {ah} Ah is not later than last processed {last} Ah")]
    StaleCycle { ah: f64, last: f64 },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("ground truth must be positive, got {value} at index {index}")]
    NonPositiveTruth { index: usize, value: f64 },

    #[error("invalid fleet spec: {0}")]
    InvalidSpec(String),

    #[error("schema error in {file} row {row}: {message}")]
    SchemaError {
        file: String,
        row: usize,
        message: String,
    },
    #[error("duplicate timestamp {t_s} s for cell {cell_id} in {file} row {row}")]
    DuplicateTimestamp {
        file: String,
        row: usize,
        cell_id: String,
        t_s: f64,
    },
    #[error("no data rows in {0}")]
    EmptyFile(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least {needed} cells, got {got}")]
    TooFewCells { needed: usize, got: usize },
    #[error("unknown cell {0}")]
    UnknownCell(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Coarse category used for the CLI's error line.
    pub fn category(&self) -> &'static str {
        use Error::*;
        match self {
            EmptyWindow { .. }
            | NonMonotonicTime { .. }
            | NonPositiveQ0(_)
            | OutOfRangeGrid { .. }
            | InvalidSequence(_) => "trajectory",
            UnsegmentableStream | WrongCycleType { .. } | InvalidSchema(_) => "features",
            DidNotConverge { .. } | DimensionMismatch(_) | InvalidRegression(_) => "regression",
            GridMismatch(_) | PrefixOutOfRange { .. } | EmptyState | InvalidTrainingSet(_) => {
                "clustering"
            }
            InvalidWeights { .. } | StaleCycle { .. } => "fusion",
            LengthMismatch(..) | NonPositiveTruth { .. } => "metrics",
            InvalidSpec(_) => "synth",
            SchemaError { .. } | DuplicateTimestamp { .. } | EmptyFile(_) => "input",
            InvalidConfig(_) | TooFewCells { .. } | UnknownCell(_) => "config",
            Io(_) | Csv(_) => "io",
        }
    }
}
