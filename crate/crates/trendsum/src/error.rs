use thiserror::Error;

/// Errors produced by the trendsum library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("constant series: featurization undefined")]
    ConstantSeries,
    #[error("trend interval outside series")]
    IntervalOutOfRange,
    #[error("series too short to segment")]
    SeriesTooShort,
    #[error("degenerate abscissa")]
    DegenerateAbscissa,
    #[error("degenerate labels{}", .0.as_ref().map(|p| format!(" for policy {p}")).unwrap_or_default())]
    DegenerateLabels(Option<String>),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown policy id: {0}")]
    UnknownPolicy(String),
    #[error("unknown scenario id: {0}")]
    UnknownScenario(String),
    #[error("leaf policy arity mismatch: {0}")]
    ArityMismatch(String),
    #[error("undefined correlation")]
    UndefinedCorrelation,
    #[error("enumeration bound exceeded: {kprime} complex policies, limit {limit}")]
    EnumerationBound { kprime: usize, limit: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("csv parse error at line {line}: {msg}")]
    CsvParse { line: usize, msg: String },
    #[error("model/data layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
