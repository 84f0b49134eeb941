use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// The input data or parameters are unusable.
    Data,
    /// A numerical routine failed on otherwise valid input.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    FileUnreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("column {column:?}, row {row}: cannot parse {value:?} as a number")]
    ParseFailure {
        column: String,
        row: usize,
        value: String,
    },
    #[error("input has no header or no data rows")]
    EmptyInput,
    #[error("csv: {0}")]
    Csv(String),
    #[error("table has no numeric columns")]
    NoNumericColumns,
    #[error("column {0:?} not found")]
    ColumnNotFound(String),
    #[error("column {0:?} is not categorical")]
    ColumnNotCategorical(String),
    #[error("column {0:?} is not numeric")]
    ColumnNotNumeric(String),
    #[error("column name {0:?} already exists")]
    DuplicateColumn(String),
    #[error("column {column:?}: level {level:?} was not seen when the encoding was fitted")]
    UnseenLevel { column: String, level: String },
    #[error("column {column:?} has {count} missing values")]
    MissingValues { column: String, count: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty matrix")]
    EmptyMatrix,
    #[error("need at least {needed} rows, found {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("need at least {needed} values, found {found}")]
    TooFewValues { needed: usize, found: usize },
    #[error("label column {column:?} is not binary: {detail}")]
    LabelNotBinary { column: String, detail: String },
    #[error("split ratios must sum to 1, got {0}")]
    RatioSumInvalid(f64),
    #[error("split counts sum to {found}, table has {expected} rows")]
    CountMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },
    #[error("{what} did not converge (residual {residual:e})")]
    NoConvergence { what: &'static str, residual: f64 },
    #[error("k = {k} exceeds the number of rows ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("labels describe a single cluster")]
    SingleCluster,
    #[error("need at least {needed} points, found {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("row count mismatch: expected {expected}, found {found}")]
    RowMismatch { expected: usize, found: usize },
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("class {class} has {count} samples, fewer than {folds} folds")]
    ClassTooSmall {
        class: u8,
        count: usize,
        folds: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("{p} features exceed the exact-enumeration limit of {max}")]
    TooManyFeatures { p: usize, max: usize },
    #[error("background set is empty")]
    EmptyBackground,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NotSymmetric { .. } | Error::NoConvergence { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
