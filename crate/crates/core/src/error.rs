use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}: cannot parse column `{column}` value `{value}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: negative NE value {value}")]
    NegativeNe { row: usize, value: i64 },

    #[error("row {row}: invalid investment value {value} for `{code}`")]
    InvalidInvestment { row: usize, code: String, value: f64 },

    #[error("row {row}: invalid month {month}")]
    InvalidMonth { row: usize, month: u32 },

    #[error("row {row}: duplicate cell for district {district} at {year}-{month:02}")]
    DuplicateCell {
        row: usize,
        district: u64,
        year: i32,
        month: u32,
    },

    #[error("non-contiguous month range: district {district} has no row for {year}-{month:02}")]
    NonContiguous { district: u64, year: i32, month: u32 },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown district {0}")]
    UnknownDistrict(u64),

    #[error("unknown investment code `{0}`")]
    UnknownCode(String),

    #[error("unknown group label `{0}`")]
    UnknownGroup(String),

    #[error("empty group {0}")]
    EmptyGroup(String),

    #[error("series too short: need at least {needed} points, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("multiplicative requires positive series (value {value} at index {index})")]
    NonPositiveSeries { index: usize, value: f64 },

    #[error("invalid span: {0}")]
    InvalidSpan(String),

    #[error("degenerate local fit at x = {0}: all weights are zero")]
    DegenerateFit(f64),

    #[error("no valid months after lag alignment")]
    NoAlignedMonths,

    #[error("empty matrix")]
    EmptyMatrix,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("column mismatch: model trained on [{expected}], got [{got}]")]
    ColumnMismatch { expected: String, got: String },

    #[error("feature importances are only available for random forests, got {0}")]
    NotAForest(String),

    #[error("panel must cover at least {needed} full years, has {months} months")]
    TooFewYears { needed: usize, months: usize },

    #[error("incomplete grid: {0}")]
    IncompleteGrid(String),

    #[error("not in results: {0}")]
    MissingResult(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
