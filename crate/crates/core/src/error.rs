use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("schema error in row {row}: {message}")]
    Schema { row: usize, message: String },

    #[error("inconsistent record in row {row}: {message}")]
    Consistency { row: usize, message: String },

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("formula error: {0}")]
    Formula(String),

    #[error("unknown variable '{0}'")]
    UnknownVariable(String),

    #[error("variable '{0}' is missing on selected rows (outside the validation subset?)")]
    MissingValues(String),

    #[error("design matrix is rank deficient: column {column} ('{name}') is linearly dependent")]
    SingularDesign { column: usize, name: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("inestimable parameters (zero denominator): {0:?}")]
    Inestimable(Vec<String>),

    #[error("parameter conversion failed: zero conditioning mass in cell {0}")]
    ZeroMass(String),

    #[error("degenerate cell in weight computation: {0}")]
    DegenerateCell(String),

    #[error("no mass in group {0}")]
    DegenerateGroup(u8),

    #[error("bootstrap degenerate: {failed} of {total} replicates failed")]
    BootstrapDegenerate { failed: usize, total: usize },

    #[error("empty validation subset")]
    EmptyValidationSubset,

    #[error("unknown scenario {0} (valid ids: 1-36)")]
    UnknownScenario(u32),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("positivity violation in cell {0}")]
    Positivity(String),
}
