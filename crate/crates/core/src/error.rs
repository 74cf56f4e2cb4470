use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no GDP records for year {0}")]
    MissingYear(i32),
    #[error("world GDP must be positive, got {0}")]
    InvalidWorldGdp(f64),
    #[error("panel is empty after assembly")]
    EmptyPanel,

    #[error("schema error: {0}")]
    Schema(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("negative share for sector `{sector}`")]
    NegativeShare { sector: String },

    #[error("sector `{sector}` has a zero GDP share")]
    DivisionByZeroShare { sector: String },
    #[error("sector table is empty")]
    EmptyTable,
    #[error("sector `{sector}` is not in the tradability table")]
    SectorMismatch { sector: String },

    #[error("imperfect-specialization prediction is negative ({value})")]
    NegativePrediction { value: f64 },
    #[error("logarithm of nonpositive input `{name}` = {value}")]
    LogDomain { name: &'static str, value: f64 },
    #[error("predicted trade is degenerate (too few pairs or all zero)")]
    DegenerateRegressor,

    #[error("design matrix is rank deficient at column {column}")]
    SingularDesign { column: usize },
    #[error("need more observations ({n}) than parameters ({k})")]
    TooFewObservations { n: usize, k: usize },
    #[error("regressor `{name}` has no within-group variation")]
    CollinearWithinGroups { name: String },
    #[error("between regression needs more groups ({groups}) than parameters ({params})")]
    TooFewGroups { groups: usize, params: usize },
    #[error("incompatible estimation results: {0}")]
    IncompatibleResults(String),
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),
    #[error("covariance matrix is singular")]
    SingularCovariance,
    #[error("invalid distribution parameters: {0}")]
    InvalidDistribution(String),
    #[error("coefficient index {index} out of range ({len} coefficients)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
