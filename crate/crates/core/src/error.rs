use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row}: outcome value `{value}` is not 0/1")]
    NonBinaryOutcome { row: usize, value: String },
    #[error("row {row}: treatment value `{value}` is not 0/1")]
    NonBinaryTreatment { row: usize, value: String },
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    ParseValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("stratum y={0} is empty")]
    EmptyStratum(u8),
    #[error("2x2 table has a zero cell")]
    ZeroCell,
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),
    #[error("retrospective probability is zero at covariate cell {0}")]
    ZeroRetroProb(usize),
    #[error("overlap violated at covariate cell {0}")]
    OverlapViolation(usize),
    #[error("invalid population: {0}")]
    InvalidPopulation(String),
    #[error("basis column {0} is constant")]
    DegenerateColumn(usize),
    #[error("logistic fit: complete or quasi-complete separation detected")]
    SeparationDetected,
    #[error("logistic fit: information matrix is singular")]
    Singular,
    #[error("logistic fit did not converge after {0} iterations")]
    NotConverged(usize),
    #[error("{count} fitted nuisance probabilities outside [eps, 1-eps]")]
    NuisanceProbabilityOutOfRange { count: usize },
    #[error("all bootstrap estimates are identical")]
    BootstrapDegenerate,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable numeric code per error class, shared by the CLI exit status and
    /// the C interface.
    pub fn code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 2,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 3,
            Error::MissingColumn(_) => 10,
            Error::NonBinaryOutcome { .. } => 11,
            Error::NonBinaryTreatment { .. } => 12,
            Error::ParseValue { .. } => 13,
            Error::EmptyStratum(_) => 14,
            Error::ZeroCell => 20,
            Error::ZeroDenominator(_) => 21,
            Error::ZeroRetroProb(_) => 22,
            Error::OverlapViolation(_) => 23,
            Error::InvalidPopulation(_) => 24,
            Error::DegenerateColumn(_) => 30,
            Error::SeparationDetected => 31,
            Error::Singular => 32,
            Error::NotConverged(_) => 33,
            Error::NuisanceProbabilityOutOfRange { .. } => 34,
            Error::BootstrapDegenerate => 40,
        }
    }
}
