use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown discipline `{0}`")]
    UnknownDiscipline(String),

    #[error("no threshold configured for discipline `{0}`")]
    MissingThreshold(String),

    #[error("invalid parameters for `{discipline}` in {year}: {reason}")]
    InvalidParameter {
        discipline: String,
        year: i32,
        reason: String,
    },

    #[error("shape {xi} has no finite upper endpoint")]
    NoFiniteEndpoint { xi: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("record {record_seconds} s lies outside the support of `{discipline}` in {year}")]
    RecordOutsideSupport {
        discipline: String,
        year: i32,
        record_seconds: f64,
    },

    #[error("horizon cap {cap} reached: {detail}")]
    HorizonExceeded { cap: i32, detail: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("insufficient data for `{discipline}`: need {needed}, have {available}")]
    InsufficientData {
        discipline: String,
        needed: usize,
        available: usize,
    },

    #[error("tie at the threshold boundary for `{discipline}`: time {seconds} s spans the count boundary")]
    ThresholdTie { discipline: String, seconds: f64 },

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("bootstrap failed: {failed} of {replicates} replicate fits failed")]
    BootstrapFailure { failed: usize, replicates: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
