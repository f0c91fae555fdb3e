use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("latitude {0} outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0} outside [-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error("invalid bounding box: {0}")]
    InvalidBoundingBox(String),
    #[error("geohash precision {0} outside 1..=12")]
    GeohashPrecision(usize),
    #[error("invalid geohash character {0:?}")]
    GeohashChar(char),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid strata document: {0}")]
    InvalidStrata(String),
    #[error("duplicate stratum id {0}")]
    DuplicateStratum(u64),

    #[error("invalid store configuration: {0}")]
    InvalidConfig(String),
    #[error("pairwise colocations need two distinct vehicles, got {0} twice")]
    SameVehicle(u64),

    #[error("unknown vehicle id {0}")]
    UnknownVehicle(u64),
    #[error("negative weight {weight} for cell ({stratum_id}, {interval_id})")]
    NegativeWeight {
        stratum_id: u64,
        interval_id: i64,
        weight: f64,
    },
    #[error("exhaustive search supports at most {max} vehicles, got {got}")]
    TooManyVehicles { got: usize, max: usize },

    #[error("invalid fleet spec: {0}")]
    InvalidFleet(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
