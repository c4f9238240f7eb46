use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0:?} not found in data")]
    MissingColumn(String),
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("row {row}, column {column:?}: cannot parse {value:?} as a number")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("non-finite value at row {row}, column {column:?}")]
    NonFinite { row: usize, column: String },
    #[error("need more observations than predictors: n = {n}, p = {p}")]
    TooFewObservations { n: usize, p: usize },
    #[error("response is constant; cannot slice")]
    ConstantResponse,
    #[error("cannot form {h} slices from {n} observations")]
    TooManySlices { h: usize, n: usize },
    #[error("predictor covariance is numerically singular: {detail}")]
    SingularMatrix { detail: String },
    #[error("dimension {d} out of range; must satisfy {bound}")]
    DimensionOutOfRange { d: usize, bound: String },
    #[error("hypothesis has {r} columns but rank {rank}; columns must be linearly independent")]
    RankDeficientHypothesis { r: usize, rank: usize },
    #[error("hypothesis must select between 1 and p = {p} predictors, got {r}")]
    HypothesisSize { r: usize, p: usize },
    #[error("predictor index {index} out of range for p = {p}")]
    PredictorIndex { index: usize, p: usize },
    #[error("mixture weight {weight} is too negative to be rounding noise")]
    NegativeWeight { weight: f64 },
    #[error("empty data: {0}")]
    EmptyData(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
