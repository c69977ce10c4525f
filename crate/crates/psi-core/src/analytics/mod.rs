//! Classifier scoring and time-series statistics.

mod correlation;
mod f1;
mod granger;
mod ols;
mod series;
mod special;

pub use correlation::{lagged_correlation, pearson, LagCorrelationResult, LagEntry};
pub use f1::{weighted_f1, ClassScores, EvalReport};
pub use granger::{granger_test, GrangerResult};
pub use ols::{ols, OlsFit};
pub use series::{transform_series, TimeSeries, Transform};
pub use special::{f_sf, inc_beta, ln_gamma};

use thiserror::Error;

use crate::month::YearMonth;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} observations, have {have}")]
    TooFewObservations { needed: usize, have: usize },
    #[error("zero variance")]
    ZeroVariance,
    #[error("no lag in {lag_min}..={lag_max} has {min_overlap} overlapping months")]
    NoSufficientOverlap {
        lag_min: i64,
        lag_max: i64,
        min_overlap: usize,
    },
    #[error("lag window {lag_min}..={lag_max} is empty")]
    EmptyLagWindow { lag_min: i64, lag_max: i64 },
    #[error("design matrix is rank deficient (rank {rank} of {cols})")]
    SingularDesign { rank: usize, cols: usize },
    #[error("series {series:?}: month {month} appears twice")]
    DuplicateMonth { series: String, month: YearMonth },
    #[error("series {series:?}: month {month} is out of order")]
    UnorderedMonth { series: String, month: YearMonth },
    #[error("series {series:?}: value at {month} is not finite")]
    NonFinite { series: String, month: YearMonth },
    #[error("series {series:?}: base value at {month} is zero")]
    ZeroBase { series: String, month: YearMonth },
    #[error("series file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("empty input")]
    Empty,
}
