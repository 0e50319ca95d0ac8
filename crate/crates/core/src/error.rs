use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("no sign change of J0 in the bracket for root {index}")]
    RootBracket { index: usize },

    /// The series certificate exceeds the configured cap at this time.
    #[error("uncertified regime: t = {t} is below t_min = {t_min} (truncation bound {bound:e})")]
    Uncertified { t: f64, t_min: f64, bound: f64 },

    #[error("unsupported measure: {0}")]
    UnsupportedMeasure(String),

    #[error("particle count {requested} exceeds the guard of {max}")]
    CountGuard { requested: f64, max: u64 },

    #[error("start point ({x}, {y}) lies outside the domain")]
    StartOutside { x: f64, y: f64 },

    #[error("distributions have mismatched supports ({left} vs {right})")]
    MismatchedSupport { left: usize, right: usize },

    #[error("too few observations to form two bins with expected count >= 5")]
    TooFewBins,

    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
