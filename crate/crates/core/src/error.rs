use alloc::string::String;
use core::fmt;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Lengths or dimensions that must agree do not.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// An argument is outside its documented domain.
    InvalidArgument(String),
    /// A label or sensitive column has a single class where both are needed.
    SingleClass(&'static str),
    /// A column that must be binary holds some other value.
    NotBinary { column: String, value: f64 },
    /// A stratum of the split has too few rows to be divided.
    StratumTooSmall { y: u8, s: u8, rows: usize },
    /// A non-finite number appeared where finite values are required.
    NonFinite(String),
    /// Not enough samples for the requested computation.
    TooFewSamples { needed: usize, found: usize },
    /// A group needed for a summary statistic has no members.
    EmptyGroup(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch {
                what,
                expected,
                found,
            } => write!(f, "{what}: expected dimension {expected}, found {found}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::SingleClass(what) => write!(f, "{what} has a single class; both 0 and 1 are required"),
            Error::NotBinary { column, value } => {
                write!(f, "column `{column}` must be 0/1, found {value}")
            }
            Error::StratumTooSmall { y, s, rows } => {
                write!(f, "stratum (y={y}, s={s}) has {rows} row(s); at least 2 are needed to split")
            }
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::TooFewSamples { needed, found } => {
                write!(f, "need at least {needed} samples, found {found}")
            }
            Error::EmptyGroup(what) => write!(f, "group `{what}` is empty"),
        }
    }
}

impl core::error::Error for Error {}
