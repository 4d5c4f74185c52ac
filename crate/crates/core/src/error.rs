//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid distribution, class, or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// An exact solver was asked to handle an instance above its size cap.
    #[error("capacity error: {what} has size {size}, cap is {cap}")]
    Capacity {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    /// A sample contradicts the assumption that labels come from a concept
    /// of the scheme's class.
    #[error("inconsistent sample: {0}")]
    Inconsistent(String),

    /// A compression scheme produced more points than its declared size.
    #[error("scheme size violation: compression set has {size} points, bound is {bound}")]
    SchemeSize { size: usize, bound: usize },

    /// The hard-margin problem has no solution.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The hard-margin problem is solvable but numerically degenerate.
    #[error("ill-conditioned: {0}")]
    Conditioning(String),

    /// Not enough trials to resolve the requested statistic.
    #[error("precision error: {0}")]
    Precision(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
