use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),

    #[error("invalid assortment: {0}")]
    InvalidAssortment(String),

    #[error("invalid market: {0}")]
    InvalidMarket(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("catalog has {n} items; column enumeration is capped at {max}")]
    TooManyItems { n: usize, max: usize },

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("numeric overflow: {0}")]
    Overflow(String),

    #[error("best-response search for seller {seller} left the price box [0, {ceiling}]")]
    SearchBoxExhausted { seller: usize, ceiling: f64 },
}
