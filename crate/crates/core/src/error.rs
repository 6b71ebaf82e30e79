use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid alphabet: {0}")]
    Alphabet(String),

    #[error("symbol index {symbol} out of range for alphabet of size {size}")]
    SymbolOutOfRange { symbol: usize, size: usize },

    #[error("word length {actual} does not match expected length {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("state index {index} out of range (only {count} words of length {len})")]
    IndexOutOfRange { index: usize, len: usize, count: usize },

    #[error("period {period} exceeds the enumeration cap p_max = {cap}")]
    PeriodCap { period: usize, cap: usize },

    #[error("range r = {r} gives {dim} transfer states, above the dense budget of {cap}")]
    DimensionCap { r: usize, dim: usize, cap: usize },

    #[error("invalid interaction: {0}")]
    Interaction(String),

    #[error("invalid growth function: {0}")]
    Growth(String),

    #[error("series diverges: {0}")]
    Divergent(String),

    #[error("bounds refused: {0}")]
    Refused(String),

    #[error("power iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("power iteration stagnated at residual {residual:e} after {iterations} iterations")]
    Stagnated { iterations: usize, residual: f64 },

    #[error("Hilbert distance is infinite: vectors must be strictly positive")]
    InfiniteHilbertDistance,

    #[error("matrix has a zero entry at ({row}, {col}); use a strictly positive power such as M_r^r")]
    NotPositive { row: usize, col: usize },

    #[error("zero-probability cylinder for word {0}")]
    ZeroCylinder(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dump format: {0}")]
    Dump(String),

    #[error("config: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
