//! Engine-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    /// |σ(t, y)| fell below the configured floor; the drift term (r−μ)/σ
    /// would blow up.
    #[error("degenerate volatility: |sigma({t}, {y})| = {value:e} below floor {floor:e}")]
    DegenerateVolatility { t: f64, y: f64, value: f64, floor: f64 },

    #[error("unsupported partial order {order} (orders 0..=3 available)")]
    UnsupportedOrder { order: u8 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value in {what} (path {path_index})")]
    NonFinite { what: &'static str, path_index: u64 },

    /// The integration-by-parts denominator I = ∫ u G dt degenerated on a path.
    #[error("singular weight: |I| = {i_abs:e} below threshold {floor:e} (path {path_index})")]
    SingularWeight { i_abs: f64, floor: f64, path_index: u64 },

    #[error("invalid weight kernel: {0}")]
    InvalidKernel(String),

    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),

    #[error("insufficient rows: {0}")]
    InsufficientRows(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
}

impl EngineError {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        EngineError::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, EngineError>;
