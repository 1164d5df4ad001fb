use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("unstable regime: G+ = {g_plus} must be strictly below G- = {g_minus}")]
    Unstable { g_plus: f64, g_minus: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error(
        "grid too narrow: probability mass {mass:.3e} outside the {axis} range exceeds {limit:.1e}"
    )]
    GridTooNarrow {
        axis: &'static str,
        mass: f64,
        limit: f64,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
