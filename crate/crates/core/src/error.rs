use thiserror::Error;

/// Errors raised by the sketching, solver and generator layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value at iteration {iteration}: {detail}")]
    NonFinite { iteration: usize, detail: String },

    #[error("unmeasurable: {0}")]
    Unmeasurable(String),

    #[error("exhaustive search over {supports} supports exceeds the guard (d <= {max_dim}, s <= {max_sparsity}); use the probe method")]
    GuardExceeded {
        supports: u128,
        max_dim: usize,
        max_sparsity: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dims(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
