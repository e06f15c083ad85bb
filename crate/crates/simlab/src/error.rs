use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Core(#[from] jointshrink_core::Error),

    /// Invalid experiment specification or method name.
    #[error("invalid specification: {0}")]
    Spec(String),

    /// Too many trials had to be redrawn after solver failures.
    #[error("{redraws} of {trials} trials were redrawn, above the {limit:.1}% limit; last error: {last_error}")]
    RedrawLimit {
        redraws: usize,
        trials: usize,
        limit: f64,
        last_error: String,
    },
}

pub type SimResult<T> = std::result::Result<T, SimError>;
