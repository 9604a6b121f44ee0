use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("no events in dataset; at least one observed event is required")]
    NoEvents,

    #[error("invalid distribution parameter: {0}")]
    Parameter(String),

    #[error("precision matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("sampler diverged after {failures} consecutive failed iterations (last at iteration {iteration}): {reason}")]
    Divergence {
        iteration: usize,
        failures: usize,
        reason: String,
    },

    #[error("fit did not converge: {0}")]
    NotConverged(String),

    #[error("information matrix is singular; null direction {direction:?}")]
    SingularInformation { direction: Vec<f64> },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
