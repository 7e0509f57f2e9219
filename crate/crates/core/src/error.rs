use thiserror::Error;

pub type Result<T> = std::result::Result<T, MipError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MipError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    /// A column (or the response) has zero scale under the chosen estimator.
    #[error("degenerate {}: zero scale estimate", describe_column(*.column))]
    DegenerateColumn {
        /// `None` for the response, `Some(j)` for predictor column `j` (0-based).
        column: Option<usize>,
    },

    #[error("working set shrank to {remaining} observations; at least {required} are needed")]
    DegenerateShrinkage { remaining: usize, required: usize },

    #[error("coordinate descent did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
}

fn describe_column(column: Option<usize>) -> String {
    match column {
        None => "response".to_string(),
        Some(j) => format!("predictor column {j}"),
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> MipError {
    MipError::InvalidArgument(msg.into())
}
