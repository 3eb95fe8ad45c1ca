use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad identifiers, malformed files, inconsistent settings.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Structurally invalid input (mismatched lengths, non-monotone grids).
    #[error("input error: {0}")]
    Input(String),

    /// A non-finite value surfaced during evaluation; `context` names the
    /// parameter block or grid point that produced it.
    #[error("numerical failure: non-finite value in {context}")]
    Numerical { context: String },

    /// The optimizer produced a non-finite loss.
    #[error("training diverged at iteration {iteration}")]
    TrainingDiverged { iteration: usize },

    /// The reference solver failed to meet its tolerance.
    #[error("oracle failure: {detail} (residual {residual:e})")]
    Oracle { detail: String, residual: f64 },

    /// The problem violates an assumption of the requested solver.
    #[error("unsupported problem: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
