use thiserror::Error;

/// Errors surfaced by the library.
///
/// The split matters to callers: `Domain` and `Dimension` mean the request
/// itself was malformed, `Infeasible` means a well-posed design problem has
/// no trustworthy solution, and the remaining variants report numerical
/// trouble during an otherwise valid computation.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside the mathematical domain of the operation.
    #[error("domain: {0}")]
    Domain(String),

    /// The requested design problem is ill-conditioned or inconsistent.
    #[error("infeasible design: {0}")]
    Infeasible(String),

    /// A deformation factor was evaluated at one of its poles.
    #[error("pole: {0}")]
    Pole(String),

    /// Truncated-space artifacts exceeded the active policy.
    #[error("truncation: {msg} (retry with dim >= {suggested_dim})")]
    Truncation { msg: String, suggested_dim: usize },

    /// A phase-space grid is too coarse or too small for the request.
    #[error("resolution: {msg} (suggested grid {suggested_nx} x {suggested_np})")]
    Resolution {
        msg: String,
        suggested_nx: usize,
        suggested_np: usize,
    },

    /// An iterative routine failed to reach its tolerance.
    #[error("convergence: {0}")]
    Convergence(String),

    /// Operands have incompatible shapes.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, Error>;
