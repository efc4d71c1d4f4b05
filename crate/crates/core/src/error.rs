use thiserror::Error;

/// Errors shared by all modules.
///
/// Validation of a whole system description is *not* an error — see
/// [`crate::system::validate_system`], which reports violations as data.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural problem: unknown noise family, empty history, grid too
    /// small for the requested stencil, and the like.
    #[error("configuration error: {0}")]
    Config(String),

    /// The operation is not defined in this configuration (typically ε = 0,
    /// which only the sampling oracle supports).
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// A documented precondition does not hold (e.g. `b ≤ b_min`, cone
    /// membership out of tolerance).
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
