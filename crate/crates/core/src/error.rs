use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A field or atom is too close to the box boundary for the periodic
    /// representation to stand in for the whole plane.
    #[error("margin error: {0}")]
    Margin(String),

    /// Periodic Biot-Savart requested for a field with nonzero circulation.
    #[error("circulation error: total circulation {circulation:e} exceeds {tolerance:e}")]
    Circulation { circulation: f64, tolerance: f64 },

    #[error("stability error: dt = {dt:e} exceeds the bound {bound:e}")]
    Stability { dt: f64, bound: f64 },

    /// A decay fit hit the numerical noise floor.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// The run lacks the decomposition a diagnostic needs.
    #[error("mode error: {0}")]
    Mode(String),

    /// Two runs cannot be compared.
    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("convergence failure: {0}")]
    Convergence(String),

    /// A bound the solution must satisfy was violated along a run.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Margin(_)
                | Error::Circulation { .. }
                | Error::Stability { .. }
                | Error::Degenerate(_)
                | Error::Convergence(_)
                | Error::Invariant(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
