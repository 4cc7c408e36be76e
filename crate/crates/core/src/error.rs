use std::fmt;

use thiserror::Error;

/// Block of the global unknown vector a degree of freedom belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DofBlock {
    Displacement,
    Temperature,
    TractionMultiplier,
    FluxMultiplier,
    AverageMultiplier,
}

impl fmt::Display for DofBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            DofBlock::Displacement => "u",
            DofBlock::Temperature => "theta",
            DofBlock::TractionMultiplier => "lambda_u",
            DofBlock::FluxMultiplier => "lambda_theta",
            DofBlock::AverageMultiplier => "average",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("inverted element {element} (J = {jacobian:.3e} at quadrature point {point})")]
    InvertedElement {
        element: usize,
        point: usize,
        jacobian: f64,
    },

    #[error("singular linear system: {reason}")]
    Singular { reason: String },

    #[error("newton did not converge in {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("newton diverged at iteration {iteration} (residual {residual:.3e})")]
    Diverged { iteration: usize, residual: f64 },

    #[error("continuation step underflow at t = {last_good_t} (step {step:.3e}): {source}")]
    StepUnderflow {
        last_good_t: f64,
        step: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("optimizer failure: {0}")]
    Optimizer(String),

    #[error("unknown boundary tag '{0}'")]
    UnknownTag(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures a smaller load step may cure.
    pub fn is_recoverable(&self) -> bool {
        matches!(
            self,
            Error::InvertedElement { .. }
                | Error::NotConverged { .. }
                | Error::Diverged { .. }
                | Error::Singular { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
