use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("solver did not converge after {iterations} iterations (gap {gap:.3e})")]
    Convergence {
        iterations: usize,
        gap: f64,
        /// Best iterate reached, when the caller may still want it.
        best: Option<Box<crate::bpdn::DualSolution>>,
    },

    #[error("projection did not converge: primal residual {primal:.3e}, dual residual {dual:.3e}")]
    Projection { primal: f64, dual: f64 },

    #[error("certificate undefined: {0}")]
    CertificateUndefined(String),

    #[error("size limit exceeded: {what} needs more than {limit}")]
    Size { what: &'static str, limit: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
