use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("lattice half-width {half_width:.3} does not cover required extent {required:.3} ({what})")]
    Coverage { half_width: f64, required: f64, what: &'static str },

    #[error("ground-state solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("effective-frequency domain error at t = {t:.6}: <dx^2> = {var_x:.3e} is not positive")]
    MomentDomain { t: f64, var_x: f64 },

    #[error(transparent)]
    Divergence(#[from] DivergenceError),

    #[error("Fock truncation loses weight {loss:.3e} (limit {limit:.1e})")]
    Truncation { loss: f64, limit: f64 },

    #[error("Fock space dimension {dimension} exceeds the bound {bound}")]
    Dimension { dimension: usize, bound: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("center-cell density {density:.3e} is below the floor {floor:.3e}")]
    DensityFloor { density: f64, floor: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A positive-P trajectory left the region where the phase-space averages are trustworthy.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("trajectory {trajectory} diverged at t = {time:.6} (|n| = {magnitude:.3e} in cell {cell})")]
pub struct DivergenceError {
    pub trajectory: u64,
    pub time: f64,
    pub cell: usize,
    pub magnitude: f64,
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
