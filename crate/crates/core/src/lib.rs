//! Dynamics of a harmonically trapped one-dimensional Bose gas whose center of
//! mass is continuously measured.
//!
//! Three tiers share one lattice and one set of physical parameters:
//!
//! * [`gpe`]: the Gross-Pitaevskii ground state that seeds every run;
//! * [`meanfield`]: Gaussian-closure equations for the single-atom moments;
//! * [`positivep`]: stochastic positive-P trajectories of the Bose-Hubbard model.
//!
//! [`observables`] turns ensemble sums into densities, widths and `g2`, and
//! [`oracle`] holds closed-form and brute-force references used by the tests.

pub mod error;
pub mod export;
pub mod gpe;
pub mod lattice;
pub mod meanfield;
pub mod observables;
pub mod oracle;
pub mod params;
pub mod positivep;

pub use error::{DivergenceError, Error, Result};
pub use lattice::{build_lattice, hopping_matrix, HoppingMatrix, Lattice};
pub use params::{PhysicalParams, DEFAULT_ATOM_NUMBER, QUARTER_PERIOD};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
