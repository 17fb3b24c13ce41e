//! Independent references for the solver tiers.

pub mod analytic;
pub mod master;
pub mod one_body;
pub mod single_particle;

pub use analytic::{analytic_moments_noninteracting, linear_closure_moments};
pub use master::{master_equation_evolve, FockConfig, MasterExpectations, MasterOptions, MasterSystem};
pub use one_body::{measured_one_body_evolve, OneBodyResult};
pub use single_particle::{single_particle_evolve, SingleParticlePropagator};
