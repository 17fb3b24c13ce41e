//! Stationary Gross-Pitaevskii ground state on the lattice by imaginary-time relaxation.
//!
//! The discrete stationary equation is
//!
//! ```text
//! (U phi)_i + 2 g1D phi_i^3 = mu phi_i,      sum_i phi_i^2 dx = N
//! ```
//!
//! which, with cell amplitudes `alpha_i = phi_i sqrt(dx)`, is exactly the fixed
//! point of the noiseless positive-P drift (`2 g1D / dx` on-site term).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{HoppingMatrix, Lattice};
use crate::params::PhysicalParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundState {
    /// Real, nodeless field amplitudes `phi(x_i)`, units `a0^{-1/2}`.
    pub amplitudes: Vec<f64>,
    pub chemical_potential: f64,
    /// Single-atom position variance `<dx^2>`.
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpeOptions {
    pub tau_step: f64,
    pub max_iterations: usize,
    /// Convergence threshold on the change of `mu` between checks.
    pub mu_tolerance: f64,
    /// Convergence threshold on the max-norm residual of the stationary equation.
    pub residual_tolerance: f64,
    /// Iterations between convergence checks.
    pub check_every: usize,
    /// Require the grid to hold the cloud; off only for tiny oracle lattices.
    pub enforce_coverage: bool,
}

impl Default for GpeOptions {
    fn default() -> Self {
        Self {
            tau_step: 1e-3,
            max_iterations: 2_000_000,
            mu_tolerance: 1e-10,
            residual_tolerance: 1e-8,
            check_every: 50,
            enforce_coverage: true,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct GpeReport {
    pub iterations: usize,
    pub residual: f64,
    /// Energy functional sampled at every convergence check.
    pub energy_trace: Vec<f64>,
}

pub fn solve_ground_state(lattice: &Lattice, params: &PhysicalParams) -> Result<GroundState> {
    solve_ground_state_with(lattice, params, &GpeOptions::default()).map(|(gs, _)| gs)
}

pub fn solve_ground_state_with(
    lattice: &Lattice,
    params: &PhysicalParams,
    opts: &GpeOptions,
) -> Result<(GroundState, GpeReport)> {
    params.validate()?;
    let m = lattice.m_cells();
    let dx = lattice.dx();
    let x = lattice.positions();
    let n_atoms = params.n_atoms;
    let g = params.g1d;
    let hopping = HoppingMatrix::new(lattice);

    // Gaussian start with the width of the Thomas-Fermi cloud, or the oscillator width if larger
    let tf_var = thomas_fermi_radius(params.interaction_strength()).powi(2) / 5.0;
    let start_var = tf_var.max(0.5);
    let mut phi: Vec<f64> = x.iter().map(|&xi| (-xi * xi / (4.0 * start_var)).exp()).collect();
    normalize(&mut phi, dx, n_atoms);

    let mut h_phi = vec![0.0; m];
    let mut report = GpeReport::default();
    let mut last_mu = f64::INFINITY;

    for it in 1..=opts.max_iterations {
        apply_gpe(&hopping, g, &phi, &mut h_phi);
        for (p, hp) in phi.iter_mut().zip(&h_phi) {
            *p -= opts.tau_step * hp;
        }
        symmetrize(&mut phi);
        normalize(&mut phi, dx, n_atoms);

        if it % opts.check_every == 0 {
            apply_gpe(&hopping, g, &phi, &mut h_phi);
            let mu = rayleigh(&phi, &h_phi);
            let residual = h_phi.iter().zip(&phi).map(|(hp, p)| (hp - mu * p).abs()).fold(0.0, f64::max);
            report.energy_trace.push(energy(&hopping, g, &phi, dx));
            report.iterations = it;
            report.residual = residual;
            if (mu - last_mu).abs() < opts.mu_tolerance && residual < opts.residual_tolerance {
                let gs = finish(phi, mu, x, dx, n_atoms);
                if opts.enforce_coverage {
                    check_cloud_coverage(lattice, &gs)?;
                }
                return Ok((gs, report));
            }
            last_mu = mu;
        }
    }
    Err(Error::NonConvergence { iterations: opts.max_iterations, residual: report.residual })
}

/// Atom density `n(x_i) = phi(x_i)^2`, atoms per unit length.
pub fn ground_state_density(gs: &GroundState, lattice: &Lattice) -> Vec<f64> {
    debug_assert_eq!(gs.amplitudes.len(), lattice.m_cells());
    gs.amplitudes.iter().map(|p| p * p).collect()
}

/// Thomas-Fermi radius `sqrt(2 mu_TF)` of the `2 g1D n` mean-field cloud.
pub fn thomas_fermi_radius(g1d_n: f64) -> f64 {
    (2.0 * thomas_fermi_mu(g1d_n)).sqrt()
}

/// Thomas-Fermi chemical potential for the nonlinearity `2 g1D n(x)`:
/// `n(x) = (mu - x^2/2) / (2 g1D)` normalized to `N` gives `mu = (3 g1D N)^{2/3} / 2`.
pub fn thomas_fermi_mu(g1d_n: f64) -> f64 {
    (3.0 * g1d_n).powf(2.0 / 3.0) / 2.0
}

/// Grid extent the ground state needs: six standard deviations, and the
/// Thomas-Fermi radius plus four oscillator lengths.
pub fn required_half_width(gs: &GroundState) -> f64 {
    let by_variance = 6.0 * gs.variance.sqrt();
    let by_mu = (2.0 * gs.chemical_potential.max(0.0)).sqrt() + 4.0;
    by_variance.max(by_mu)
}

fn check_cloud_coverage(lattice: &Lattice, gs: &GroundState) -> Result<()> {
    lattice.check_coverage((2.0 * gs.chemical_potential.max(0.0)).sqrt() + 4.0, "Thomas-Fermi radius plus 4 a0")
}

/// Scenario-level grid check: the lattice must also span six ground-state standard deviations.
pub fn check_scenario_coverage(lattice: &Lattice, gs: &GroundState) -> Result<()> {
    check_cloud_coverage(lattice, gs)?;
    lattice.check_coverage(6.0 * gs.variance.sqrt(), "six ground-state standard deviations")
}

/// The discrete GPE operator applied to `phi`.
pub(crate) fn apply_gpe(hopping: &HoppingMatrix, g: f64, phi: &[f64], out: &mut [f64]) {
    hopping.apply(phi, out);
    for (o, p) in out.iter_mut().zip(phi) {
        *o += 2.0 * g * p * p * p;
    }
}

/// `E = sum_ij phi_i U_ij phi_j dx + g sum_i phi_i^4 dx`.
pub fn energy(hopping: &HoppingMatrix, g: f64, phi: &[f64], dx: f64) -> f64 {
    let mut u_phi = vec![0.0; phi.len()];
    hopping.apply(phi, &mut u_phi);
    let kinetic_trap: f64 = phi.iter().zip(&u_phi).map(|(p, up)| p * up).sum();
    let interaction: f64 = phi.iter().map(|p| p.powi(4)).sum();
    (kinetic_trap + g * interaction) * dx
}

fn rayleigh(phi: &[f64], h_phi: &[f64]) -> f64 {
    let num: f64 = phi.iter().zip(h_phi).map(|(p, h)| p * h).sum();
    let den: f64 = phi.iter().map(|p| p * p).sum();
    num / den
}

fn normalize(phi: &mut [f64], dx: f64, n_atoms: f64) {
    let norm: f64 = phi.iter().map(|p| p * p).sum::<f64>() * dx;
    let scale = (n_atoms / norm).sqrt();
    phi.iter_mut().for_each(|p| *p *= scale);
}

fn symmetrize(phi: &mut [f64]) {
    let m = phi.len();
    for i in 0..m / 2 {
        let avg = 0.5 * (phi[i] + phi[m - 1 - i]);
        phi[i] = avg;
        phi[m - 1 - i] = avg;
    }
}

fn finish(mut phi: Vec<f64>, mu: f64, x: &[f64], dx: f64, n_atoms: f64) -> GroundState {
    phi.iter_mut().for_each(|p| *p = p.abs());
    normalize(&mut phi, dx, n_atoms);
    let variance = x.iter().zip(&phi).map(|(xi, p)| xi * xi * p * p).sum::<f64>() * dx / n_atoms;
    GroundState { amplitudes: phi, chemical_potential: mu, variance }
}
