//! Exact one-body density matrix of the non-interacting gas under continuous
//! position measurement.
//!
//! Without collisions the reduced matrix `rho_ij = <a_j^+ a_i>` closes on itself:
//! `d rho_ij / dt = -i [U, rho]_ij - kappa~ (x_i - x_j)^2 rho_ij`. This gives
//! lattice-exact densities for arbitrary cell counts, which the Fock-space
//! oracle cannot reach.

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::lattice::{HoppingMatrix, Lattice};

#[derive(Debug, Clone, PartialEq)]
pub struct OneBodyResult {
    /// `<n_i>` per cell.
    pub occupations: Vec<f64>,
    /// `sum_i x_i^2 <n_i> / N` with `N` the total occupation.
    pub x2_mean: f64,
    pub steps: usize,
}

struct Generator {
    m: usize,
    diag: Vec<f64>,
    hop: f64,
    damping: Vec<f64>,
}

impl Generator {
    fn rhs(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let m = self.m;
        let minus_i = Complex64::new(0.0, -1.0);
        for i in 0..m {
            for j in 0..m {
                let k = i * m + j;
                let mut comm = rho[k] * (self.diag[i] - self.diag[j]);
                if i > 0 {
                    comm += rho[k - m] * self.hop;
                }
                if i + 1 < m {
                    comm += rho[k + m] * self.hop;
                }
                if j > 0 {
                    comm -= rho[k - 1] * self.hop;
                }
                if j + 1 < m {
                    comm -= rho[k + 1] * self.hop;
                }
                out[k] = minus_i * comm - rho[k] * self.damping[k];
            }
        }
    }

    fn stiffness(&self) -> f64 {
        let lo = self.diag.iter().fold(f64::INFINITY, |a, &d| a.min(d)) - 2.0 * self.hop.abs();
        let hi = self.diag.iter().fold(f64::NEG_INFINITY, |a, &d| a.max(d)) + 2.0 * self.hop.abs();
        let damp = self.damping.iter().fold(0.0f64, |a, &d| a.max(d));
        (hi - lo) + damp
    }

    fn propagate(&self, rho0: &[Complex64], t: f64, steps: usize) -> Vec<Complex64> {
        let h = t / steps as f64;
        let n = rho0.len();
        let zero = Complex64::new(0.0, 0.0);
        let mut rho = rho0.to_vec();
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
            (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
        for _ in 0..steps {
            self.rhs(&rho, &mut k1);
            for k in 0..n {
                tmp[k] = rho[k] + k1[k] * (0.5 * h);
            }
            self.rhs(&tmp, &mut k2);
            for k in 0..n {
                tmp[k] = rho[k] + k2[k] * (0.5 * h);
            }
            self.rhs(&tmp, &mut k3);
            for k in 0..n {
                tmp[k] = rho[k] + k3[k] * h;
            }
            self.rhs(&tmp, &mut k4);
            for k in 0..n {
                rho[k] += (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]) * (h / 6.0);
            }
        }
        rho
    }
}

/// Evolves the pure initial matrix `rho_ij = a_i conj(a_j)` to time `t`,
/// doubling the RK4 step count until every occupation changes by less than
/// `tolerance` relative to the total.
pub fn measured_one_body_evolve(
    lattice: &Lattice,
    kappa_tilde: f64,
    amplitudes: &[Complex64],
    t: f64,
    tolerance: f64,
) -> Result<OneBodyResult> {
    let m = lattice.m_cells();
    if amplitudes.len() != m {
        return Err(invalid("amplitudes", format!("expected {m} cells, got {}", amplitudes.len())));
    }
    if !(kappa_tilde >= 0.0) {
        return Err(invalid("kappa_tilde", format!("must be nonnegative, got {kappa_tilde}")));
    }
    if !(t >= 0.0) {
        return Err(invalid("t", format!("must be nonnegative, got {t}")));
    }
    let hopping = HoppingMatrix::new(lattice);
    let x = lattice.positions();
    let gen = Generator {
        m,
        diag: hopping.diagonal(),
        hop: hopping.hop(),
        damping: (0..m * m).map(|k| kappa_tilde * (x[k / m] - x[k % m]).powi(2)).collect(),
    };
    let rho0: Vec<Complex64> = (0..m * m).map(|k| amplitudes[k / m] * amplitudes[k % m].conj()).collect();
    let total: f64 = (0..m).map(|i| rho0[i * m + i].re).sum();
    let summarize = |rho: &[Complex64], steps: usize| {
        let occupations: Vec<f64> = (0..m).map(|i| rho[i * m + i].re).collect();
        let x2 = occupations.iter().zip(x).map(|(n, x)| n * x * x).sum::<f64>() / total;
        OneBodyResult { occupations, x2_mean: x2, steps }
    };
    if t == 0.0 {
        return Ok(summarize(&rho0, 0));
    }

    let mut steps = ((t * gen.stiffness()).ceil() as usize).max(4);
    let mut prev = summarize(&gen.propagate(&rho0, t, steps), steps);
    for _ in 0..16 {
        steps *= 2;
        let next = summarize(&gen.propagate(&rho0, t, steps), steps);
        let change = prev.occupations.iter().zip(&next.occupations).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prev = next;
        if change < tolerance * total {
            return Ok(prev);
        }
    }
    Err(invalid("one_body", "RK4 step refinement did not settle"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::single_particle_evolve;
    use crate::params::QUARTER_PERIOD;

    fn packet(lattice: &Lattice, shift: f64, norm: f64) -> Vec<Complex64> {
        let raw: Vec<f64> = lattice.positions().iter().map(|&x| (-(x - shift).powi(2) / 2.0).exp()).collect();
        let s = (raw.iter().map(|v| v * v).sum::<f64>() / norm).sqrt();
        raw.iter().map(|v| Complex64::new(v / s, 0.0)).collect()
    }

    #[test]
    fn unmeasured_evolution_matches_propagator() {
        let lattice = Lattice::new(31, 0.4).unwrap();
        let a = packet(&lattice, 1.0, 3.0);
        let r = measured_one_body_evolve(&lattice, 0.0, &a, 0.8, 1e-10).unwrap();
        let b = single_particle_evolve(&HoppingMatrix::new(&lattice), &a, 0.8);
        for (n, amp) in r.occupations.iter().zip(&b) {
            assert!((n - amp.norm_sqr()).abs() < 1e-8);
        }
    }

    #[test]
    fn measurement_conserves_number_and_widens() {
        let lattice = Lattice::new(41, 0.4).unwrap();
        let a = packet(&lattice, 0.0, 5.0);
        let free = measured_one_body_evolve(&lattice, 0.0, &a, 1.0, 1e-10).unwrap();
        let meas = measured_one_body_evolve(&lattice, 1.0, &a, 1.0, 1e-10).unwrap();
        assert!((meas.occupations.iter().sum::<f64>() - 5.0).abs() < 1e-9);
        assert!(meas.x2_mean > free.x2_mean + 0.1);
    }

    #[test]
    fn spreading_approaches_continuum_at_second_order() {
        // Continuum ground state: <x^2>(pi/2) = 1/2 + kappa~ pi/2.
        let target = 0.5 + QUARTER_PERIOD;
        let deficit = |m: usize, dx: f64| {
            let lattice = Lattice::new(m, dx).unwrap();
            let a = packet(&lattice, 0.0, 1.0);
            target - measured_one_body_evolve(&lattice, 1.0, &a, QUARTER_PERIOD, 1e-9).unwrap().x2_mean
        };
        let coarse = deficit(81, 0.2);
        let fine = deficit(161, 0.1);
        assert!(fine > 0.0 && fine < 0.03, "{fine}");
        let ratio = coarse / fine;
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }
}
