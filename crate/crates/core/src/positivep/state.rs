use num_complex::Complex64;

use crate::gpe::GroundState;
use crate::lattice::Lattice;

/// One positive-P trajectory: complex cell amplitudes `alpha`, `beta` at time `t`.
///
/// The real `4M` vector used by the stochastic equations is laid out as
/// `(alpha', alpha'', beta', beta'')`; see [`TrajectoryState::to_real_vector`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub alpha: Vec<Complex64>,
    pub beta: Vec<Complex64>,
    pub t: f64,
}

impl TrajectoryState {
    pub fn m_cells(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha_re(&self) -> Vec<f64> {
        self.alpha.iter().map(|z| z.re).collect()
    }

    pub fn alpha_im(&self) -> Vec<f64> {
        self.alpha.iter().map(|z| z.im).collect()
    }

    pub fn beta_re(&self) -> Vec<f64> {
        self.beta.iter().map(|z| z.re).collect()
    }

    pub fn beta_im(&self) -> Vec<f64> {
        self.beta.iter().map(|z| z.im).collect()
    }

    /// Complex occupation `n_i = alpha_i beta_i`.
    pub fn occupation(&self, i: usize) -> Complex64 {
        self.alpha[i] * self.beta[i]
    }

    pub fn occupations(&self) -> Vec<Complex64> {
        self.alpha.iter().zip(&self.beta).map(|(a, b)| a * b).collect()
    }

    pub fn total_occupation(&self) -> Complex64 {
        self.alpha.iter().zip(&self.beta).map(|(a, b)| a * b).sum()
    }

    /// `max_i |beta_i - conj(alpha_i)|`, zero for a classical (coherent) trajectory.
    pub fn conjugation_defect(&self) -> f64 {
        self.alpha.iter().zip(&self.beta).map(|(a, b)| (b - a.conj()).norm()).fold(0.0, f64::max)
    }

    pub fn to_real_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(4 * self.m_cells());
        v.extend(self.alpha.iter().map(|z| z.re));
        v.extend(self.alpha.iter().map(|z| z.im));
        v.extend(self.beta.iter().map(|z| z.re));
        v.extend(self.beta.iter().map(|z| z.im));
        v
    }

    pub fn from_real_vector(v: &[f64], t: f64) -> Self {
        assert_eq!(v.len() % 4, 0, "real state length must be a multiple of 4");
        let m = v.len() / 4;
        let alpha = (0..m).map(|i| Complex64::new(v[i], v[m + i])).collect();
        let beta = (0..m).map(|i| Complex64::new(v[2 * m + i], v[3 * m + i])).collect();
        Self { alpha, beta, t }
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.iter().chain(&self.beta).all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Coherent-state start: `alpha_i = beta_i = phi(x_i) sqrt(dx)`.
pub fn init_coherent(gs: &GroundState, lattice: &Lattice) -> TrajectoryState {
    assert_eq!(gs.amplitudes.len(), lattice.m_cells(), "ground state lives on a different lattice");
    let s = lattice.dx().sqrt();
    let alpha: Vec<Complex64> = gs.amplitudes.iter().map(|&p| Complex64::new(p * s, 0.0)).collect();
    TrajectoryState { beta: alpha.iter().map(|z| z.conj()).collect(), alpha, t: 0.0 }
}
