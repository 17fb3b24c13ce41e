use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::lattice::HoppingMatrix;

/// Eigendecomposition of the hopping matrix, reusable for many evolution times.
#[derive(Debug, Clone)]
pub struct SingleParticlePropagator {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SingleParticlePropagator {
    pub fn new(hopping: &HoppingMatrix) -> Self {
        let m = hopping.dim();
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(m, m, hopping.as_dense()));
        Self { eigenvalues: eig.eigenvalues.iter().copied().collect(), eigenvectors: eig.eigenvectors }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Normalized eigenvector belonging to the smallest eigenvalue.
    pub fn ground_mode(&self) -> Vec<f64> {
        let k = self.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k).unwrap();
        self.eigenvectors.column(k).iter().copied().collect()
    }

    /// `exp(-i U t) a`.
    pub fn evolve(&self, amplitudes: &[Complex64], t: f64) -> Vec<Complex64> {
        let m = self.eigenvalues.len();
        assert_eq!(amplitudes.len(), m);
        let v = &self.eigenvectors;
        let projected: Vec<Complex64> = (0..m)
            .map(|k| {
                let overlap: Complex64 = (0..m).map(|i| amplitudes[i] * v[(i, k)]).sum();
                overlap * Complex64::from_polar(1.0, -self.eigenvalues[k] * t)
            })
            .collect();
        (0..m).map(|i| (0..m).map(|k| projected[k] * v[(i, k)]).sum()).collect()
    }
}

pub fn single_particle_evolve(hopping: &HoppingMatrix, amplitudes: &[Complex64], t: f64) -> Vec<Complex64> {
    SingleParticlePropagator::new(hopping).evolve(amplitudes, t)
}
