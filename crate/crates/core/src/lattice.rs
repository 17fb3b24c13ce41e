//! Spatial discretization shared by the ground-state solver and the positive-P tier.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// `M` cells of width `dx`, centered on the trap minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    m_cells: usize,
    dx: f64,
    positions: Vec<f64>,
}

impl Lattice {
    /// Cell centers `x_i = (i - (M + 1) / 2) dx`, `i = 1..=M`.
    pub fn new(m_cells: usize, dx: f64) -> Result<Self> {
        if m_cells < 2 {
            return Err(invalid("m_cells", format!("need at least 2 cells, got {m_cells}")));
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(invalid("dx", format!("must be positive, got {dx}")));
        }
        let center = (m_cells as f64 + 1.0) / 2.0;
        let mut positions: Vec<f64> = (1..=m_cells).map(|i| (i as f64 - center) * dx).collect();
        // mirror the upper half so the grid is exactly symmetric in floating point
        for i in 0..m_cells / 2 {
            positions[m_cells - 1 - i] = -positions[i];
        }
        if m_cells % 2 == 1 {
            positions[m_cells / 2] = 0.0;
        }
        Ok(Self { m_cells, dx, positions })
    }

    /// Smallest odd lattice at spacing `dx` whose outermost cell centers reach `half_width`.
    pub fn covering(half_width: f64, dx: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(invalid("half_width", format!("must be positive, got {half_width}")));
        }
        let half_cells = (half_width / dx).ceil() as usize;
        Self::new(2 * half_cells.max(1) + 1, dx)
    }

    pub fn m_cells(&self) -> usize {
        self.m_cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Distance from the trap center to the outermost cell center.
    pub fn half_width(&self) -> f64 {
        self.positions[self.m_cells - 1]
    }

    /// Index of the cell sitting on the trap center; only odd lattices have one.
    pub fn center_cell(&self) -> Option<usize> {
        (self.m_cells % 2 == 1).then_some(self.m_cells / 2)
    }

    /// Fails when `extent` (distance from the center) lies outside the grid.
    pub fn check_coverage(&self, extent: f64, what: &'static str) -> Result<()> {
        if extent > self.half_width() {
            return Err(Error::Coverage { half_width: self.half_width(), required: extent, what });
        }
        Ok(())
    }
}

/// Single-particle lattice Hamiltonian: second-difference kinetic energy plus the
/// harmonic trap, with the hopping truncated at the grid edges.
#[derive(Debug, Clone, PartialEq)]
pub struct HoppingMatrix {
    m: usize,
    entries: Vec<f64>,
}

impl HoppingMatrix {
    pub fn new(lattice: &Lattice) -> Self {
        let m = lattice.m_cells();
        let inv_dx2 = 1.0 / (lattice.dx() * lattice.dx());
        let mut entries = vec![0.0; m * m];
        for (i, &x) in lattice.positions().iter().enumerate() {
            entries[i * m + i] = inv_dx2 + 0.5 * x * x;
            if i + 1 < m {
                entries[i * m + i + 1] = -0.5 * inv_dx2;
                entries[(i + 1) * m + i] = -0.5 * inv_dx2;
            }
        }
        Self { m, entries }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    /// Row-major dense storage.
    pub fn as_dense(&self) -> &[f64] {
        &self.entries
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.get(i, i)).collect()
    }

    /// The nearest-neighbour element `-1 / (2 dx^2)`.
    pub fn hop(&self) -> f64 {
        self.get(0, 1)
    }

    /// `out = U v`, using the tridiagonal structure.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let m = self.m;
        let hop = self.hop();
        for i in 0..m {
            let mut acc = self.entries[i * m + i] * v[i];
            if i > 0 {
                acc += hop * v[i - 1];
            }
            if i + 1 < m {
                acc += hop * v[i + 1];
            }
            out[i] = acc;
        }
    }
}

pub fn build_lattice(m_cells: usize, dx: f64) -> Result<Lattice> {
    Lattice::new(m_cells, dx)
}

pub fn hopping_matrix(lattice: &Lattice) -> HoppingMatrix {
    HoppingMatrix::new(lattice)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use proptest::prelude::*;

    #[test]
    fn small_lattices_by_hand() {
        let l = Lattice::new(3, 1.0).unwrap();
        assert_eq!(l.positions(), &[-1.0, 0.0, 1.0]);
        let l = Lattice::new(4, 0.5).unwrap();
        assert_eq!(l.positions(), &[-0.75, -0.25, 0.25, 0.75]);
        let l = Lattice::new(45, 0.33).unwrap();
        assert!((l.positions()[0] + 7.26).abs() < 1e-12);
        assert!((l.positions()[44] - 7.26).abs() < 1e-12);
        assert_eq!(l.center_cell(), Some(22));
    }

    #[test]
    fn rejects_degenerate_lattices() {
        assert!(Lattice::new(1, 1.0).is_err());
        assert!(Lattice::new(10, 0.0).is_err());
        assert!(Lattice::new(10, -0.1).is_err());
        assert!(Lattice::new(10, f64::NAN).is_err());
    }

    #[test]
    fn hopping_three_cells() {
        let u = HoppingMatrix::new(&Lattice::new(3, 1.0).unwrap());
        assert_eq!(u.diagonal(), vec![1.5, 1.0, 1.5]);
        assert_eq!(u.get(0, 1), -0.5);
        assert_eq!(u.get(1, 2), -0.5);
        assert_eq!(u.get(0, 2), 0.0);
    }

    #[test]
    fn hopping_two_cells_fine_spacing() {
        let u = HoppingMatrix::new(&Lattice::new(2, 0.33).unwrap());
        let expected = 1.0 / 0.1089 + 0.5 * 0.165 * 0.165;
        assert!((u.get(0, 0) - expected).abs() < 1e-12);
        assert!((u.get(1, 1) - expected).abs() < 1e-12);
        assert!((u.get(0, 1) + 0.5 / 0.1089).abs() < 1e-12);
    }

    #[test]
    fn lowest_eigenvalue_near_half() {
        let lattice = Lattice::new(45, 0.33).unwrap();
        let u = HoppingMatrix::new(&lattice);
        let dense = DMatrix::from_row_slice(45, 45, u.as_dense());
        let eig = SymmetricEigen::new(dense);
        let lowest = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((lowest - 0.5).abs() / 0.5 < 0.02, "lowest eigenvalue {lowest}");
    }

    #[test]
    fn coverage_check() {
        let l = Lattice::new(45, 0.33).unwrap();
        assert!(l.check_coverage(7.0, "test").is_ok());
        assert!(l.check_coverage(7.5, "test").is_err());
        let c = Lattice::covering(10.0, 0.33).unwrap();
        assert!(c.half_width() >= 10.0);
        assert_eq!(c.m_cells() % 2, 1);
    }

    proptest! {
        #[test]
        fn grid_is_symmetric(m in 2usize..200, dx in 0.01f64..2.0) {
            let l = Lattice::new(m, dx).unwrap();
            let x = l.positions();
            for i in 0..m {
                prop_assert_eq!(x[i], -x[m - 1 - i]);
            }
            prop_assert!(x.iter().sum::<f64>().abs() <= 1e-12 * m as f64 * dx);
        }

        #[test]
        fn hopping_is_symmetric_tridiagonal(m in 2usize..60, dx in 0.05f64..1.5) {
            let u = HoppingMatrix::new(&Lattice::new(m, dx).unwrap());
            for i in 0..m {
                for j in 0..m {
                    prop_assert_eq!(u.get(i, j), u.get(j, i));
                    if i.abs_diff(j) > 1 {
                        prop_assert_eq!(u.get(i, j), 0.0);
                    }
                }
            }
        }
    }
}
