//! Reported quantities from ensemble accumulators: density, cloud width,
//! relative spreading and the density-density correlation with the trap center.
//!
//! Standard errors come from the trajectory-level sample variances stored in
//! the accumulator; nonlinear estimators use first-order (delta-method) propagation.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::Lattice;
use crate::meanfield::relative_spreading;
use crate::positivep::EnsembleAccumulator;

/// A value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Self { value, stderr }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }

    /// `|self - other|` in units of the combined standard error.
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.value - reference).abs() / self.stderr
    }

    pub fn within(&self, reference: f64, n_sigma: f64) -> bool {
        (self.value - reference).abs() <= n_sigma * self.stderr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub x: Vec<f64>,
    /// Atoms per unit length.
    pub n: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `Im <n_i> / dx`, which should vanish within sampling error.
    pub n_imag: Vec<f64>,
    pub stderr_imag: Vec<f64>,
    pub dx: f64,
}

impl DensityProfile {
    pub fn total(&self) -> Estimate {
        let value = self.n.iter().sum::<f64>() * self.dx;
        let var: f64 = self.stderr.iter().map(|e| (e * self.dx).powi(2)).sum();
        Estimate::new(value, var.sqrt())
    }

    pub fn max_density(&self) -> f64 {
        self.n.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Curve {
    pub x: Vec<f64>,
    pub g2: Vec<f64>,
    pub stderr: Vec<f64>,
    pub valid: Vec<bool>,
    pub center: usize,
}

impl G2Curve {
    pub fn at_center(&self) -> Estimate {
        Estimate::new(self.g2[self.center], self.stderr[self.center])
    }
}

fn mean(sum: f64, count: f64) -> f64 {
    sum / count
}

/// Unbiased sample covariance from `sum a`, `sum b` and `sum a b`.
fn covariance(sum_a: f64, sum_b: f64, sum_ab: f64, count: f64) -> f64 {
    if count < 2.0 {
        return 0.0;
    }
    (sum_ab - sum_a * sum_b / count) / (count - 1.0)
}

fn mean_stderr(sum: f64, sum_sq: f64, count: f64) -> f64 {
    (covariance(sum, sum, sum_sq, count).max(0.0) / count).sqrt()
}

/// `n_i = Re <beta_i alpha_i> / dx`.
pub fn density_profile(acc: &EnsembleAccumulator, lattice: &Lattice) -> Result<DensityProfile> {
    if acc.count == 0 {
        return Err(invalid("accumulator", "no trajectories accumulated"));
    }
    if acc.m_cells != lattice.m_cells() {
        return Err(invalid("lattice", "cell count differs from the accumulator"));
    }
    let c = acc.count as f64;
    let dx = lattice.dx();
    let per_cell = |sum: &[f64], sq: &[f64]| -> (Vec<f64>, Vec<f64>) {
        sum.iter().zip(sq).map(|(&s, &q)| (mean(s, c) / dx, mean_stderr(s, q, c) / dx)).unzip()
    };
    let (n, stderr) = per_cell(&acc.n_re, &acc.n_re_sq);
    let (n_imag, stderr_imag) = per_cell(&acc.n_im, &acc.n_im_sq);
    Ok(DensityProfile { x: lattice.positions().to_vec(), n, stderr, n_imag, stderr_imag, dx })
}

/// `sum x^2 n dx / N - (sum x n dx / N)^2` with per-cell errors treated as independent.
pub fn cloud_variance(profile: &DensityProfile, n_atoms: f64) -> Estimate {
    let dx = profile.dx;
    let m1: f64 = profile.x.iter().zip(&profile.n).map(|(x, n)| x * n * dx).sum::<f64>() / n_atoms;
    let m2: f64 = profile.x.iter().zip(&profile.n).map(|(x, n)| x * x * n * dx).sum::<f64>() / n_atoms;
    let var: f64 =
        profile.x.iter().zip(&profile.stderr).map(|(x, e)| ((x * x - 2.0 * m1 * x) * dx / n_atoms * e).powi(2)).sum();
    Estimate::new(m2 - m1 * m1, var.sqrt())
}

/// Cloud variance with the standard error taken from trajectory-level fluctuations of
/// `S_1 = sum x_i n_i` and `S_2 = sum x_i^2 n_i`, which captures correlations between cells.
pub fn ensemble_cloud_variance(acc: &EnsembleAccumulator, n_atoms: f64) -> Result<Estimate> {
    if acc.count == 0 {
        return Err(invalid("accumulator", "no trajectories accumulated"));
    }
    let c = acc.count as f64;
    let [_, s1, s2] = acc.moments;
    let p = acc.moment_products;
    let (m1, m2) = (s1 / c / n_atoms, s2 / c / n_atoms);
    let v11 = covariance(s1, s1, p[3], c) / (n_atoms * n_atoms);
    let v12 = covariance(s1, s2, p[4], c) / (n_atoms * n_atoms);
    let v22 = covariance(s2, s2, p[5], c) / (n_atoms * n_atoms);
    // gradient of m2 - m1^2 with respect to (m1, m2)
    let g1 = -2.0 * m1;
    let var = (g1 * g1 * v11 + 2.0 * g1 * v12 + v22).max(0.0) / c;
    Ok(Estimate::new(m2 - m1 * m1, var.sqrt()))
}

/// Total atom number `sum_i Re <n_i>`.
pub fn total_number(acc: &EnsembleAccumulator) -> Estimate {
    let c = acc.count as f64;
    Estimate::new(acc.moments[0] / c, mean_stderr(acc.moments[0], acc.moment_products[0], c))
}

/// `Re <n_i>` per cell, in atoms.
pub fn cell_occupations(acc: &EnsembleAccumulator) -> Vec<Estimate> {
    let c = acc.count as f64;
    acc.n_re.iter().zip(&acc.n_re_sq).map(|(&s, &q)| Estimate::new(s / c, mean_stderr(s, q, c))).collect()
}

/// `Re <a_c^+ a_i^+ a_i a_c>` per cell, the unnormalized g2 numerator.
pub fn pair_numerators(acc: &EnsembleAccumulator) -> Vec<Estimate> {
    let c = acc.count as f64;
    acc.pair_re.iter().zip(&acc.pair_re_sq).map(|(&s, &q)| Estimate::new(s / c, mean_stderr(s, q, c))).collect()
}

/// Largest `|Im <n_i>| / |Re <n_i>|` over cells whose real part is nonzero.
pub fn max_imaginary_ratio(acc: &EnsembleAccumulator) -> f64 {
    acc.n_re.iter().zip(&acc.n_im).filter(|(re, _)| re.abs() > 0.0).map(|(re, im)| (im / re).abs()).fold(0.0, f64::max)
}

/// Default g2 mask: one thousandth of the peak density.
pub fn default_density_floor(profile: &DensityProfile) -> f64 {
    1e-3 * profile.max_density()
}

/// `g2(x_i) = <beta_c beta_i alpha_i alpha_c> / (<n_c> <n_i>)` against the central cell `c`.
pub fn g2_curve(acc: &EnsembleAccumulator, lattice: &Lattice, density_floor: Option<f64>) -> Result<G2Curve> {
    let c_cell = lattice
        .center_cell()
        .ok_or_else(|| invalid("m_cells", "g2 needs an odd number of cells so the trap center is a cell"))?;
    if acc.center != c_cell {
        return Err(invalid("accumulator", "pair sums were not taken against the central cell"));
    }
    let profile = density_profile(acc, lattice)?;
    let floor = density_floor.unwrap_or_else(|| default_density_floor(&profile));
    if !(floor > 0.0) {
        return Err(invalid("density_floor", format!("must be positive, got {floor}")));
    }
    if profile.n[c_cell] < floor {
        return Err(Error::DensityFloor { density: profile.n[c_cell], floor });
    }
    let cnt = acc.count as f64;
    let a_sum = acc.n_re[c_cell];
    let a = a_sum / cnt;
    let var_a = covariance(a_sum, a_sum, acc.n_re_sq[c_cell], cnt);
    let m = acc.m_cells;
    let (mut g2, mut stderr, mut valid) = (vec![0.0; m], vec![0.0; m], vec![false; m]);
    for i in 0..m {
        let g_sum = acc.pair_re[i];
        let g = g_sum / cnt;
        let var_g = covariance(g_sum, g_sum, acc.pair_re_sq[i], cnt);
        let cov_ga = covariance(g_sum, a_sum, acc.pair_times_center[i], cnt);
        let b_sum = acc.n_re[i];
        let b = b_sum / cnt;
        let var = if i == c_cell {
            // g2 = G / A^2
            let (dg, da) = (1.0 / (a * a), -2.0 * g / (a * a * a));
            dg * dg * var_g + 2.0 * dg * da * cov_ga + da * da * var_a
        } else {
            let var_b = covariance(b_sum, b_sum, acc.n_re_sq[i], cnt);
            let cov_gb = covariance(g_sum, b_sum, acc.pair_times_cell[i], cnt);
            let cov_ab = covariance(a_sum, b_sum, acc.center_times_cell[i], cnt);
            let (dg, da, db) = (1.0 / (a * b), -g / (a * a * b), -g / (a * b * b));
            dg * dg * var_g
                + da * da * var_a
                + db * db * var_b
                + 2.0 * (dg * da * cov_ga + dg * db * cov_gb + da * db * cov_ab)
        };
        g2[i] = g / (a * b);
        stderr[i] = (var.max(0.0) / cnt).sqrt();
        valid[i] = profile.n[i] >= floor;
    }
    Ok(G2Curve { x: lattice.positions().to_vec(), g2, stderr, valid, center: c_cell })
}

/// Relative spreading from two independent runs, with propagated error.
pub fn eta_from_runs(var_meas: Estimate, var_nomeas: Estimate) -> Result<Estimate> {
    let value = relative_spreading(var_meas.value, var_nomeas.value)?;
    // eta = 1 - sqrt(r), r = v_nomeas / v_meas
    let r = var_nomeas.value / var_meas.value;
    let rel = ((var_meas.stderr / var_meas.value).powi(2) + (var_nomeas.stderr / var_nomeas.value).powi(2)).sqrt();
    Ok(Estimate::new(value, 0.5 * r.sqrt() * rel))
}

/// `sum_i |n_a(x_i) - n_b(x_i)| dx`.
pub fn integrated_abs_difference(a: &DensityProfile, b: &DensityProfile) -> Result<f64> {
    if a.n.len() != b.n.len() || a.dx != b.dx {
        return Err(invalid("profiles", "defined on different lattices"));
    }
    Ok(a.n.iter().zip(&b.n).map(|(u, v)| (u - v).abs()).sum::<f64>() * a.dx)
}

/// Standard error of [`integrated_abs_difference`] for independent profiles,
/// treating cells as uncorrelated and each sign as resolved.
pub fn integrated_abs_difference_stderr(a: &DensityProfile, b: &DensityProfile) -> Result<f64> {
    if a.n.len() != b.n.len() || a.dx != b.dx {
        return Err(invalid("profiles", "defined on different lattices"));
    }
    let var: f64 = a.stderr.iter().zip(&b.stderr).map(|(u, v)| u * u + v * v).sum();
    Ok(var.sqrt() * a.dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::positivep::TrajectoryState;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn acc_from(states: &[TrajectoryState], lattice: &Lattice) -> EnsembleAccumulator {
        let mut acc = EnsembleAccumulator::new(lattice.m_cells(), lattice.center_cell().unwrap_or(0));
        for s in states {
            acc.add(s, lattice.positions());
        }
        acc
    }

    fn coherent(lattice: &Lattice, width: f64, n_atoms: f64) -> TrajectoryState {
        let raw: Vec<f64> = lattice.positions().iter().map(|x| (-x * x / (4.0 * width)).exp()).collect();
        let norm: f64 = raw.iter().map(|v| v * v).sum();
        let alpha: Vec<Complex64> = raw.iter().map(|v| Complex64::new(v * (n_atoms / norm).sqrt(), 0.0)).collect();
        TrajectoryState { beta: alpha.clone(), alpha, t: 0.0 }
    }

    fn noisy_states(lattice: &Lattice, count: usize, seed: u64) -> Vec<TrajectoryState> {
        let base = coherent(lattice, 1.0, 50.0);
        let mut rng = crate::positivep::trajectory_rng(seed, 0);
        (0..count)
            .map(|_| {
                let mut s = base.clone();
                for (a, b) in s.alpha.iter_mut().zip(s.beta.iter_mut()) {
                    *a *= Complex64::new(1.0 + 0.1 * rng.standard_normal(), 0.1 * rng.standard_normal());
                    *b *= Complex64::new(1.0 + 0.1 * rng.standard_normal(), 0.1 * rng.standard_normal());
                }
                s
            })
            .collect()
    }

    #[test]
    fn estimate_helpers() {
        let e = Estimate::new(1.0, 0.1);
        assert!(e.within(1.25, 3.0));
        assert!(!e.within(1.35, 3.0));
        assert!((e.z_score(1.2) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_ensemble_has_unit_g2_and_exact_density() {
        let lattice = Lattice::new(21, 0.4).unwrap();
        let s = coherent(&lattice, 0.5, 30.0);
        let acc = acc_from(&[s.clone(), s.clone(), s], &lattice);
        let curve = g2_curve(&acc, &lattice, None).unwrap();
        for (i, g) in curve.g2.iter().enumerate() {
            if curve.valid[i] {
                assert!((g - 1.0).abs() < 1e-12, "cell {i}: {g}");
                // sums of squares leave a rounding residue when every trajectory is identical
                assert!(curve.stderr[i] < 1e-6);
            }
        }
        assert!(!curve.valid[0]);
        let profile = density_profile(&acc, &lattice).unwrap();
        assert!((profile.total().value - 30.0).abs() < 1e-9);
        let v = cloud_variance(&profile, 30.0);
        assert!((v.value - 0.5).abs() < 1e-3, "{}", v.value);
        let w = ensemble_cloud_variance(&acc, 30.0).unwrap();
        assert!((w.value - v.value).abs() < 1e-12);
    }

    #[test]
    fn ground_state_like_profile_first_moment_vanishes() {
        let lattice = Lattice::new(31, 0.3).unwrap();
        let acc = acc_from(&[coherent(&lattice, 0.5, 10.0)], &lattice);
        assert!(acc.moments[1].abs() < 1e-12);
    }

    #[test]
    fn g2_requires_odd_lattice_and_center_density() {
        let even = Lattice::new(20, 0.4).unwrap();
        let acc = acc_from(&[coherent(&even, 0.5, 30.0)], &even);
        assert!(g2_curve(&acc, &even, None).is_err());

        let lattice = Lattice::new(21, 0.4).unwrap();
        let mut s = coherent(&lattice, 0.5, 30.0);
        s.alpha[10] = Complex64::new(1e-6, 0.0);
        s.beta[10] = Complex64::new(1e-6, 0.0);
        let acc = acc_from(&[s], &lattice);
        assert!(matches!(g2_curve(&acc, &lattice, None), Err(Error::DensityFloor { .. })));
        let good = acc_from(&[coherent(&lattice, 0.5, 30.0)], &lattice);
        assert!(g2_curve(&good, &lattice, Some(0.0)).is_err());
    }

    #[test]
    fn g2_error_matches_bootstrap_spread() {
        // the delta-method error should agree with the scatter of batch estimates
        let lattice = Lattice::new(11, 0.5).unwrap();
        let batches: Vec<f64> = (0..40)
            .map(|b| {
                let acc = acc_from(&noisy_states(&lattice, 200, 100 + b), &lattice);
                g2_curve(&acc, &lattice, None).unwrap().g2[7]
            })
            .collect();
        let mean = batches.iter().sum::<f64>() / 40.0;
        let sd = (batches.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 39.0).sqrt();
        let acc = acc_from(&noisy_states(&lattice, 200, 7), &lattice);
        let predicted = g2_curve(&acc, &lattice, None).unwrap().stderr[7];
        assert!(predicted > 0.6 * sd && predicted < 1.6 * sd, "{predicted} vs {sd}");
    }

    #[test]
    fn eta_error_propagation() {
        let e = eta_from_runs(Estimate::new(4.0, 0.0), Estimate::new(1.0, 0.0)).unwrap();
        assert_eq!(e.value, 0.5);
        assert_eq!(e.stderr, 0.0);
        let same = eta_from_runs(Estimate::new(2.0, 0.01), Estimate::new(2.0, 0.01)).unwrap();
        assert_eq!(same.value, 0.0);
        let h = 1e-6;
        let f = |vm: f64, vn: f64| relative_spreading(vm, vn).unwrap();
        let (vm, vn, sm, sn) = (3.0, 1.5, 0.05, 0.02);
        let dm = (f(vm + h, vn) - f(vm - h, vn)) / (2.0 * h);
        let dn = (f(vm, vn + h) - f(vm, vn - h)) / (2.0 * h);
        let want = ((dm * sm).powi(2) + (dn * sn).powi(2)).sqrt();
        let got = eta_from_runs(Estimate::new(vm, sm), Estimate::new(vn, sn)).unwrap().stderr;
        assert!((got - want).abs() < 1e-8);
        assert!(eta_from_runs(Estimate::new(0.0, 0.1), Estimate::new(1.0, 0.1)).is_err());
    }

    #[test]
    fn imaginary_ratio_of_real_ensemble_is_zero() {
        let lattice = Lattice::new(9, 0.5).unwrap();
        let acc = acc_from(&[coherent(&lattice, 0.5, 5.0)], &lattice);
        assert_eq!(max_imaginary_ratio(&acc), 0.0);
        assert!((total_number(&acc).value - 5.0).abs() < 1e-12);
    }

    #[test]
    fn per_cell_estimates_of_coherent_state() {
        let lattice = Lattice::new(9, 0.5).unwrap();
        let s = coherent(&lattice, 0.5, 5.0);
        let acc = acc_from(&[s.clone(), s.clone()], &lattice);
        let occ = cell_occupations(&acc);
        let pairs = pair_numerators(&acc);
        let nc = s.occupation(4).re;
        for i in 0..9 {
            let ni = s.occupation(i).re;
            assert!((occ[i].value - ni).abs() < 1e-12);
            assert!((pairs[i].value - nc * ni).abs() < 1e-12);
        }
        let p = density_profile(&acc, &lattice).unwrap();
        assert_eq!(integrated_abs_difference(&p, &p).unwrap(), 0.0);
        assert!(integrated_abs_difference_stderr(&p, &p).unwrap() < 1e-6);
    }

    proptest! {
        #[test]
        fn reflection_commutes_with_profile_and_variance(seed in 0u64..500) {
            let lattice = Lattice::new(9, 0.5).unwrap();
            let acc = acc_from(&noisy_states(&lattice, 20, seed), &lattice);
            let refl = acc.reflected();
            let p = density_profile(&acc, &lattice).unwrap();
            let q = density_profile(&refl, &lattice).unwrap();
            let mut rev = p.n.clone();
            rev.reverse();
            prop_assert_eq!(&q.n, &rev);
            let a = cloud_variance(&p, 50.0);
            let b = cloud_variance(&q, 50.0);
            prop_assert!((a.value - b.value).abs() < 1e-12);
            prop_assert!((a.stderr - b.stderr).abs() < 1e-12);
            let e = ensemble_cloud_variance(&acc, 50.0).unwrap();
            let f = ensemble_cloud_variance(&refl, 50.0).unwrap();
            prop_assert!((e.value - f.value).abs() < 1e-12);
            prop_assert!((e.stderr - f.stderr).abs() < 1e-12);
        }
    }
}
