//! Gaussian-closure moment theory.
//!
//! The single-atom second moments `(<dx^2>, <dp^2>, <{x,p}>)` obey
//!
//! ```text
//! d<dx^2>/dt  = <{x,p}> / m
//! d<dp^2>/dt  = -m W^2 <{x,p}> + 2 kappa~
//! d<{x,p}>/dt = 2 <dp^2> / m - c m W^2 <dx^2>
//! W^2 = w0^2 - g1D N / (2 sqrt(pi) m <dx^2>^{3/2})
//! ```
//!
//! with `c = 4` in the published closed system and `c = 2` when the Gaussian
//! closure is substituted consistently into the exact moment equations. At
//! `g1D = 0` only `c = 2` reproduces the free oscillator.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gpe;
use crate::lattice::Lattice;
use crate::params::PhysicalParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentState {
    pub var_x: f64,
    pub var_p: f64,
    /// Anticommutator `<{x,p}>`.
    pub cov_xp: f64,
}

impl MomentState {
    /// Minimum-uncertainty Gaussian with the given position variance.
    pub fn minimum_uncertainty(var_x: f64) -> Result<Self> {
        let state = Self { var_x, var_p: 1.0 / (4.0 * var_x), cov_xp: 0.0 };
        state.check_initial()?;
        Ok(state)
    }

    pub fn check_initial(&self) -> Result<()> {
        if !(self.var_x > 0.0) || !(self.var_p > 0.0) {
            return Err(invalid("moments", format!("variances must be positive: {self:?}")));
        }
        // Robertson-Schroedinger bound with a small allowance for rounding
        let bound = 0.25 + 0.25 * self.cov_xp * self.cov_xp;
        if self.var_x * self.var_p < bound * (1.0 - 1e-12) {
            return Err(invalid("moments", format!("violates the uncertainty relation: {self:?}")));
        }
        Ok(())
    }

    fn axpy(&self, a: f64, d: &MomentState) -> MomentState {
        MomentState {
            var_x: self.var_x + a * d.var_x,
            var_p: self.var_p + a * d.var_p,
            cov_xp: self.cov_xp + a * d.cov_xp,
        }
    }
}

/// Coefficient of the restoring term in the `<{x,p}>` equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Closure {
    /// `c = 4`, as printed in the closed system.
    #[default]
    Published,
    /// `c = 2`, the consistent substitution of the closure averages.
    Consistent,
}

impl Closure {
    pub fn restoring_coefficient(self) -> f64 {
        match self {
            Closure::Published => 4.0,
            Closure::Consistent => 2.0,
        }
    }
}

/// `W^2 = w0^2 - g1D N / (2 sqrt(pi) m <dx^2>^{3/2})`; negative values are returned as-is.
pub fn effective_frequency_sq(var_x: f64, params: &PhysicalParams) -> Result<f64> {
    if !(var_x > 0.0) {
        return Err(invalid("var_x", format!("must be positive, got {var_x}")));
    }
    Ok(params.omega0 * params.omega0
        - params.interaction_strength() / (2.0 * PI.sqrt() * params.mass * var_x.powf(1.5)))
}

pub fn moment_rhs(state: &MomentState, params: &PhysicalParams, closure: Closure) -> Result<MomentState> {
    let w2 = effective_frequency_sq(state.var_x, params)?;
    let m = params.mass;
    Ok(MomentState {
        var_x: state.cov_xp / m,
        var_p: -m * w2 * state.cov_xp + 2.0 * params.kappa_tilde,
        cov_xp: 2.0 * state.var_p / m - closure.restoring_coefficient() * m * w2 * state.var_x,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    pub states: Vec<MomentState>,
}

impl MomentSeries {
    pub fn last(&self) -> MomentState {
        *self.states.last().expect("series always holds the initial state")
    }
}

/// Fourth-order Adams-Bashforth-Moulton (PECE) with a classical RK4 start.
///
/// The step is shrunk slightly so that an integer number of steps lands on `t_final`.
pub fn integrate_moments(
    initial: MomentState,
    params: &PhysicalParams,
    closure: Closure,
    t_final: f64,
    dt: f64,
) -> Result<MomentSeries> {
    if !(dt > 0.0) {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    if !(t_final > 0.0) {
        return Err(invalid("t_final", format!("must be positive, got {t_final}")));
    }
    let steps = (t_final / dt).ceil().max(1.0) as usize;
    let h = t_final / steps as f64;

    let rhs = |s: &MomentState, t: f64| -> Result<MomentState> {
        if !(s.var_x > 0.0) || !s.var_x.is_finite() {
            return Err(Error::MomentDomain { t, var_x: s.var_x });
        }
        moment_rhs(s, params, closure)
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut derivs: Vec<MomentState> = Vec::with_capacity(4);
    times.push(0.0);
    states.push(initial);
    derivs.push(rhs(&initial, 0.0)?);

    for n in 0..steps {
        let t = n as f64 * h;
        let y = states[n];
        let next = if n < 3 {
            let k1 = derivs[n];
            let k2 = rhs(&y.axpy(0.5 * h, &k1), t + 0.5 * h)?;
            let k3 = rhs(&y.axpy(0.5 * h, &k2), t + 0.5 * h)?;
            let k4 = rhs(&y.axpy(h, &k3), t + h)?;
            MomentState {
                var_x: y.var_x + h / 6.0 * (k1.var_x + 2.0 * k2.var_x + 2.0 * k3.var_x + k4.var_x),
                var_p: y.var_p + h / 6.0 * (k1.var_p + 2.0 * k2.var_p + 2.0 * k3.var_p + k4.var_p),
                cov_xp: y.cov_xp + h / 6.0 * (k1.cov_xp + 2.0 * k2.cov_xp + 2.0 * k3.cov_xp + k4.cov_xp),
            }
        } else {
            let f = |sel: fn(&MomentState) -> f64| -> [f64; 4] {
                [sel(&derivs[n]), sel(&derivs[n - 1]), sel(&derivs[n - 2]), sel(&derivs[n - 3])]
            };
            let ab = |y0: f64, f: [f64; 4]| y0 + h / 24.0 * (55.0 * f[0] - 59.0 * f[1] + 37.0 * f[2] - 9.0 * f[3]);
            let (fx, fp, fc) = (f(|s| s.var_x), f(|s| s.var_p), f(|s| s.cov_xp));
            let predicted = MomentState { var_x: ab(y.var_x, fx), var_p: ab(y.var_p, fp), cov_xp: ab(y.cov_xp, fc) };
            let fp_new = rhs(&predicted, t + h)?;
            let am = |y0: f64, fnew: f64, f: [f64; 4]| y0 + h / 24.0 * (9.0 * fnew + 19.0 * f[0] - 5.0 * f[1] + f[2]);
            MomentState {
                var_x: am(y.var_x, fp_new.var_x, fx),
                var_p: am(y.var_p, fp_new.var_p, fp),
                cov_xp: am(y.cov_xp, fp_new.cov_xp, fc),
            }
        };
        let t_next = (n + 1) as f64 * h;
        derivs.push(rhs(&next, t_next)?);
        times.push(t_next);
        states.push(next);
    }
    Ok(MomentSeries { times, states })
}

/// `eta = (sqrt(v_meas) - sqrt(v_nomeas)) / sqrt(v_meas)`.
pub fn relative_spreading(var_x_meas: f64, var_x_nomeas: f64) -> Result<f64> {
    if !(var_x_meas > 0.0) || !(var_x_nomeas > 0.0) {
        return Err(invalid("variances", format!("must be positive, got {var_x_meas} and {var_x_nomeas}")));
    }
    let (a, b) = (var_x_meas.sqrt(), var_x_nomeas.sqrt());
    Ok((a - b) / a)
}

/// Whether `g1D N < 2 sqrt(pi) m w0^2 <dx^2>^{3/2}`, the regime where the closure is trusted.
pub fn within_validity_bound(var_x: f64, params: &PhysicalParams) -> bool {
    params.interaction_strength() < 2.0 * PI.sqrt() * params.mass * params.omega0.powi(2) * var_x.powf(1.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub n_atoms: f64,
    pub dx: f64,
    /// Fixed cell count; sized from the ground state when absent.
    pub m_cells: Option<usize>,
    pub t_eval: f64,
    pub dt: f64,
    pub closure: Closure,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            n_atoms: crate::params::DEFAULT_ATOM_NUMBER,
            dx: 0.33,
            m_cells: None,
            t_eval: crate::params::QUARTER_PERIOD,
            dt: 1e-4,
            closure: Closure::Published,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaCell {
    pub g1d_n: f64,
    pub kappa_tilde: f64,
    pub initial: Option<MomentState>,
    pub var_x_meas: Option<f64>,
    pub var_x_nomeas: Option<f64>,
    pub eta: Option<f64>,
    /// False when `g1D N` exceeds the closure validity bound at `t = 0`.
    pub within_validity: bool,
    pub error: Option<String>,
}

/// Ground-state variance for a given interaction strength, on a lattice large enough to hold it.
pub fn ground_state_variance(g1d_n: f64, settings: &SweepSettings) -> Result<f64> {
    let params = PhysicalParams::from_interaction_strength(settings.n_atoms, g1d_n, 0.0)?;
    let lattice = match settings.m_cells {
        Some(m) => Lattice::new(m, settings.dx)?,
        None => Lattice::covering(
            (6.0 * (gpe::thomas_fermi_radius(g1d_n).powi(2) / 5.0).max(0.5).sqrt())
                .max(gpe::thomas_fermi_radius(g1d_n) + 4.0)
                + 1.0,
            settings.dx,
        )?,
    };
    Ok(gpe::solve_ground_state(&lattice, &params)?.variance)
}

/// Relative spreading at `t_eval` over a grid of `(g1D N, kappa~)`.
/// Cells fail independently; a failure is recorded in the cell.
pub fn eta_sweep(g_values: &[f64], kappa_values: &[f64], settings: &SweepSettings) -> Vec<EtaCell> {
    let initial: Vec<Result<MomentState>> = g_values
        .iter()
        .map(|&g| ground_state_variance(g, settings).and_then(MomentState::minimum_uncertainty))
        .collect();

    let mut jobs = Vec::new();
    for (gi, &g) in g_values.iter().enumerate() {
        for &k in kappa_values {
            jobs.push((gi, g, k));
        }
    }
    let run = |&(gi, g, k): &(usize, f64, f64)| -> EtaCell {
        let mut cell = EtaCell {
            g1d_n: g,
            kappa_tilde: k,
            initial: None,
            var_x_meas: None,
            var_x_nomeas: None,
            eta: None,
            within_validity: false,
            error: None,
        };
        let result = (|| -> Result<()> {
            let init = match &initial[gi] {
                Ok(s) => *s,
                Err(e) => return Err(invalid("ground_state", e.to_string())),
            };
            cell.initial = Some(init);
            let params = PhysicalParams::from_interaction_strength(settings.n_atoms, g, k)?;
            cell.within_validity = within_validity_bound(init.var_x, &params);
            let meas = integrate_moments(init, &params, settings.closure, settings.t_eval, settings.dt)?.last();
            let nomeas =
                integrate_moments(init, &params.with_kappa_tilde(0.0), settings.closure, settings.t_eval, settings.dt)?
                    .last();
            cell.var_x_meas = Some(meas.var_x);
            cell.var_x_nomeas = Some(nomeas.var_x);
            cell.eta = Some(relative_spreading(meas.var_x, nomeas.var_x)?);
            Ok(())
        })();
        if let Err(e) = result {
            cell.error = Some(e.to_string());
        }
        cell
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(run).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::analytic::linear_closure_moments;

    fn params(g1d_n: f64, kappa: f64) -> PhysicalParams {
        PhysicalParams::from_interaction_strength(100.0, g1d_n, kappa).unwrap()
    }

    #[test]
    fn effective_frequency_examples() {
        assert_eq!(effective_frequency_sq(0.7, &params(0.0, 0.0)).unwrap(), 1.0);
        let w2 = effective_frequency_sq(1.0, &params(2.0 * PI.sqrt(), 0.0)).unwrap();
        assert!(w2.abs() < 1e-12);
        let far = effective_frequency_sq(1e12, &params(10.0, 0.0)).unwrap();
        assert!((far - 1.0).abs() < 1e-12);
        assert!(effective_frequency_sq(0.0, &params(1.0, 0.0)).is_err());
        assert!(effective_frequency_sq(0.1, &params(10.0, 0.0)).unwrap() < 0.0);
    }

    #[test]
    fn rhs_examples() {
        let s = MomentState { var_x: 0.5, var_p: 0.5, cov_xp: 0.0 };
        let d = moment_rhs(&s, &params(0.0, 0.0), Closure::Published).unwrap();
        assert_eq!(d.var_x, 0.0);
        assert_eq!(d.var_p, 0.0);
        assert!((d.cov_xp + 1.0).abs() < 1e-15);
        let d = moment_rhs(&s, &params(0.0, 0.0), Closure::Consistent).unwrap();
        assert_eq!(d.cov_xp, 0.0);

        let s = MomentState { var_x: 1.3, var_p: 0.2, cov_xp: 0.0 };
        let d = moment_rhs(&s, &params(3.0, 5.0), Closure::Published).unwrap();
        assert!((d.var_p - 10.0).abs() < 1e-12);

        let s = MomentState { var_x: 0.9, var_p: 0.4, cov_xp: -0.37 };
        let d = moment_rhs(&s, &params(1.5, 2.0), Closure::Published).unwrap();
        assert_eq!(d.var_x, -0.37);
    }

    #[test]
    fn relative_spreading_examples() {
        assert_eq!(relative_spreading(1.7, 1.7).unwrap(), 0.0);
        assert!((relative_spreading(2.0, 1.0).unwrap() - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-15);
        assert!(relative_spreading(3.0, 1.0).unwrap() > 0.0);
        assert!(relative_spreading(0.0, 1.0).is_err());
        assert!(relative_spreading(1.0, -1.0).is_err());
    }

    #[test]
    fn integrator_matches_linear_closed_form() {
        let init = MomentState { var_x: 0.6, var_p: 0.45, cov_xp: 0.1 };
        for closure in [Closure::Published, Closure::Consistent] {
            for kappa in [0.0, 1.0, 5.0] {
                let series = integrate_moments(init, &params(0.0, kappa), closure, PI / 2.0, 1e-4).unwrap();
                for (t, s) in series.times.iter().zip(&series.states).step_by(997) {
                    let exact = linear_closure_moments(closure.restoring_coefficient(), kappa, &init, *t);
                    assert!(
                        (s.var_x - exact.var_x).abs() / exact.var_x < 1e-6,
                        "t = {t}: {} vs {}",
                        s.var_x,
                        exact.var_x
                    );
                }
            }
        }
    }

    #[test]
    fn sum_rule_without_interaction() {
        // at g = 0 both closures give d(var_x + var_p)/dt = 2 kappa~
        let init = MomentState::minimum_uncertainty(0.5).unwrap();
        for closure in [Closure::Published, Closure::Consistent] {
            for kappa in [0.0, 1.0] {
                let series = integrate_moments(init, &params(0.0, kappa), closure, 2.0, 1e-3).unwrap();
                for (t, s) in series.times.iter().zip(&series.states) {
                    let expected = 1.0 + 2.0 * kappa * t;
                    assert!((s.var_x + s.var_p - expected).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn no_measurement_gives_zero_eta() {
        let settings = SweepSettings { dt: 1e-3, ..SweepSettings::default() };
        let cells = eta_sweep(&[0.0, 2.0], &[0.0], &settings);
        for c in cells {
            assert_eq!(c.eta.unwrap(), 0.0);
        }
    }

    #[test]
    fn eta_independent_of_atom_number_without_interaction() {
        let mut settings = SweepSettings { dt: 1e-3, ..SweepSettings::default() };
        let a = eta_sweep(&[0.0], &[1.0], &settings)[0].eta.unwrap();
        settings.n_atoms = 1000.0;
        let b = eta_sweep(&[0.0], &[1.0], &settings)[0].eta.unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn collapse_is_reported_not_panicked() {
        let init = MomentState { var_x: 0.05, var_p: 5.0, cov_xp: -10.0 };
        let res = integrate_moments(init, &params(0.0, 0.0), Closure::Published, 1.0, 1e-4);
        assert!(matches!(res, Err(Error::MomentDomain { .. })));
    }

    #[test]
    fn validity_flag() {
        let p = params(20.0, 1.0);
        assert!(!within_validity_bound(0.5, &p));
        assert!(within_validity_bound(10.0, &p));
    }
}
