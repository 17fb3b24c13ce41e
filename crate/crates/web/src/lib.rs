//! WebAssembly bindings for the demo page in `www/`.
//!
//! Each export runs one small calculation at `N = 100` atoms and hands back
//! plain arrays for plotting. Errors come back as strings.

use cmbec::gpe::{self, ground_state_density, solve_ground_state, GroundState};
use cmbec::meanfield::{
    ground_state_variance, integrate_moments, relative_spreading, within_validity_bound, Closure, MomentState,
    SweepSettings,
};
use cmbec::observables::{density_profile, ensemble_cloud_variance, eta_from_runs, g2_curve, total_number};
use cmbec::positivep::{recommended_half_width, run_ensemble, SimConfig};
use cmbec::{Lattice, PhysicalParams, DEFAULT_ATOM_NUMBER, QUARTER_PERIOD};
use wasm_bindgen::prelude::*;

const DX: f64 = 0.33;
const PLOT_POINTS: usize = 300;
const MAX_TRAJECTORIES: u32 = 512;

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn trapped(g1d_n: f64, kappa_tilde: f64, t_final: f64) -> cmbec::Result<(Lattice, GroundState)> {
    let params = PhysicalParams::from_interaction_strength(DEFAULT_ATOM_NUMBER, g1d_n, 0.0)?;
    let provisional = Lattice::covering(gpe::thomas_fermi_radius(g1d_n).max(1.0) + 6.0, DX)?;
    let gs = solve_ground_state(&provisional, &params)?;
    let lattice = Lattice::covering(recommended_half_width(&gs, kappa_tilde, t_final), DX)?;
    let gs = solve_ground_state(&lattice, &params)?;
    Ok((lattice, gs))
}

#[wasm_bindgen]
pub struct Profile {
    x: Vec<f64>,
    density: Vec<f64>,
    chemical_potential: f64,
    variance: f64,
}

#[wasm_bindgen]
impl Profile {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn density(&self) -> Vec<f64> {
        self.density.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn chemical_potential(&self) -> f64 {
        self.chemical_potential
    }
    #[wasm_bindgen(getter)]
    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Gross-Pitaevskii ground-state density for interaction strength `g1D N`.
#[wasm_bindgen]
pub fn ground_state(g1d_n: f64) -> Result<Profile, String> {
    let (lattice, gs) = trapped(g1d_n, 0.0, 0.0).map_err(text)?;
    Ok(Profile {
        x: lattice.positions().to_vec(),
        density: ground_state_density(&gs, &lattice),
        chemical_potential: gs.chemical_potential,
        variance: gs.variance,
    })
}

#[wasm_bindgen]
pub struct Spreading {
    times: Vec<f64>,
    var_meas: Vec<f64>,
    var_nomeas: Vec<f64>,
    eta: f64,
    within_validity: bool,
}

#[wasm_bindgen]
impl Spreading {
    #[wasm_bindgen(getter)]
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn var_meas(&self) -> Vec<f64> {
        self.var_meas.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn var_nomeas(&self) -> Vec<f64> {
        self.var_nomeas.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn eta(&self) -> f64 {
        self.eta
    }
    #[wasm_bindgen(getter)]
    pub fn within_validity(&self) -> bool {
        self.within_validity
    }
}

/// Mean-field cloud width with and without measurement up to `t_final`.
#[wasm_bindgen]
pub fn meanfield_spreading(g1d_n: f64, kappa_tilde: f64, t_final: f64) -> Result<Spreading, String> {
    let settings = SweepSettings { t_eval: t_final, dt: 1e-3, ..Default::default() };
    let init =
        MomentState::minimum_uncertainty(ground_state_variance(g1d_n, &settings).map_err(text)?).map_err(text)?;
    let run = |k: f64| -> cmbec::Result<_> {
        let params = PhysicalParams::from_interaction_strength(settings.n_atoms, g1d_n, k)?;
        integrate_moments(init, &params, Closure::Published, t_final, settings.dt)
    };
    let meas = run(kappa_tilde).map_err(text)?;
    let nomeas = run(0.0).map_err(text)?;
    let eta = relative_spreading(meas.last().var_x, nomeas.last().var_x).map_err(text)?;
    let params = PhysicalParams::from_interaction_strength(settings.n_atoms, g1d_n, kappa_tilde).map_err(text)?;
    let stride = meas.times.len().div_ceil(PLOT_POINTS).max(1);
    let pick = |v: Vec<f64>| -> Vec<f64> {
        let last = v.len() - 1;
        v.iter().enumerate().filter(|(i, _)| i % stride == 0 || *i == last).map(|(_, x)| *x).collect()
    };
    Ok(Spreading {
        times: pick(meas.times.clone()),
        var_meas: pick(meas.states.iter().map(|s| s.var_x).collect()),
        var_nomeas: pick(nomeas.states.iter().map(|s| s.var_x).collect()),
        eta,
        within_validity: within_validity_bound(init.var_x, &params),
    })
}

#[wasm_bindgen]
pub struct Ensemble {
    x: Vec<f64>,
    n_meas: Vec<f64>,
    n_meas_err: Vec<f64>,
    n_nomeas: Vec<f64>,
    n_nomeas_err: Vec<f64>,
    g2: Vec<f64>,
    g2_err: Vec<f64>,
    eta: f64,
    eta_err: f64,
    total_number: f64,
}

#[wasm_bindgen]
impl Ensemble {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn n_meas(&self) -> Vec<f64> {
        self.n_meas.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn n_meas_err(&self) -> Vec<f64> {
        self.n_meas_err.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn n_nomeas(&self) -> Vec<f64> {
        self.n_nomeas.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn n_nomeas_err(&self) -> Vec<f64> {
        self.n_nomeas_err.clone()
    }
    /// `g2(x, 0)` in the measured run; `NaN` where the density is too thin to trust.
    #[wasm_bindgen(getter)]
    pub fn g2(&self) -> Vec<f64> {
        self.g2.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn g2_err(&self) -> Vec<f64> {
        self.g2_err.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn eta(&self) -> f64 {
        self.eta
    }
    #[wasm_bindgen(getter)]
    pub fn eta_err(&self) -> f64 {
        self.eta_err
    }
    #[wasm_bindgen(getter)]
    pub fn total_number(&self) -> f64 {
        self.total_number
    }
}

/// Positive-P densities at a quarter trap period with and without measurement.
#[wasm_bindgen]
pub fn positivep_quarter_period(
    g1d_n: f64,
    kappa_tilde: f64,
    trajectories: u32,
    seed: u32,
) -> Result<Ensemble, String> {
    if !(2..=MAX_TRAJECTORIES).contains(&trajectories) {
        return Err(format!("trajectories must lie in 2..={MAX_TRAJECTORIES}"));
    }
    let t = QUARTER_PERIOD;
    let (lattice, gs) = trapped(g1d_n, kappa_tilde, t).map_err(text)?;
    let cfg = SimConfig {
        dt: 1e-4,
        n_trajectories: u64::from(trajectories),
        t_final: t,
        seed: u64::from(seed),
        implicit_iterations: 4,
        ..Default::default()
    };
    let run = |k: f64, seed: u64| -> cmbec::Result<_> {
        let params = PhysicalParams::from_interaction_strength(DEFAULT_ATOM_NUMBER, g1d_n, k)?;
        let cfg = SimConfig { seed, ..cfg.clone() };
        Ok(run_ensemble(&gs, &lattice, &params, &cfg, &[t])?.snapshots.remove(0).acc)
    };
    let meas = run(kappa_tilde, cfg.seed).map_err(text)?;
    let nomeas = run(0.0, cfg.seed.wrapping_add(1)).map_err(text)?;
    let pm = density_profile(&meas, &lattice).map_err(text)?;
    let pn = density_profile(&nomeas, &lattice).map_err(text)?;
    let eta = eta_from_runs(
        ensemble_cloud_variance(&meas, DEFAULT_ATOM_NUMBER).map_err(text)?,
        ensemble_cloud_variance(&nomeas, DEFAULT_ATOM_NUMBER).map_err(text)?,
    )
    .map_err(text)?;
    let curve = g2_curve(&meas, &lattice, None).map_err(text)?;
    let masked =
        |v: &[f64]| -> Vec<f64> { v.iter().zip(&curve.valid).map(|(g, ok)| if *ok { *g } else { f64::NAN }).collect() };
    Ok(Ensemble {
        x: pm.x.clone(),
        n_meas: pm.n,
        n_meas_err: pm.stderr,
        n_nomeas: pn.n,
        n_nomeas_err: pn.stderr,
        g2: masked(&curve.g2),
        g2_err: masked(&curve.stderr),
        eta: eta.value,
        eta_err: eta.stderr,
        total_number: total_number(&meas).value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_state_holds_all_atoms() {
        let p = ground_state(4.0).unwrap();
        let total: f64 = p.density.iter().sum::<f64>() * DX;
        assert!((total - DEFAULT_ATOM_NUMBER).abs() < 1e-6 * DEFAULT_ATOM_NUMBER);
        assert!(p.chemical_potential > 0.5);
    }

    #[test]
    fn measurement_widens_the_mean_field_cloud() {
        let s = meanfield_spreading(2.0, 5.0, QUARTER_PERIOD).unwrap();
        assert!(s.eta > 0.0 && s.within_validity);
        assert_eq!(s.times.len(), s.var_meas.len());
        assert!(s.var_meas.last() > s.var_nomeas.last());
        assert!(s.times.len() <= PLOT_POINTS + 2);
    }

    #[test]
    fn small_ensemble_runs() {
        let e = positivep_quarter_period(1.0, 1.0, 8, 1).unwrap();
        assert_eq!(e.x.len(), e.n_meas.len());
        assert!(e.total_number > 90.0 && e.total_number < 110.0);
        assert!(positivep_quarter_period(1.0, 1.0, 1, 1).is_err());
    }
}
