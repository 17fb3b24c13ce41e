//! Positive-P trajectories of the lattice gas under collisions and collective
//! position measurement.
//!
//! Each trajectory carries cell amplitudes `alpha_i`, `beta_i`. Normally ordered
//! moments are phase-space averages of the matching products, e.g.
//! `<a_i^+ a_i> = <beta_i alpha_i>` and `<a_c^+ a_i^+ a_i a_c> = <beta_c beta_i alpha_i alpha_c>`.

mod checkpoint;
mod ensemble;
mod model;
mod rng;
mod state;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use ensemble::{run_ensemble, run_ensemble_resumable, EnsembleAccumulator, EnsembleRun, Snapshot, CHUNK_SIZE};
pub use model::{drift, noise_increment, stratonovich_drift, Model, NoiseIncrements, Workspace};
pub use rng::{trajectory_rng, TrajectoryRng};
pub use state::{init_coherent, TrajectoryState};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::gpe::{required_half_width, GroundState};
use crate::params::{PhysicalParams, QUARTER_PERIOD};

/// Time-stepping scheme for one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Iterated implicit midpoint on the Stratonovich form.
    #[default]
    SemiImplicit,
    /// Explicit Euler-Maruyama on the Ito form; reference integrator.
    EulerMaruyama,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub n_trajectories: u64,
    pub t_final: f64,
    pub seed: u64,
    pub implicit_iterations: usize,
    /// Abort when any `|n_i|` exceeds this. `None` means `1e3 N`.
    pub divergence_threshold: Option<f64>,
    pub scheme: Scheme,
    /// Sign of the measurement noise column; observables must not depend on it.
    pub measurement_sign: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            n_trajectories: 20_000,
            t_final: QUARTER_PERIOD,
            seed: 0,
            implicit_iterations: 3,
            divergence_threshold: None,
            scheme: Scheme::SemiImplicit,
            measurement_sign: 1.0,
        }
    }
}

impl SimConfig {
    pub const MAX_DT: f64 = 1e-2;
    /// Beyond this horizon positive-P runs are outside the usual secure window.
    pub const SECURE_HORIZON: f64 = std::f64::consts::PI;

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= Self::MAX_DT) {
            return Err(invalid("dt", format!("must lie in (0, {}], got {}", Self::MAX_DT, self.dt)));
        }
        if self.n_trajectories == 0 {
            return Err(invalid("n_trajectories", "must be positive"));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(invalid("t_final", format!("must be positive, got {}", self.t_final)));
        }
        if self.implicit_iterations == 0 && self.scheme == Scheme::SemiImplicit {
            return Err(invalid("implicit_iterations", "need at least one midpoint iteration"));
        }
        if let Some(th) = self.divergence_threshold {
            if !(th > 0.0) {
                return Err(invalid("divergence_threshold", format!("must be positive, got {th}")));
            }
        }
        if self.measurement_sign.abs() != 1.0 {
            return Err(invalid("measurement_sign", "must be +1 or -1"));
        }
        Ok(())
    }

    pub fn beyond_secure_window(&self) -> bool {
        self.t_final > Self::SECURE_HORIZON
    }

    /// Number of steps and the step actually used so that `t_final` is hit exactly.
    pub fn step_plan(&self) -> (usize, f64) {
        let steps = ((self.t_final / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (steps, self.t_final / steps as f64)
    }

    pub fn threshold(&self, params: &PhysicalParams) -> f64 {
        self.divergence_threshold.unwrap_or(1e3 * params.n_atoms)
    }
}

/// Grid half-width holding the ground state and five standard deviations of the
/// measured cloud at `t_final`. The spreading uses the non-interacting continuum
/// result `<dx^2>_0 + kappa~ (t - sin t cos t)`, which bounds the lattice value from above.
pub fn recommended_half_width(gs: &GroundState, kappa_tilde: f64, t_final: f64) -> f64 {
    let spread = gs.variance + kappa_tilde * (t_final - t_final.sin() * t_final.cos());
    required_half_width(gs).max(5.0 * spread.max(0.0).sqrt())
}

/// SHA-256 over the bit patterns of everything that determines a run, truncated to 64 bits.
pub fn config_hash(
    params: &PhysicalParams,
    m_cells: usize,
    dx: f64,
    config: &SimConfig,
    snapshot_times: &[f64],
) -> u64 {
    let mut h = Sha256::new();
    for v in [params.n_atoms, params.g1d, params.kappa_tilde, params.omega0, params.mass, dx] {
        h.update(v.to_bits().to_le_bytes());
    }
    h.update((m_cells as u64).to_le_bytes());
    for v in [config.dt, config.t_final, config.measurement_sign] {
        h.update(v.to_bits().to_le_bytes());
    }
    h.update(config.seed.to_le_bytes());
    h.update((config.implicit_iterations as u64).to_le_bytes());
    h.update([config.scheme as u8]);
    h.update(config.divergence_threshold.unwrap_or(-1.0).to_bits().to_le_bytes());
    for t in snapshot_times {
        h.update(t.to_bits().to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reference_run() {
        let c = SimConfig::default();
        assert_eq!(c.dt, 1e-4);
        assert_eq!(c.n_trajectories, 20_000);
        assert_eq!(c.implicit_iterations, 3);
        assert!(c.validate().is_ok());
        assert_eq!(c.step_plan().0, 15_708);
    }

    #[test]
    fn rejects_bad_config() {
        let bad = [
            SimConfig { dt: 0.02, ..Default::default() },
            SimConfig { n_trajectories: 0, ..Default::default() },
            SimConfig { measurement_sign: 0.5, ..Default::default() },
            SimConfig { divergence_threshold: Some(-1.0), ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn step_plan_hits_final_time() {
        let c = SimConfig { dt: 1e-3, t_final: 0.1, ..Default::default() };
        let (n, dt) = c.step_plan();
        assert_eq!(n, 100);
        assert!((n as f64 * dt - 0.1).abs() < 1e-15);
    }

    #[test]
    fn half_width_grows_with_measurement() {
        let gs = GroundState { amplitudes: vec![], chemical_potential: 0.5, variance: 0.5 };
        let base = recommended_half_width(&gs, 0.0, QUARTER_PERIOD);
        assert!((base - 5.0).abs() < 1e-12);
        let measured = recommended_half_width(&gs, 5.0, QUARTER_PERIOD);
        assert!((measured - 5.0 * (0.5 + 5.0 * QUARTER_PERIOD).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn hash_tracks_every_input() {
        let p = PhysicalParams::new(100.0, 0.02, 1.0).unwrap();
        let c = SimConfig::default();
        let base = config_hash(&p, 45, 0.33, &c, &[1.0]);
        assert_eq!(base, config_hash(&p, 45, 0.33, &c, &[1.0]));
        assert_ne!(base, config_hash(&p, 47, 0.33, &c, &[1.0]));
        assert_ne!(base, config_hash(&p, 45, 0.33, &SimConfig { seed: 1, ..c.clone() }, &[1.0]));
        assert_ne!(base, config_hash(&p.with_kappa_tilde(2.0), 45, 0.33, &c, &[1.0]));
        assert_ne!(base, config_hash(&p, 45, 0.33, &c, &[1.5]));
    }
}
