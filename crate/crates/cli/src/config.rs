//! Scenario files. Every field has a default, so an empty file reproduces the
//! reference setup; command-line flags override file values.

use std::path::{Path, PathBuf};

use cmbec::meanfield::Closure;
use cmbec::positivep::SimConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Gpe,
    Meanfield,
    Positivep,
    Compare,
    OracleCheck,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Gpe => "gpe",
            Mode::Meanfield => "meanfield",
            Mode::Positivep => "positivep",
            Mode::Compare => "compare",
            Mode::OracleCheck => "oracle-check",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    /// Must match the subcommand when given.
    pub mode: Option<Mode>,
    pub out_dir: PathBuf,
    pub n_atoms: f64,
    pub lattice: LatticeSpec,
    pub sweep: Sweep,
    pub sim: SimConfig,
    pub meanfield: MeanfieldSpec,
    /// Extra times at which density snapshots are written; `t_final` is always recorded.
    pub snapshot_times: Vec<f64>,
    /// Resumable positive-P runs keep one checkpoint per sweep cell here.
    pub checkpoint_dir: Option<PathBuf>,
    pub oracle: OracleSpec,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            mode: None,
            out_dir: PathBuf::from("out"),
            n_atoms: cmbec::DEFAULT_ATOM_NUMBER,
            lattice: LatticeSpec::default(),
            sweep: Sweep::default(),
            sim: SimConfig::default(),
            meanfield: MeanfieldSpec::default(),
            snapshot_times: Vec::new(),
            checkpoint_dir: None,
            oracle: OracleSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSpec {
    pub dx: f64,
    /// Fixed cell count. Takes precedence over `half_width`.
    pub m_cells: Option<usize>,
    /// Sized from the ground state and the expected spreading when both are absent.
    pub half_width: Option<f64>,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        Self { dx: 0.33, m_cells: None, half_width: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweep {
    pub g1d_n: Vec<f64>,
    pub kappa_tilde: Vec<f64>,
}

impl Default for Sweep {
    fn default() -> Self {
        Self { g1d_n: vec![0.0, 1.0, 2.0, 4.0, 6.0, 10.0, 15.0, 20.0], kappa_tilde: vec![1.0, 5.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanfieldSpec {
    pub closure: Closure,
    pub dt: f64,
}

impl Default for MeanfieldSpec {
    fn default() -> Self {
        Self { closure: Closure::Published, dt: 1e-4 }
    }
}

/// The small instance checked against the master equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSpec {
    pub m_cells: usize,
    pub dx: f64,
    pub n_atoms: f64,
    pub g1d: f64,
    pub kappa_tilde: f64,
    pub t_final: f64,
    pub dt: f64,
    pub n_trajectories: u64,
    pub n_sigma: f64,
    /// Archived oracle output to compare against.
    pub fixture: Option<PathBuf>,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            m_cells: 3,
            dx: 1.0,
            n_atoms: 2.0,
            g1d: 0.5,
            kappa_tilde: 0.5,
            t_final: 0.1,
            dt: 1e-4,
            n_trajectories: 100_000,
            n_sigma: 3.0,
            fixture: None,
        }
    }
}

/// Flags that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub trajectories: Option<u64>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub g1d_n: Option<Vec<f64>>,
    pub kappa_tilde: Option<Vec<f64>>,
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub struct SchemaError(pub String);

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn schema(msg: impl Into<String>) -> SchemaError {
    SchemaError(msg.into())
}

impl Scenario {
    pub fn load(path: Option<&Path>) -> Result<Self, SchemaError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|e| schema(format!("cannot read {}: {e}", p.display())))?;
                Self::parse(&text).map_err(|e| schema(format!("{}: {}", p.display(), e.0)))
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        toml::from_str(text).map_err(|e| schema(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.sim.seed = v;
        }
        if let Some(v) = &o.out_dir {
            self.out_dir = v.clone();
        }
        if let Some(v) = o.trajectories {
            self.sim.n_trajectories = v;
            self.oracle.n_trajectories = v;
        }
        if let Some(v) = o.dt {
            self.sim.dt = v;
            self.oracle.dt = v;
        }
        if let Some(v) = o.t_final {
            self.sim.t_final = v;
        }
        if let Some(v) = &o.g1d_n {
            self.sweep.g1d_n = v.clone();
        }
        if let Some(v) = &o.kappa_tilde {
            self.sweep.kappa_tilde = v.clone();
        }
        if let Some(v) = &o.checkpoint_dir {
            self.checkpoint_dir = Some(v.clone());
        }
    }

    /// Checks everything the chosen mode will need before any computation starts.
    pub fn validate(&self, mode: Mode) -> Result<(), SchemaError> {
        if let Some(m) = self.mode {
            if m != mode {
                return Err(schema(format!(
                    "config is for mode `{}` but `{}` was requested",
                    m.as_str(),
                    mode.as_str()
                )));
            }
        }
        if mode == Mode::OracleCheck {
            let o = &self.oracle;
            if o.m_cells.is_multiple_of(2) {
                return Err(schema("oracle.m_cells must be odd so the trap center is a cell"));
            }
            for (name, v) in [
                ("oracle.dx", o.dx),
                ("oracle.n_atoms", o.n_atoms),
                ("oracle.t_final", o.t_final),
                ("oracle.n_sigma", o.n_sigma),
            ] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(schema(format!("{name} must be positive, got {v}")));
                }
            }
            let sim = SimConfig { dt: o.dt, t_final: o.t_final, n_trajectories: o.n_trajectories, ..self.sim.clone() };
            return sim.validate().map_err(|e| schema(e.to_string()));
        }
        if !(self.n_atoms > 0.0 && self.n_atoms.is_finite()) {
            return Err(schema(format!("n_atoms must be positive, got {}", self.n_atoms)));
        }
        if !(self.lattice.dx > 0.0 && self.lattice.dx.is_finite()) {
            return Err(schema(format!("lattice.dx must be positive, got {}", self.lattice.dx)));
        }
        if let Some(m) = self.lattice.m_cells {
            if m < 3 || m % 2 == 0 {
                return Err(schema(format!("lattice.m_cells must be odd and at least 3, got {m}")));
            }
        }
        if let Some(h) = self.lattice.half_width {
            if !(h > 0.0) {
                return Err(schema(format!("lattice.half_width must be positive, got {h}")));
            }
        }
        if self.sweep.g1d_n.is_empty() {
            return Err(schema("sweep.g1d_n is empty"));
        }
        if let Some(g) = self.sweep.g1d_n.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
            return Err(schema(format!("sweep.g1d_n entries must be nonnegative, got {g}")));
        }
        if let Some(k) = self.sweep.kappa_tilde.iter().find(|k| !(**k >= 0.0 && k.is_finite())) {
            return Err(schema(format!("sweep.kappa_tilde entries must be nonnegative, got {k}")));
        }
        if matches!(mode, Mode::Meanfield | Mode::Positivep | Mode::Compare) && self.sweep.kappa_tilde.is_empty() {
            return Err(schema("sweep.kappa_tilde is empty"));
        }
        if matches!(mode, Mode::Meanfield | Mode::Compare) && !(self.meanfield.dt > 0.0) {
            return Err(schema(format!("meanfield.dt must be positive, got {}", self.meanfield.dt)));
        }
        if matches!(mode, Mode::Positivep | Mode::Compare) {
            self.sim.validate().map_err(|e| schema(e.to_string()))?;
            if let Some(t) = self.snapshot_times.iter().find(|t| !(**t >= 0.0 && **t <= self.sim.t_final)) {
                return Err(schema(format!("snapshot time {t} lies outside [0, {}]", self.sim.t_final)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_defaults() {
        let s = Scenario::parse("").unwrap();
        assert_eq!(s, Scenario::default());
        assert_eq!(s.lattice.dx, 0.33);
        assert_eq!(s.sim.dt, 1e-4);
        assert_eq!(s.sim.n_trajectories, 20_000);
        assert_eq!(s.n_atoms, 100.0);
    }

    #[test]
    fn nested_fields_parse() {
        let s = Scenario::parse(
            r#"
            mode = "positivep"
            [sweep]
            g1d_n = [2.0, 6.0]
            kappa_tilde = [5.0]
            [sim]
            n_trajectories = 128
            scheme = "euler-maruyama"
            [meanfield]
            closure = "consistent"
            "#,
        )
        .unwrap();
        assert_eq!(s.mode, Some(Mode::Positivep));
        assert_eq!(s.sweep.g1d_n, vec![2.0, 6.0]);
        assert_eq!(s.sim.n_trajectories, 128);
        assert_eq!(s.sim.dt, 1e-4);
        assert_eq!(s.meanfield.closure, Closure::Consistent);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Scenario::parse("dtt = 1.0").is_err());
        assert!(Scenario::parse("[lattice]\nspacing = 0.3").is_err());
    }

    #[test]
    fn flags_override_file() {
        let mut s = Scenario::parse("[sim]\nseed = 4\ndt = 1e-3").unwrap();
        s.apply(&Overrides { seed: Some(9), t_final: Some(0.5), ..Default::default() });
        assert_eq!(s.sim.seed, 9);
        assert_eq!(s.sim.dt, 1e-3);
        assert_eq!(s.sim.t_final, 0.5);
    }

    #[test]
    fn validation_catches_mode_specific_problems() {
        let mut s = Scenario::default();
        assert!(s.validate(Mode::Positivep).is_ok());
        s.mode = Some(Mode::Gpe);
        assert!(s.validate(Mode::Positivep).is_err());
        s.mode = None;
        s.snapshot_times = vec![3.0];
        assert!(s.validate(Mode::Positivep).is_err());
        assert!(s.validate(Mode::Gpe).is_ok());
        s.lattice.m_cells = Some(44);
        assert!(s.validate(Mode::Gpe).is_err());
        let mut o = Scenario::default();
        o.oracle.m_cells = 4;
        assert!(o.validate(Mode::OracleCheck).is_err());
    }
}
