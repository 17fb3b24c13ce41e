//! CSV emitters. UTF-8, one header row, `.` decimal separator, shortest
//! round-trip float formatting so that equal inputs give byte-identical files.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gpe::GroundState;
use crate::lattice::Lattice;
use crate::meanfield::MomentSeries;
use crate::observables::{DensityProfile, G2Curve};
use crate::oracle::MasterExpectations;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Meanfield,
    Positivep,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Meanfield => "meanfield",
            Tier::Positivep => "positivep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaRow {
    pub g1d_n: f64,
    pub kappa_tilde: f64,
    pub eta: f64,
    /// Zero for the deterministic tier.
    pub eta_stderr: f64,
    pub tier: Tier,
}

/// Shortest round-trip decimal, switching to exponent form for tiny or huge magnitudes.
fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn write_rows<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn to_file(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_rows(std::fs::File::create(path)?, header, rows)
}

/// Columns `x, phi, density`.
pub fn write_ground_state(path: &Path, lattice: &Lattice, gs: &GroundState) -> Result<()> {
    let rows = lattice.positions().iter().zip(&gs.amplitudes).map(|(x, p)| vec![num(*x), num(*p), num(p * p)]);
    to_file(path, &["x", "phi", "density"], rows)
}

/// Columns `t, var_x, var_p, cov_xp`.
pub fn write_moments(path: &Path, series: &MomentSeries) -> Result<()> {
    let rows =
        series.times.iter().zip(&series.states).map(|(t, s)| vec![num(*t), num(s.var_x), num(s.var_p), num(s.cov_xp)]);
    to_file(path, &["t", "var_x", "var_p", "cov_xp"], rows)
}

/// Columns `g1dN, kappa_tilde, eta, eta_stderr, tier`.
pub fn write_eta_table(path: &Path, rows: &[EtaRow]) -> Result<()> {
    let rows = rows
        .iter()
        .map(|r| vec![num(r.g1d_n), num(r.kappa_tilde), num(r.eta), num(r.eta_stderr), r.tier.as_str().to_string()]);
    to_file(path, &["g1dN", "kappa_tilde", "eta", "eta_stderr", "tier"], rows)
}

/// Columns `x, n_meas, n_meas_err, n_nomeas, n_nomeas_err`.
pub fn write_density_comparison(path: &Path, meas: &DensityProfile, nomeas: &DensityProfile) -> Result<()> {
    if meas.x != nomeas.x {
        return Err(invalid("profiles", "defined on different lattices"));
    }
    let rows = (0..meas.x.len())
        .map(|i| vec![num(meas.x[i]), num(meas.n[i]), num(meas.stderr[i]), num(nomeas.n[i]), num(nomeas.stderr[i])]);
    to_file(path, &["x", "n_meas", "n_meas_err", "n_nomeas", "n_nomeas_err"], rows)
}

/// Columns `x, g2, g2_err, valid`.
pub fn write_g2(path: &Path, curve: &G2Curve) -> Result<()> {
    let rows = (0..curve.x.len()).map(|i| {
        vec![
            num(curve.x[i]),
            num(curve.g2[i]),
            num(curve.stderr[i]),
            if curve.valid[i] { "1" } else { "0" }.to_string(),
        ]
    });
    to_file(path, &["x", "g2", "g2_err", "valid"], rows)
}

/// Columns `x, mean_density, stderr_density`.
pub fn write_snapshot(path: &Path, profile: &DensityProfile) -> Result<()> {
    let rows = (0..profile.x.len()).map(|i| vec![num(profile.x[i]), num(profile.n[i]), num(profile.stderr[i])]);
    to_file(path, &["x", "mean_density", "stderr_density"], rows)
}

/// One master-equation result keyed by the hash of its configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleFixture {
    pub config_hash: String,
    pub expectations: MasterExpectations,
}

/// Columns `config_hash, quantity, index, value`; quantities are `n`, `pair`,
/// `total`, `x_mean` and `x2_mean`.
pub fn write_oracle_fixture(path: &Path, fixture: &OracleFixture) -> Result<()> {
    let e = &fixture.expectations;
    let h = &fixture.config_hash;
    let mut rows = Vec::new();
    for (i, v) in e.occupations.iter().enumerate() {
        rows.push(vec![h.clone(), "n".into(), i.to_string(), num(*v)]);
    }
    for (i, v) in e.pair_with_center.iter().enumerate() {
        rows.push(vec![h.clone(), "pair".into(), i.to_string(), num(*v)]);
    }
    rows.push(vec![h.clone(), "total".into(), "0".into(), num(e.total)]);
    rows.push(vec![h.clone(), "x_mean".into(), "0".into(), num(e.x_mean)]);
    rows.push(vec![h.clone(), "x2_mean".into(), "0".into(), num(e.x2_mean)]);
    to_file(path, &["config_hash", "quantity", "index", "value"], rows.into_iter())
}

pub fn read_oracle_fixture(path: &Path) -> Result<OracleFixture> {
    let mut r = csv::Reader::from_path(path)?;
    let mut hash = None;
    let mut e = MasterExpectations {
        occupations: Vec::new(),
        pair_with_center: Vec::new(),
        total: f64::NAN,
        x_mean: f64::NAN,
        x2_mean: f64::NAN,
    };
    for rec in r.records() {
        let rec = rec?;
        let field = |k: usize| rec.get(k).ok_or_else(|| invalid("fixture", "short record"));
        let h = field(0)?.to_string();
        match &hash {
            None => hash = Some(h),
            Some(prev) if *prev != h => return Err(invalid("fixture", "mixed config hashes")),
            _ => {}
        }
        let idx: usize = field(2)?.parse().map_err(|_| invalid("fixture", "bad index"))?;
        let value: f64 = field(3)?.parse().map_err(|_| invalid("fixture", "bad value"))?;
        let slot = match field(1)? {
            "n" => &mut e.occupations,
            "pair" => &mut e.pair_with_center,
            "total" => {
                e.total = value;
                continue;
            }
            "x_mean" => {
                e.x_mean = value;
                continue;
            }
            "x2_mean" => {
                e.x2_mean = value;
                continue;
            }
            other => return Err(invalid("fixture", format!("unknown quantity {other}"))),
        };
        if slot.len() != idx {
            return Err(invalid("fixture", "indices out of order"));
        }
        slot.push(value);
    }
    Ok(OracleFixture { config_hash: hash.ok_or_else(|| invalid("fixture", "empty file"))?, expectations: e })
}
