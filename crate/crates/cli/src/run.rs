use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cmbec::export::{
    read_oracle_fixture, write_density_comparison, write_eta_table, write_g2, write_ground_state, write_moments,
    write_oracle_fixture, write_snapshot, EtaRow, OracleFixture, Tier,
};
use cmbec::gpe::{self, check_scenario_coverage, solve_ground_state, solve_ground_state_with, GpeOptions, GroundState};
use cmbec::meanfield::{eta_sweep, integrate_moments, MomentSeries, MomentState, SweepSettings};
use cmbec::observables::{
    cell_occupations, density_profile, ensemble_cloud_variance, eta_from_runs, g2_curve, max_imaginary_ratio,
    pair_numerators, total_number,
};
use cmbec::oracle::{master_equation_evolve, FockConfig};
use cmbec::positivep::{config_hash, recommended_half_width, run_ensemble_resumable, EnsembleAccumulator, SimConfig};
use cmbec::{Error, Lattice, PhysicalParams};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{Mode, Scenario};

/// Rows kept per moment series in the CSV output.
const MOMENT_ROWS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Failed,
    Diverged,
    OracleMismatch,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Failed => 1,
            Status::Diverged => 3,
            Status::OracleMismatch => 4,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceRecord {
    pub trajectory: u64,
    pub time: f64,
    pub cell: usize,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub tier: &'static str,
    pub g1d_n: f64,
    pub kappa_tilde: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_cells: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<DivergenceRecord>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl RunRecord {
    fn new(tier: &'static str, g1d_n: f64, kappa_tilde: f64) -> Self {
        Self {
            tier,
            g1d_n,
            kappa_tilde,
            m_cells: None,
            seed: None,
            config_hash: None,
            status: Status::Ok,
            error: None,
            divergence: None,
            diagnostics: BTreeMap::new(),
        }
    }

    fn fail(&mut self, e: &Error) {
        self.error = Some(e.to_string());
        self.status = Status::Failed;
        if let Error::Divergence(d) = e {
            self.status = Status::Diverged;
            self.divergence =
                Some(DivergenceRecord { trajectory: d.trajectory, time: d.time, cell: d.cell, magnitude: d.magnitude });
        }
    }
}

/// Everything a run produced besides the CSV files.
#[derive(Debug, Default)]
pub struct Report {
    pub runs: Vec<RunRecord>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    pub status: Option<Status>,
}

impl Report {
    pub fn status(&self) -> Status {
        let worst = self.runs.iter().map(|r| r.status).max().unwrap_or(Status::Ok);
        self.status.map_or(worst, |s| s.max(worst))
    }
}

struct Ctx<'a> {
    sc: &'a Scenario,
    out: &'a Path,
    report: Report,
}

impl Ctx<'_> {
    fn file(&mut self, name: String) -> PathBuf {
        self.report.outputs.push(name.clone());
        self.out.join(name)
    }

    fn warn(&mut self, msg: String) {
        eprintln!("warning: {msg}");
        self.report.warnings.push(msg);
    }
}

fn tag(v: f64) -> String {
    format!("{v}")
}

fn seed_for(base: u64, g_index: usize, slot: usize) -> u64 {
    base.wrapping_add(1000 * g_index as u64 + slot as u64)
}

/// The lattice for one interaction strength: explicit in the config, or sized
/// from a provisional ground state and the largest measurement strength.
fn resolve_lattice(
    sc: &Scenario,
    params: &PhysicalParams,
    kappa_max: f64,
    t_final: f64,
) -> cmbec::Result<(Lattice, bool)> {
    let dx = sc.lattice.dx;
    if let Some(m) = sc.lattice.m_cells {
        return Ok((Lattice::new(m, dx)?, true));
    }
    if let Some(h) = sc.lattice.half_width {
        return Ok((Lattice::covering(h, dx)?, true));
    }
    let g = params.interaction_strength();
    let provisional = Lattice::covering(gpe::thomas_fermi_radius(g).max(1.0) + 6.0, dx)?;
    let gs = solve_ground_state(&provisional, &params.with_kappa_tilde(0.0))?;
    Ok((Lattice::covering(recommended_half_width(&gs, kappa_max, t_final), dx)?, false))
}

fn ground_state(
    sc: &Scenario,
    params: &PhysicalParams,
    kappa_max: f64,
    t_final: f64,
) -> cmbec::Result<(Lattice, GroundState)> {
    let (lattice, explicit) = resolve_lattice(sc, params, kappa_max, t_final)?;
    let gs = solve_ground_state(&lattice, params)?;
    if explicit {
        check_scenario_coverage(&lattice, &gs)?;
    }
    Ok((lattice, gs))
}

pub fn execute(mode: Mode, sc: &Scenario, write_fixture: Option<&Path>) -> std::io::Result<Report> {
    std::fs::create_dir_all(&sc.out_dir)?;
    let mut ctx = Ctx { sc, out: &sc.out_dir, report: Report::default() };
    match mode {
        Mode::Gpe => run_gpe(&mut ctx),
        Mode::Meanfield => {
            let rows = run_meanfield(&mut ctx);
            let path = ctx.file("eta_meanfield.csv".into());
            write_eta_table(&path, &rows).map_err(io)?;
        }
        Mode::Positivep => {
            let rows = run_positivep(&mut ctx);
            let path = ctx.file("eta_positivep.csv".into());
            write_eta_table(&path, &rows).map_err(io)?;
        }
        Mode::Compare => {
            let mut rows = run_meanfield(&mut ctx);
            let path = ctx.file("eta_meanfield.csv".into());
            write_eta_table(&path, &rows).map_err(io)?;
            let pp = run_positivep(&mut ctx);
            let path = ctx.file("eta_positivep.csv".into());
            write_eta_table(&path, &pp).map_err(io)?;
            rows.extend(pp);
            let path = ctx.file("eta_compare.csv".into());
            write_eta_table(&path, &rows).map_err(io)?;
        }
        Mode::OracleCheck => run_oracle_check(&mut ctx, write_fixture)?,
    }
    Ok(ctx.report)
}

fn io(e: Error) -> std::io::Error {
    match e {
        Error::Io(e) => e,
        other => std::io::Error::other(other.to_string()),
    }
}

fn run_gpe(ctx: &mut Ctx<'_>) {
    let sc = ctx.sc;
    for &g in &sc.sweep.g1d_n {
        let mut rec = RunRecord::new("gpe", g, 0.0);
        let result = PhysicalParams::from_interaction_strength(sc.n_atoms, g, 0.0)
            .and_then(|params| ground_state(sc, &params, 0.0, 0.0));
        match result {
            Ok((lattice, gs)) => {
                rec.m_cells = Some(lattice.m_cells());
                rec.diagnostics.insert("chemical_potential".into(), gs.chemical_potential);
                rec.diagnostics.insert("variance".into(), gs.variance);
                rec.diagnostics.insert("thomas_fermi_mu".into(), gpe::thomas_fermi_mu(g));
                let path = ctx.file(format!("ground_state_g{}.csv", tag(g)));
                if let Err(e) = write_ground_state(&path, &lattice, &gs) {
                    rec.fail(&e);
                }
            }
            Err(e) => rec.fail(&e),
        }
        ctx.report.runs.push(rec);
    }
}

fn thinned(series: &MomentSeries) -> MomentSeries {
    let stride = series.times.len().div_ceil(MOMENT_ROWS).max(1);
    let last = series.times.len() - 1;
    let keep: Vec<usize> = (0..series.times.len()).filter(|i| i % stride == 0 || *i == last).collect();
    MomentSeries {
        times: keep.iter().map(|&i| series.times[i]).collect(),
        states: keep.iter().map(|&i| series.states[i]).collect(),
    }
}

fn run_meanfield(ctx: &mut Ctx<'_>) -> Vec<EtaRow> {
    let sc = ctx.sc;
    let settings = SweepSettings {
        n_atoms: sc.n_atoms,
        dx: sc.lattice.dx,
        m_cells: sc.lattice.m_cells,
        t_eval: sc.sim.t_final,
        dt: sc.meanfield.dt,
        closure: sc.meanfield.closure,
    };
    let cells = eta_sweep(&sc.sweep.g1d_n, &sc.sweep.kappa_tilde, &settings);
    let mut rows = Vec::new();
    let mut unmeasured_written = std::collections::HashSet::new();
    for cell in cells {
        let mut rec = RunRecord::new("meanfield", cell.g1d_n, cell.kappa_tilde);
        if let Some(init) = cell.initial {
            rec.diagnostics.insert("initial_var_x".into(), init.var_x);
        }
        rec.diagnostics.insert("within_validity".into(), f64::from(u8::from(cell.within_validity)));
        let first_for_g = !unmeasured_written.contains(&cell.g1d_n.to_bits());
        if !cell.within_validity && first_for_g {
            ctx.warn(format!("g1D N = {} lies outside the closure's validity bound", cell.g1d_n));
        }
        match (cell.eta, &cell.error) {
            (Some(eta), None) => {
                rec.diagnostics.insert("eta".into(), eta);
                rows.push(EtaRow {
                    g1d_n: cell.g1d_n,
                    kappa_tilde: cell.kappa_tilde,
                    eta,
                    eta_stderr: 0.0,
                    tier: Tier::Meanfield,
                });
                if let Some(init) = cell.initial {
                    let mut kappas = vec![cell.kappa_tilde];
                    if unmeasured_written.insert(cell.g1d_n.to_bits()) && cell.kappa_tilde != 0.0 {
                        kappas.insert(0, 0.0);
                    }
                    for k in kappas {
                        if let Err(e) = write_series(ctx, init, cell.g1d_n, k) {
                            ctx.warn(format!("moments for g1D N = {}, kappa~ = {k}: {e}", cell.g1d_n));
                        }
                    }
                }
            }
            (_, err) => {
                rec.status = Status::Failed;
                rec.error = err.clone().or_else(|| Some("no result".into()));
            }
        }
        ctx.report.runs.push(rec);
    }
    rows
}

fn write_series(ctx: &mut Ctx<'_>, init: MomentState, g: f64, kappa: f64) -> cmbec::Result<()> {
    let sc = ctx.sc;
    let params = PhysicalParams::from_interaction_strength(sc.n_atoms, g, kappa)?;
    let series = integrate_moments(init, &params, sc.meanfield.closure, sc.sim.t_final, sc.meanfield.dt)?;
    let path = ctx.file(format!("moments_g{}_k{}.csv", tag(g), tag(kappa)));
    write_moments(&path, &thinned(&series))
}

struct Finished {
    kappa: f64,
    acc: EnsembleAccumulator,
}

fn run_positivep(ctx: &mut Ctx<'_>) -> Vec<EtaRow> {
    let sc = ctx.sc;
    let mut kappas = vec![0.0];
    for &k in &sc.sweep.kappa_tilde {
        if !kappas.contains(&k) {
            kappas.push(k);
        }
    }
    let kappa_max = kappas.iter().copied().fold(0.0, f64::max);
    let mut times: Vec<f64> = sc.snapshot_times.clone();
    times.push(sc.sim.t_final);
    times.sort_by(f64::total_cmp);
    times.dedup();
    if sc.sim.beyond_secure_window() {
        ctx.warn(format!("t_final = {} lies beyond the usual positive-P secure window", sc.sim.t_final));
    }

    let mut rows = Vec::new();
    for (gi, &g) in sc.sweep.g1d_n.iter().enumerate() {
        let setup = PhysicalParams::from_interaction_strength(sc.n_atoms, g, 0.0)
            .and_then(|p| ground_state(sc, &p, kappa_max, sc.sim.t_final));
        let (lattice, gs) = match setup {
            Ok(v) => v,
            Err(e) => {
                for &k in &kappas {
                    let mut rec = RunRecord::new("positivep", g, k);
                    rec.fail(&e);
                    ctx.report.runs.push(rec);
                }
                continue;
            }
        };
        let mut done = Vec::new();
        for (slot, &k) in kappas.iter().enumerate() {
            let mut rec = RunRecord::new("positivep", g, k);
            rec.m_cells = Some(lattice.m_cells());
            let params = PhysicalParams::from_interaction_strength(sc.n_atoms, g, k).expect("validated above");
            let cfg = SimConfig { seed: seed_for(sc.sim.seed, gi, slot), ..sc.sim.clone() };
            rec.seed = Some(cfg.seed);
            rec.config_hash =
                Some(format!("{:016x}", config_hash(&params, lattice.m_cells(), lattice.dx(), &cfg, &times)));
            let ckpt = sc.checkpoint_dir.as_ref().map(|d| d.join(format!("g{}_k{}.ckpt", tag(g), tag(k))));
            if let Some(dir) = &sc.checkpoint_dir {
                if let Err(e) = std::fs::create_dir_all(dir) {
                    rec.fail(&Error::Io(e));
                    ctx.report.runs.push(rec);
                    continue;
                }
            }
            eprintln!(
                "positivep: g1D N = {g}, kappa~ = {k}, M = {}, {} trajectories",
                lattice.m_cells(),
                cfg.n_trajectories
            );
            match run_ensemble_resumable(&gs, &lattice, &params, &cfg, &times, ckpt.as_deref()) {
                Ok(run) => {
                    for snap in &run.snapshots {
                        if snap.time < sc.sim.t_final * (1.0 - 1e-12) || !sc.snapshot_times.is_empty() {
                            let profile = density_profile(&snap.acc, &lattice).expect("accumulator matches lattice");
                            let path = ctx.file(format!("snapshot_g{}_k{}_t{:.4}.csv", tag(g), tag(k), snap.time));
                            if let Err(e) = write_snapshot(&path, &profile) {
                                rec.fail(&e);
                            }
                        }
                    }
                    let last = run.snapshots.last().expect("t_final is always a snapshot").acc.clone();
                    let n = total_number(&last);
                    rec.diagnostics.insert("total_number".into(), n.value);
                    rec.diagnostics.insert("total_number_stderr".into(), n.stderr);
                    if (n.value - sc.n_atoms).abs() > (3.0 * n.stderr).max(0.01 * sc.n_atoms) {
                        ctx.warn(format!(
                            "g1D N = {g}, kappa~ = {k}: atom number drifted to {:.3} +- {:.3}; reduce dt or use an even implicit_iterations",
                            n.value, n.stderr
                        ));
                    }
                    rec.diagnostics.insert("max_imaginary_ratio".into(), max_imaginary_ratio(&last));
                    rec.diagnostics.insert("max_conjugation_defect".into(), last.max_conjugation_defect);
                    if let Ok(v) = ensemble_cloud_variance(&last, sc.n_atoms) {
                        rec.diagnostics.insert("var_x".into(), v.value);
                        rec.diagnostics.insert("var_x_stderr".into(), v.stderr);
                    }
                    match g2_curve(&last, &lattice, None) {
                        Ok(curve) => {
                            let path = ctx.file(format!("g2_g{}_k{}.csv", tag(g), tag(k)));
                            if let Err(e) = write_g2(&path, &curve) {
                                rec.fail(&e);
                            }
                        }
                        Err(e) => ctx.warn(format!("g2 for g1D N = {g}, kappa~ = {k}: {e}")),
                    }
                    done.push(Finished { kappa: k, acc: last });
                }
                Err(e) => {
                    eprintln!("positivep: g1D N = {g}, kappa~ = {k}: {e}");
                    rec.fail(&e);
                }
            }
            ctx.report.runs.push(rec);
        }

        let Some(nomeas) = done.iter().find(|f| f.kappa == 0.0) else { continue };
        for meas in done.iter().filter(|f| f.kappa != 0.0) {
            let pm = density_profile(&meas.acc, &lattice).expect("accumulator matches lattice");
            let pn = density_profile(&nomeas.acc, &lattice).expect("accumulator matches lattice");
            let path = ctx.file(format!("density_g{}_k{}.csv", tag(g), tag(meas.kappa)));
            if let Err(e) = write_density_comparison(&path, &pm, &pn) {
                ctx.warn(format!("density comparison for g1D N = {g}: {e}"));
            }
            let eta = ensemble_cloud_variance(&meas.acc, sc.n_atoms)
                .and_then(|vm| Ok((vm, ensemble_cloud_variance(&nomeas.acc, sc.n_atoms)?)))
                .and_then(|(vm, vn)| eta_from_runs(vm, vn));
            match eta {
                Ok(e) => rows.push(EtaRow {
                    g1d_n: g,
                    kappa_tilde: meas.kappa,
                    eta: e.value,
                    eta_stderr: e.stderr,
                    tier: Tier::Positivep,
                }),
                Err(e) => ctx.warn(format!("eta for g1D N = {g}, kappa~ = {}: {e}", meas.kappa)),
            }
        }
    }
    rows
}

fn run_oracle_check(ctx: &mut Ctx<'_>, write_fixture: Option<&Path>) -> std::io::Result<()> {
    let o = &ctx.sc.oracle;
    let mut rec = RunRecord::new("oracle", o.g1d * o.n_atoms, o.kappa_tilde);
    rec.m_cells = Some(o.m_cells);
    let result = (|| -> cmbec::Result<Vec<Vec<String>>> {
        let lattice = Lattice::new(o.m_cells, o.dx)?;
        let params = PhysicalParams::new(o.n_atoms, o.g1d, o.kappa_tilde)?;
        let opts = GpeOptions { enforce_coverage: false, ..Default::default() };
        let gs = solve_ground_state_with(&lattice, &params, &opts)?.0;
        let amps: Vec<Complex64> = gs.amplitudes.iter().map(|&p| Complex64::new(p * o.dx.sqrt(), 0.0)).collect();
        let fock = FockConfig::for_coherent(&amps, 1e-6)?;
        rec.diagnostics.insert("fock_cutoff".into(), fock.n_max() as f64);
        let oracle = master_equation_evolve(fock, &params, &lattice, &amps, o.t_final)?;
        let cfg = SimConfig { dt: o.dt, t_final: o.t_final, n_trajectories: o.n_trajectories, ..ctx.sc.sim.clone() };
        let hash = format!(
            "{:016x}",
            config_hash(
                &params,
                o.m_cells,
                o.dx,
                &SimConfig { t_final: o.t_final, ..Default::default() },
                &[o.t_final]
            )
        );
        rec.config_hash = Some(hash.clone());
        rec.seed = Some(cfg.seed);

        let fixture = OracleFixture { config_hash: hash.clone(), expectations: oracle.clone() };
        if let Some(path) = write_fixture {
            write_oracle_fixture(path, &fixture)?;
            eprintln!("oracle-check: wrote fixture {}", path.display());
        }
        if let Some(path) = &o.fixture {
            let archived = read_oracle_fixture(path)?;
            let drift = archived
                .expectations
                .occupations
                .iter()
                .zip(&oracle.occupations)
                .chain(archived.expectations.pair_with_center.iter().zip(&oracle.pair_with_center))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            rec.diagnostics.insert("fixture_drift".into(), drift);
            if archived.config_hash != hash || drift > 1e-8 {
                ctx.report.status = Some(Status::OracleMismatch);
                ctx.report.warnings.push(format!(
                    "fixture {} does not match the recomputed oracle (hash {hash}, drift {drift:.2e})",
                    path.display()
                ));
            }
        }

        let run = run_ensemble_resumable(&gs, &lattice, &params, &cfg, &[o.t_final], None)?;
        let acc = &run.snapshots[0].acc;
        let center = lattice.center_cell().expect("odd cell count");
        let mut rows = Vec::new();
        let mut worst: f64 = 0.0;
        let occ = cell_occupations(acc);
        let pairs = pair_numerators(acc);
        let entries = occ
            .iter()
            .enumerate()
            .map(|(i, e)| ("n", i, *e, oracle.occupations[i]))
            .chain(std::iter::once(("pair", center, pairs[center], oracle.pair_with_center[center])));
        for (q, i, est, exact) in entries {
            let z = est.z_score(exact);
            worst = worst.max(z);
            rows.push(vec![
                q.to_string(),
                i.to_string(),
                format!("{exact}"),
                format!("{}", est.value),
                format!("{}", est.stderr),
                format!("{z}"),
            ]);
        }
        rec.diagnostics.insert("max_z".into(), worst);
        if !(worst <= o.n_sigma) {
            ctx.report.status = Some(Status::OracleMismatch);
        }
        Ok(rows)
    })();
    match result {
        Ok(rows) => {
            let path = ctx.file("oracle_check.csv".into());
            let mut w = std::fs::File::create(&path).map(std::io::BufWriter::new)?;
            use std::io::Write;
            writeln!(w, "quantity,index,oracle,positivep,stderr,z")?;
            for r in rows {
                writeln!(w, "{}", r.join(","))?;
            }
        }
        Err(e) => rec.fail(&e),
    }
    ctx.report.runs.push(rec);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_across_cells() {
        let mut seen = std::collections::HashSet::new();
        for gi in 0..8 {
            for slot in 0..3 {
                assert!(seen.insert(seed_for(7, gi, slot)));
            }
        }
    }

    #[test]
    fn status_precedence() {
        let mut r = Report::default();
        assert_eq!(r.status(), Status::Ok);
        let mut a = RunRecord::new("positivep", 1.0, 5.0);
        a.status = Status::Failed;
        r.runs.push(a);
        assert_eq!(r.status(), Status::Failed);
        let mut b = RunRecord::new("positivep", 2.0, 5.0);
        b.status = Status::Diverged;
        r.runs.push(b);
        assert_eq!(r.status().exit_code(), 3);
        r.status = Some(Status::OracleMismatch);
        assert_eq!(r.status().exit_code(), 4);
    }

    #[test]
    fn thinning_keeps_endpoints() {
        let n = 10_001;
        let series = MomentSeries {
            times: (0..n).map(|i| i as f64).collect(),
            states: vec![MomentState { var_x: 1.0, var_p: 1.0, cov_xp: 0.0 }; n],
        };
        let t = thinned(&series);
        assert!(t.times.len() <= MOMENT_ROWS + 2);
        assert_eq!(t.times[0], 0.0);
        assert_eq!(*t.times.last().unwrap(), (n - 1) as f64);
    }
}
