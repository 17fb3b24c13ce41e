use std::path::Path;

use super::checkpoint::{load_checkpoint, save_checkpoint};
use super::model::{Model, NoiseIncrements, Workspace};
use super::rng::trajectory_rng;
use super::state::{init_coherent, TrajectoryState};
use super::{config_hash, SimConfig};
use crate::error::{invalid, DivergenceError, Error, Result};
use crate::gpe::GroundState;
use crate::lattice::{HoppingMatrix, Lattice};
use crate::params::PhysicalParams;

/// Trajectories per work unit. Units are reduced in index order, so the result
/// does not depend on how many workers ran them.
pub const CHUNK_SIZE: u64 = 64;

/// Chunks processed between checkpoint writes.
const CHUNKS_PER_BATCH: u64 = 16;

/// Running sums over trajectories at one snapshot time.
///
/// `n` is the complex occupation `alpha_i beta_i`, `G_i = beta_c beta_i alpha_i alpha_c`
/// the pair product with the central cell `c`, and `S_k = sum_i x_i^k Re n_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleAccumulator {
    pub m_cells: usize,
    pub center: usize,
    pub count: u64,
    pub n_re: Vec<f64>,
    pub n_re_sq: Vec<f64>,
    pub n_im: Vec<f64>,
    pub n_im_sq: Vec<f64>,
    /// `sum S_k` for `k = 0, 1, 2`.
    pub moments: [f64; 3],
    /// `sum S_j S_k` in the order `00, 01, 02, 11, 12, 22`.
    pub moment_products: [f64; 6],
    pub pair_re: Vec<f64>,
    pub pair_re_sq: Vec<f64>,
    pub pair_im: Vec<f64>,
    pub pair_im_sq: Vec<f64>,
    /// `sum Re G_i Re n_c`.
    pub pair_times_center: Vec<f64>,
    /// `sum Re G_i Re n_i`.
    pub pair_times_cell: Vec<f64>,
    /// `sum Re n_c Re n_i`.
    pub center_times_cell: Vec<f64>,
    /// Largest `|beta - conj(alpha)|` seen in any trajectory.
    pub max_conjugation_defect: f64,
}

impl EnsembleAccumulator {
    pub fn new(m_cells: usize, center: usize) -> Self {
        let z = vec![0.0; m_cells];
        Self {
            m_cells,
            center,
            count: 0,
            n_re: z.clone(),
            n_re_sq: z.clone(),
            n_im: z.clone(),
            n_im_sq: z.clone(),
            moments: [0.0; 3],
            moment_products: [0.0; 6],
            pair_re: z.clone(),
            pair_re_sq: z.clone(),
            pair_im: z.clone(),
            pair_im_sq: z.clone(),
            pair_times_center: z.clone(),
            pair_times_cell: z.clone(),
            center_times_cell: z,
            max_conjugation_defect: 0.0,
        }
    }

    pub fn add(&mut self, state: &TrajectoryState, x: &[f64]) {
        let c = self.center;
        let nc = state.occupation(c);
        let mut s = [0.0; 3];
        for i in 0..self.m_cells {
            let n = state.occupation(i);
            self.n_re[i] += n.re;
            self.n_re_sq[i] += n.re * n.re;
            self.n_im[i] += n.im;
            self.n_im_sq[i] += n.im * n.im;
            s[0] += n.re;
            s[1] += x[i] * n.re;
            s[2] += x[i] * x[i] * n.re;
            let g = nc * n;
            self.pair_re[i] += g.re;
            self.pair_re_sq[i] += g.re * g.re;
            self.pair_im[i] += g.im;
            self.pair_im_sq[i] += g.im * g.im;
            self.pair_times_center[i] += g.re * nc.re;
            self.pair_times_cell[i] += g.re * n.re;
            self.center_times_cell[i] += nc.re * n.re;
        }
        for k in 0..3 {
            self.moments[k] += s[k];
        }
        let mut p = 0;
        for j in 0..3 {
            for k in j..3 {
                self.moment_products[p] += s[j] * s[k];
                p += 1;
            }
        }
        self.max_conjugation_defect = self.max_conjugation_defect.max(state.conjugation_defect());
        self.count += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.m_cells, other.m_cells);
        assert_eq!(self.center, other.center);
        self.count += other.count;
        for (a, b) in self.flat_vectors_mut().into_iter().zip(other.flat_vectors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for k in 0..3 {
            self.moments[k] += other.moments[k];
        }
        for k in 0..6 {
            self.moment_products[k] += other.moment_products[k];
        }
        self.max_conjugation_defect = self.max_conjugation_defect.max(other.max_conjugation_defect);
    }

    fn flat_vectors(&self) -> [&Vec<f64>; 11] {
        [
            &self.n_re,
            &self.n_re_sq,
            &self.n_im,
            &self.n_im_sq,
            &self.pair_re,
            &self.pair_re_sq,
            &self.pair_im,
            &self.pair_im_sq,
            &self.pair_times_center,
            &self.pair_times_cell,
            &self.center_times_cell,
        ]
    }

    fn flat_vectors_mut(&mut self) -> [&mut Vec<f64>; 11] {
        [
            &mut self.n_re,
            &mut self.n_re_sq,
            &mut self.n_im,
            &mut self.n_im_sq,
            &mut self.pair_re,
            &mut self.pair_re_sq,
            &mut self.pair_im,
            &mut self.pair_im_sq,
            &mut self.pair_times_center,
            &mut self.pair_times_cell,
            &mut self.center_times_cell,
        ]
    }

    /// The same ensemble seen through the relabeling `x -> -x` of a symmetric lattice.
    pub fn reflected(&self) -> Self {
        let mut r = self.clone();
        r.center = self.m_cells - 1 - self.center;
        for v in r.flat_vectors_mut() {
            v.reverse();
        }
        r.moments[1] = -r.moments[1];
        // products 01 and 12 are odd in x
        r.moment_products[1] = -r.moment_products[1];
        r.moment_products[4] = -r.moment_products[4];
        r
    }

    /// Number of `f64` values produced by [`Self::to_flat`].
    pub fn flat_len(m_cells: usize) -> usize {
        4 + 3 + 6 + 11 * m_cells
    }

    /// `[count, center, m_cells, defect, moments.., products.., vectors..]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(Self::flat_len(self.m_cells));
        v.extend([self.count as f64, self.center as f64, self.m_cells as f64, self.max_conjugation_defect]);
        v.extend(self.moments);
        v.extend(self.moment_products);
        for part in self.flat_vectors() {
            v.extend(part.iter().copied());
        }
        v
    }

    pub fn from_flat(v: &[f64]) -> Result<Self> {
        if v.len() < 13 {
            return Err(Error::Checkpoint("accumulator record too short".into()));
        }
        let m = v[2] as usize;
        if v.len() != Self::flat_len(m) {
            return Err(Error::Checkpoint(format!(
                "accumulator record has {} values, expected {}",
                v.len(),
                Self::flat_len(m)
            )));
        }
        let mut acc = Self::new(m, v[1] as usize);
        acc.count = v[0] as u64;
        acc.max_conjugation_defect = v[3];
        acc.moments.copy_from_slice(&v[4..7]);
        acc.moment_products.copy_from_slice(&v[7..13]);
        let mut offset = 13;
        for part in acc.flat_vectors_mut() {
            part.copy_from_slice(&v[offset..offset + m]);
            offset += m;
        }
        Ok(acc)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Time actually reached, a whole number of steps.
    pub time: f64,
    pub acc: EnsembleAccumulator,
}

#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub snapshots: Vec<Snapshot>,
    pub config_hash: u64,
    pub steps: usize,
    pub dt: f64,
}

struct Plan {
    model: Model,
    initial: TrajectoryState,
    x: Vec<f64>,
    center: usize,
    steps: usize,
    dt: f64,
    /// `(step index, snapshot slot)`, sorted by step.
    marks: Vec<(usize, usize)>,
    threshold: f64,
    config: SimConfig,
}

impl Plan {
    fn new(
        gs: &GroundState,
        lattice: &Lattice,
        params: &PhysicalParams,
        config: &SimConfig,
        times: &[f64],
    ) -> Result<(Self, Vec<f64>)> {
        params.validate()?;
        config.validate()?;
        if gs.amplitudes.len() != lattice.m_cells() {
            return Err(invalid("ground_state", "lives on a different lattice"));
        }
        if times.is_empty() {
            return Err(invalid("snapshot_times", "need at least one snapshot"));
        }
        let (steps, dt) = config.step_plan();
        let mut marks = Vec::with_capacity(times.len());
        let mut actual = Vec::with_capacity(times.len());
        for (slot, &t) in times.iter().enumerate() {
            if !(t >= 0.0 && t <= config.t_final * (1.0 + 1e-12)) {
                return Err(invalid("snapshot_times", format!("{t} lies outside [0, {}]", config.t_final)));
            }
            let idx = ((t / dt).round() as usize).min(steps);
            marks.push((idx, slot));
            actual.push(idx as f64 * dt);
        }
        marks.sort();
        let center = lattice.center_cell().unwrap_or(lattice.m_cells() / 2);
        let model =
            Model::new(params, lattice, &HoppingMatrix::new(lattice)).with_measurement_sign(config.measurement_sign);
        Ok((
            Self {
                model,
                initial: init_coherent(gs, lattice),
                x: lattice.positions().to_vec(),
                center,
                steps,
                dt,
                marks,
                threshold: config.threshold(params),
                config: config.clone(),
            },
            actual,
        ))
    }

    fn empty(&self, slots: usize) -> Vec<EnsembleAccumulator> {
        vec![EnsembleAccumulator::new(self.x.len(), self.center); slots]
    }

    fn run_trajectory(
        &self,
        index: u64,
        accs: &mut [EnsembleAccumulator],
        ws: &mut Workspace,
        dw: &mut NoiseIncrements,
    ) -> Result<(), DivergenceError> {
        let mut rng = trajectory_rng(self.config.seed, index);
        let mut state = self.initial.clone();
        let mut next = 0;
        while next < self.marks.len() && self.marks[next].0 == 0 {
            accs[self.marks[next].1].add(&state, &self.x);
            next += 1;
        }
        for step in 1..=self.steps {
            rng.fill_gaussian(&mut dw.interaction, self.dt);
            dw.measurement = self.dt.sqrt() * rng.standard_normal();
            self.model.step(&mut state, self.dt, dw, self.config.scheme, self.config.implicit_iterations, ws);
            self.model.check_divergence(&state, self.threshold, index)?;
            while next < self.marks.len() && self.marks[next].0 == step {
                accs[self.marks[next].1].add(&state, &self.x);
                next += 1;
            }
        }
        Ok(())
    }

    fn run_chunk(&self, chunk: u64, slots: usize) -> Result<Vec<EnsembleAccumulator>, DivergenceError> {
        let start = chunk * CHUNK_SIZE;
        let end = (start + CHUNK_SIZE).min(self.config.n_trajectories);
        let m = self.x.len();
        let mut accs = self.empty(slots);
        let mut ws = Workspace::new(m);
        let mut dw = NoiseIncrements::zeros(m);
        for index in start..end {
            self.run_trajectory(index, &mut accs, &mut ws, &mut dw)?;
        }
        Ok(accs)
    }

    fn run_chunks(
        &self,
        chunks: std::ops::Range<u64>,
        slots: usize,
    ) -> Vec<Result<Vec<EnsembleAccumulator>, DivergenceError>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            chunks.into_par_iter().map(|c| self.run_chunk(c, slots)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            chunks.map(|c| self.run_chunk(c, slots)).collect()
        }
    }
}

/// Integrates `config.n_trajectories` trajectories from the coherent ground state
/// and accumulates phase-space averages at each of `snapshot_times`.
///
/// Any diverging trajectory aborts the run; the error names the lowest diverging
/// trajectory index and its time.
pub fn run_ensemble(
    gs: &GroundState,
    lattice: &Lattice,
    params: &PhysicalParams,
    config: &SimConfig,
    snapshot_times: &[f64],
) -> Result<EnsembleRun> {
    run_ensemble_resumable(gs, lattice, params, config, snapshot_times, None)
}

/// Like [`run_ensemble`], persisting the accumulators to `checkpoint` after every
/// batch of chunks and continuing from it when the file already exists.
///
/// Resuming and extending `n_trajectories` reproduces an uninterrupted run bit for bit.
pub fn run_ensemble_resumable(
    gs: &GroundState,
    lattice: &Lattice,
    params: &PhysicalParams,
    config: &SimConfig,
    snapshot_times: &[f64],
    checkpoint: Option<&Path>,
) -> Result<EnsembleRun> {
    let (plan, actual_times) = Plan::new(gs, lattice, params, config, snapshot_times)?;
    let hash = config_hash(params, lattice.m_cells(), lattice.dx(), config, snapshot_times);
    let slots = snapshot_times.len();
    let mut totals = plan.empty(slots);

    if let Some(path) = checkpoint.filter(|p| p.exists()) {
        let loaded = load_checkpoint(path, hash, lattice.m_cells())?;
        if loaded.len() != slots {
            return Err(Error::Checkpoint(format!("checkpoint holds {} snapshots, run has {slots}", loaded.len())));
        }
        totals = loaded;
    }
    let done = totals[0].count;
    if done % CHUNK_SIZE != 0 && done != config.n_trajectories {
        return Err(Error::Checkpoint(format!("checkpoint count {done} is not on a chunk boundary")));
    }
    if done > config.n_trajectories {
        return Err(Error::Checkpoint(format!(
            "checkpoint already holds {done} trajectories, more than the requested {}",
            config.n_trajectories
        )));
    }

    let total_chunks = config.n_trajectories.div_ceil(CHUNK_SIZE);
    let mut chunk = done / CHUNK_SIZE;
    let batch = if checkpoint.is_some() { CHUNKS_PER_BATCH } else { total_chunks.max(1) };
    while chunk < total_chunks {
        let end = (chunk + batch).min(total_chunks);
        for result in plan.run_chunks(chunk..end, slots) {
            let accs = result?;
            for (t, a) in totals.iter_mut().zip(&accs) {
                t.merge(a);
            }
        }
        chunk = end;
        if let Some(path) = checkpoint {
            save_checkpoint(path, hash, &totals)?;
        }
    }

    Ok(EnsembleRun {
        snapshots: actual_times.into_iter().zip(totals).map(|(time, acc)| Snapshot { time, acc }).collect(),
        config_hash: hash,
        steps: plan.steps,
        dt: plan.dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpe::{solve_ground_state_with, GpeOptions};
    use num_complex::Complex64;

    fn small() -> (GroundState, Lattice, PhysicalParams) {
        let lattice = Lattice::new(3, 1.0).unwrap();
        let params = PhysicalParams::new(2.0, 0.5, 0.5).unwrap();
        let opts = GpeOptions { enforce_coverage: false, ..Default::default() };
        let gs = solve_ground_state_with(&lattice, &params, &opts).unwrap().0;
        (gs, lattice, params)
    }

    fn config(n: u64) -> SimConfig {
        SimConfig { dt: 1e-3, t_final: 0.1, n_trajectories: n, seed: 42, ..Default::default() }
    }

    #[test]
    fn flat_round_trip() {
        let mut acc = EnsembleAccumulator::new(3, 1);
        let s = TrajectoryState {
            alpha: vec![Complex64::new(1.0, 0.5); 3],
            beta: vec![Complex64::new(0.7, -0.2); 3],
            t: 0.0,
        };
        acc.add(&s, &[-1.0, 0.0, 1.0]);
        acc.add(&s, &[-1.0, 0.0, 1.0]);
        let back = EnsembleAccumulator::from_flat(&acc.to_flat()).unwrap();
        assert_eq!(back, acc);
        assert!(EnsembleAccumulator::from_flat(&acc.to_flat()[..20]).is_err());
    }

    #[test]
    fn merge_is_equivalent_to_sequential_adds() {
        let x = [-1.0, 0.0, 1.0];
        let states: Vec<TrajectoryState> = (0..4)
            .map(|k| TrajectoryState {
                alpha: vec![Complex64::new(1.0 + k as f64, 0.1); 3],
                beta: vec![Complex64::new(0.5, -0.3 * k as f64); 3],
                t: 0.0,
            })
            .collect();
        let mut whole = EnsembleAccumulator::new(3, 1);
        states.iter().for_each(|s| whole.add(s, &x));
        let mut a = EnsembleAccumulator::new(3, 1);
        let mut b = EnsembleAccumulator::new(3, 1);
        states[..2].iter().for_each(|s| a.add(s, &x));
        states[2..].iter().for_each(|s| b.add(s, &x));
        a.merge(&b);
        assert_eq!(a.count, 4);
        for (u, v) in a.to_flat().iter().zip(whole.to_flat()) {
            assert!((u - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }

    #[test]
    fn same_seed_replays_bit_for_bit() {
        let (gs, lattice, params) = small();
        let a = run_ensemble(&gs, &lattice, &params, &config(150), &[0.05, 0.1]).unwrap();
        let b = run_ensemble(&gs, &lattice, &params, &config(150), &[0.05, 0.1]).unwrap();
        assert_eq!(a.snapshots, b.snapshots);
        let c = run_ensemble(&gs, &lattice, &params, &SimConfig { seed: 43, ..config(150) }, &[0.05, 0.1]).unwrap();
        assert_ne!(a.snapshots, c.snapshots);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn worker_count_does_not_change_results() {
        let (gs, lattice, params) = small();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_ensemble(&gs, &lattice, &params, &config(300), &[0.1]).unwrap())
        };
        assert_eq!(run(1).snapshots, run(3).snapshots);
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let (gs, lattice, params) = small();
        let dir = std::env::temp_dir().join(format!("cmbec-resume-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("acc.ckpt");
        let _ = std::fs::remove_file(&path);
        let times = [0.0, 0.1];
        run_ensemble_resumable(&gs, &lattice, &params, &config(128), &times, Some(&path)).unwrap();
        let resumed = run_ensemble_resumable(&gs, &lattice, &params, &config(200), &times, Some(&path)).unwrap();
        let direct = run_ensemble(&gs, &lattice, &params, &config(200), &times).unwrap();
        assert_eq!(resumed.snapshots, direct.snapshots);
        // a different physical configuration must not pick up the file
        let other = params.with_kappa_tilde(1.0);
        assert!(matches!(
            run_ensemble_resumable(&gs, &lattice, &other, &config(256), &times, Some(&path)),
            Err(Error::Checkpoint(_))
        ));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn divergence_is_reported_with_index_and_time() {
        let (gs, lattice, params) = small();
        let cfg = SimConfig { divergence_threshold: Some(0.8), ..config(10) };
        match run_ensemble(&gs, &lattice, &params, &cfg, &[0.1]) {
            Err(Error::Divergence(e)) => {
                assert_eq!(e.trajectory, 0);
                assert!(e.time > 0.0 && e.time <= 0.1 + 1e-12);
                assert!(e.magnitude > 0.8);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_snapshots_outside_the_horizon() {
        let (gs, lattice, params) = small();
        assert!(run_ensemble(&gs, &lattice, &params, &config(10), &[0.2]).is_err());
        assert!(run_ensemble(&gs, &lattice, &params, &config(10), &[]).is_err());
    }

    #[test]
    fn initial_snapshot_is_the_coherent_state() {
        let (gs, lattice, params) = small();
        let run = run_ensemble(&gs, &lattice, &params, &config(70), &[0.0]).unwrap();
        let acc = &run.snapshots[0].acc;
        assert_eq!(acc.count, 70);
        for i in 0..3 {
            let n = gs.amplitudes[i].powi(2) * lattice.dx();
            assert!((acc.n_re[i] / 70.0 - n).abs() < 1e-12);
            assert_eq!(acc.n_im[i], 0.0);
        }
    }
}
