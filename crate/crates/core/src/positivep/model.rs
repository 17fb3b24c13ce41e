//! Stochastic equations of one trajectory.
//!
//! With `chi = g1D / dx` and `s = sqrt(2 kappa~)` the Ito equations are
//!
//! ```text
//! d alpha_i = [-i (U alpha)_i - 2 i chi n_i alpha_i - kappa~ x_i^2 alpha_i] dt
//!             + sqrt(chi) (1 - i) alpha_i dW_i  + i s x_i alpha_i dW
//! d beta_i  = [+i (U beta)_i  + 2 i chi n_i beta_i  - kappa~ x_i^2 beta_i ] dt
//!             + sqrt(chi) (1 + i) beta_i  dV_i  - i s x_i beta_i  dW
//! ```
//!
//! with `M` increments `dW_i` for the alpha block, `M` increments `dV_i` for the
//! beta block and one collective measurement increment `dW` shared by every cell.
//! Written out in real components these are the four blocks
//!
//! ```text
//! A'_i  =  (U a'')_i + 2 chi (n''_i a'_i + n'_i a''_i) - kappa~ x_i^2 a'_i
//! A''_i = -(U a')_i  - 2 chi (n'_i a'_i - n''_i a''_i) - kappa~ x_i^2 a''_i
//! B'_i  = -(U b'')_i - 2 chi (n''_i b'_i + n'_i b''_i) - kappa~ x_i^2 b'_i
//! B''_i =  (U b')_i  + 2 chi (n'_i b'_i - n''_i b''_i) - kappa~ x_i^2 b''_i
//! ```
//!
//! # Stratonovich form
//!
//! Each noise column acts on a single complex variable linearly, `b = c z dW`, so
//! the correction `-1/2 sum_l b_l d b_k / d a_l` reduces to `-1/2 c^2 z`:
//!
//! * collisions: `c^2 = chi (1 -/+ i)^2 = -/+ 2 i chi`, adding `+ i chi alpha_i` and `- i chi beta_i`;
//! * measurement: `c^2 = (+/- i s x_i)^2 = -2 kappa~ x_i^2`, adding `+ kappa~ x_i^2` times the
//!   variable, which cancels the Ito damping exactly.
//!
//! The Stratonovich drift is therefore
//!
//! ```text
//! alpha_i: -i [(U alpha)_i + chi (2 n_i - 1) alpha_i]
//! beta_i:  +i [(U beta)_i  + chi (2 n_i - 1) beta_i ]
//! ```
//!
//! and the measurement enters only through the noise.

use num_complex::Complex64;

use super::state::TrajectoryState;
use super::Scheme;
use crate::error::DivergenceError;
use crate::lattice::{HoppingMatrix, Lattice};
use crate::params::PhysicalParams;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Wiener increments for one step: `2M` collision increments (alpha block, then
/// beta block) and one measurement increment.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrements {
    pub interaction: Vec<f64>,
    pub measurement: f64,
}

impl NoiseIncrements {
    pub fn zeros(m_cells: usize) -> Self {
        Self { interaction: vec![0.0; 2 * m_cells], measurement: 0.0 }
    }
}

/// Coefficients of the stochastic equations on a fixed lattice.
#[derive(Debug, Clone)]
pub struct Model {
    diag: Vec<f64>,
    hop: f64,
    chi: f64,
    sqrt_chi: f64,
    kappa_tilde: f64,
    meas_amp: f64,
    x: Vec<f64>,
    x2: Vec<f64>,
    measurement_sign: f64,
}

/// Scratch buffers reused across steps.
#[derive(Debug, Clone)]
pub struct Workspace {
    na: Vec<Complex64>,
    nb: Vec<Complex64>,
    am: Vec<Complex64>,
    bm: Vec<Complex64>,
    ta: Vec<Complex64>,
    tb: Vec<Complex64>,
}

impl Workspace {
    pub fn new(m: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); m];
        Self { na: z.clone(), nb: z.clone(), am: z.clone(), bm: z.clone(), ta: z.clone(), tb: z }
    }
}

impl Model {
    pub fn new(params: &PhysicalParams, lattice: &Lattice, hopping: &HoppingMatrix) -> Self {
        let chi = params.g1d / lattice.dx();
        let x = lattice.positions().to_vec();
        Self {
            diag: hopping.diagonal(),
            hop: hopping.hop(),
            chi,
            sqrt_chi: chi.sqrt(),
            kappa_tilde: params.kappa_tilde,
            meas_amp: (2.0 * params.kappa_tilde).sqrt(),
            x2: x.iter().map(|v| v * v).collect(),
            x,
            measurement_sign: 1.0,
        }
    }

    pub fn with_measurement_sign(mut self, sign: f64) -> Self {
        self.measurement_sign = sign;
        self
    }

    pub fn m_cells(&self) -> usize {
        self.diag.len()
    }

    #[inline]
    fn hop_at(&self, v: &[Complex64], i: usize) -> Complex64 {
        let m = v.len();
        let mut s = v[i] * self.diag[i];
        if i > 0 {
            s += v[i - 1] * self.hop;
        }
        if i + 1 < m {
            s += v[i + 1] * self.hop;
        }
        s
    }

    /// Ito drift of `(alpha, beta)`.
    pub fn ito_drift(&self, alpha: &[Complex64], beta: &[Complex64], da: &mut [Complex64], db: &mut [Complex64]) {
        for i in 0..alpha.len() {
            let n = alpha[i] * beta[i];
            let damp = self.kappa_tilde * self.x2[i];
            da[i] = -I * (self.hop_at(alpha, i) + 2.0 * self.chi * n * alpha[i]) - damp * alpha[i];
            db[i] = I * (self.hop_at(beta, i) + 2.0 * self.chi * n * beta[i]) - damp * beta[i];
        }
    }

    /// Stratonovich drift of `(alpha, beta)`.
    pub fn stratonovich_drift(
        &self,
        alpha: &[Complex64],
        beta: &[Complex64],
        da: &mut [Complex64],
        db: &mut [Complex64],
    ) {
        for i in 0..alpha.len() {
            let w = self.chi * (2.0 * alpha[i] * beta[i] - 1.0);
            da[i] = -I * (self.hop_at(alpha, i) + w * alpha[i]);
            db[i] = I * (self.hop_at(beta, i) + w * beta[i]);
        }
    }

    /// Multiplicative noise factors `c_i` such that the noise on `alpha_i` is `c_i alpha_i`.
    fn noise_factors(&self, dw: &NoiseIncrements, na: &mut [Complex64], nb: &mut [Complex64]) {
        let m = self.m_cells();
        let meas = self.measurement_sign * self.meas_amp * dw.measurement;
        for i in 0..m {
            let wa = self.sqrt_chi * dw.interaction[i];
            let wb = self.sqrt_chi * dw.interaction[m + i];
            let mx = meas * self.x[i];
            na[i] = Complex64::new(wa, -wa + mx);
            nb[i] = Complex64::new(wb, wb - mx);
        }
    }

    /// Noise contribution `B(a) dW` in complex form.
    pub fn noise(
        &self,
        alpha: &[Complex64],
        beta: &[Complex64],
        dw: &NoiseIncrements,
        da: &mut [Complex64],
        db: &mut [Complex64],
    ) {
        self.noise_factors(dw, da, db);
        for i in 0..alpha.len() {
            da[i] *= alpha[i];
            db[i] *= beta[i];
        }
    }

    /// Advances `state` by `dt`.
    pub fn step(
        &self,
        state: &mut TrajectoryState,
        dt: f64,
        dw: &NoiseIncrements,
        scheme: Scheme,
        iterations: usize,
        ws: &mut Workspace,
    ) {
        let m = self.m_cells();
        self.noise_factors(dw, &mut ws.na, &mut ws.nb);
        match scheme {
            Scheme::EulerMaruyama => {
                self.ito_drift(&state.alpha, &state.beta, &mut ws.ta, &mut ws.tb);
                for i in 0..m {
                    let (a, b) = (state.alpha[i], state.beta[i]);
                    state.alpha[i] = a + ws.ta[i] * dt + ws.na[i] * a;
                    state.beta[i] = b + ws.tb[i] * dt + ws.nb[i] * b;
                }
            }
            Scheme::SemiImplicit => {
                let half = 0.5 * dt;
                ws.am.copy_from_slice(&state.alpha);
                ws.bm.copy_from_slice(&state.beta);
                for _ in 0..iterations {
                    for i in 0..m {
                        let (a, b) = (ws.am[i], ws.bm[i]);
                        let w = self.chi * (2.0 * a * b - 1.0);
                        let fa = -I * (self.hop_at(&ws.am, i) + w * a);
                        let fb = I * (self.hop_at(&ws.bm, i) + w * b);
                        ws.ta[i] = state.alpha[i] + fa * half + 0.5 * ws.na[i] * a;
                        ws.tb[i] = state.beta[i] + fb * half + 0.5 * ws.nb[i] * b;
                    }
                    std::mem::swap(&mut ws.am, &mut ws.ta);
                    std::mem::swap(&mut ws.bm, &mut ws.tb);
                }
                for i in 0..m {
                    state.alpha[i] = 2.0 * ws.am[i] - state.alpha[i];
                    state.beta[i] = 2.0 * ws.bm[i] - state.beta[i];
                }
            }
        }
        state.t += dt;
    }

    /// Fails when any `|n_i|` exceeds `threshold` or the state stops being finite.
    pub fn check_divergence(
        &self,
        state: &TrajectoryState,
        threshold: f64,
        trajectory: u64,
    ) -> Result<(), DivergenceError> {
        for i in 0..state.m_cells() {
            let n = state.occupation(i);
            let mag = n.norm();
            if !(mag <= threshold) {
                return Err(DivergenceError { trajectory, time: state.t, cell: i, magnitude: mag });
            }
        }
        Ok(())
    }
}

fn complex_to_real(da: &[Complex64], db: &[Complex64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(4 * da.len());
    v.extend(da.iter().map(|z| z.re));
    v.extend(da.iter().map(|z| z.im));
    v.extend(db.iter().map(|z| z.re));
    v.extend(db.iter().map(|z| z.im));
    v
}

/// Ito drift as a real `4M` vector `(A', A'', B', B'')`.
pub fn drift(state: &TrajectoryState, params: &PhysicalParams, lattice: &Lattice, hopping: &HoppingMatrix) -> Vec<f64> {
    let model = Model::new(params, lattice, hopping);
    let m = state.m_cells();
    let (mut da, mut db) = (vec![Complex64::default(); m], vec![Complex64::default(); m]);
    model.ito_drift(&state.alpha, &state.beta, &mut da, &mut db);
    complex_to_real(&da, &db)
}

/// Stratonovich drift as a real `4M` vector.
pub fn stratonovich_drift(
    state: &TrajectoryState,
    params: &PhysicalParams,
    lattice: &Lattice,
    hopping: &HoppingMatrix,
) -> Vec<f64> {
    let model = Model::new(params, lattice, hopping);
    let m = state.m_cells();
    let (mut da, mut db) = (vec![Complex64::default(); m], vec![Complex64::default(); m]);
    model.stratonovich_drift(&state.alpha, &state.beta, &mut da, &mut db);
    complex_to_real(&da, &db)
}

/// `B(a) dW` as a real `4M` vector.
pub fn noise_increment(
    state: &TrajectoryState,
    params: &PhysicalParams,
    lattice: &Lattice,
    dw: &NoiseIncrements,
) -> Vec<f64> {
    let model = Model::new(params, lattice, &HoppingMatrix::new(lattice));
    let m = state.m_cells();
    let (mut da, mut db) = (vec![Complex64::default(); m], vec![Complex64::default(); m]);
    model.noise(&state.alpha, &state.beta, dw, &mut da, &mut db);
    complex_to_real(&da, &db)
}
