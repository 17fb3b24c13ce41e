//! Closed-form second moments without interactions.
//!
//! # Free oscillator with momentum diffusion
//!
//! For the Wigner equation `dW/dt = (-p dx + x dp + kappa~ dp^2) W` (m = w0 = 1)
//! the Heisenberg-Langevin motion is a rotation of `(x, p)` plus momentum kicks
//! of intensity `2 kappa~`:
//!
//! ```text
//! x(t) =  x c + p s + int_0^t sin(t - u) dB(u)
//! p(t) = -x s + p c + int_0^t cos(t - u) dB(u),     c = cos t, s = sin t
//! ```
//!
//! Taking second moments, with `C = <{x,p}> = 2 <xp>_sym`:
//!
//! ```text
//! <dx^2>(t)  = c^2 vx + s^2 vp + s c C + kappa~ (t - sin 2t / 2)
//! <dp^2>(t)  = s^2 vx + c^2 vp - s c C + kappa~ (t + sin 2t / 2)
//! <{x,p}>(t) = 2 s c (vp - vx) + (c^2 - s^2) C + kappa~ (1 - cos 2t)
//! ```
//!
//! The noise terms follow from `2 kappa~ int_0^t sin^2 u du`, `2 kappa~ int_0^t cos^2 u du`
//! and `2 * 2 kappa~ int_0^t sin u cos u du`.
//!
//! # Linear closure with arbitrary restoring coefficient
//!
//! The closed moment system at `g1D = 0` reads `x' = C`, `p' = -C + 2k`,
//! `C' = 2p - c x`. Differentiating, `C'' = -(2 + c) C + 4k`, so with
//! `w^2 = 2 + c`
//!
//! ```text
//! C(t) = C0 cos wt + (C0'/w) sin wt + (4k / w^2)(1 - cos wt),    C0' = 2 p0 - c x0
//! x(t) = x0 + int_0^t C
//! p(t) = p0 - int_0^t C + 2 k t
//! ```
//!
//! For `c = 2` this coincides with the rotating-quadrature solution above.

use crate::meanfield::MomentState;

/// Exact moments of the non-interacting measured oscillator at time `t`.
pub fn analytic_moments_noninteracting(t: f64, kappa_tilde: f64, initial: &MomentState) -> MomentState {
    let (s, c) = t.sin_cos();
    let (vx, vp, cc) = (initial.var_x, initial.var_p, initial.cov_xp);
    let s2t = (2.0 * t).sin();
    MomentState {
        var_x: c * c * vx + s * s * vp + s * c * cc + kappa_tilde * (t - 0.5 * s2t),
        var_p: s * s * vx + c * c * vp - s * c * cc + kappa_tilde * (t + 0.5 * s2t),
        cov_xp: 2.0 * s * c * (vp - vx) + (c * c - s * s) * cc + kappa_tilde * (1.0 - (2.0 * t).cos()),
    }
}

/// Closed-form solution of the linear (`g1D = 0`) moment system with restoring coefficient `c`.
pub fn linear_closure_moments(restoring: f64, kappa_tilde: f64, initial: &MomentState, t: f64) -> MomentState {
    let w2 = 2.0 + restoring;
    let w = w2.sqrt();
    let (x0, p0, c0) = (initial.var_x, initial.var_p, initial.cov_xp);
    let dc0 = 2.0 * p0 - restoring * x0;
    let forcing = 4.0 * kappa_tilde / w2;
    let (s, c) = (w * t).sin_cos();
    let cov = c0 * c + dc0 / w * s + forcing * (1.0 - c);
    let int_cov = c0 * s / w + dc0 / w2 * (1.0 - c) + forcing * (t - s / w);
    MomentState { var_x: x0 + int_cov, var_p: p0 - int_cov + 2.0 * kappa_tilde * t, cov_xp: cov }
}
