//! Final-value coherent-state (FINCO) reconstruction of the wavefunction
//! from trajectory end points.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::model::{self, ManifoldPoint, Mask};
use crate::trajectory::{StabilityMatrix, Status, TrajectoryState};
use crate::Error;

/// Per-trajectory Gaussian data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianFrame {
    pub xi: Complex64,
    pub q_bar: f64,
    pub p_bar: f64,
    pub sigma: Complex64,
    pub phi: Complex64,
    pub jac: f64,
    pub gamma: f64,
}

/// `xi = 2 gamma q - i p`, split into a real phase-space center.
pub fn coherent_label(q: Complex64, p: Complex64, gamma: f64) -> (Complex64, f64, f64) {
    let xi = q * (2.0 * gamma) - Complex64::i() * p;
    (xi, xi.re / (2.0 * gamma), -xi.im)
}

/// `sigma = i S_cl + p^2 / (4 gamma) - (Im xi)^2 / (4 gamma)`.
pub fn sigma_exponent(s_cl: Complex64, p: Complex64, xi: Complex64, gamma: f64) -> Complex64 {
    let h = model::HBAR;
    Complex64::i() * s_cl / h + p * p / (4.0 * gamma * h * h) - xi.im * xi.im / (4.0 * gamma)
}

pub fn dxi_dq0(m: &StabilityMatrix, alpha0: Complex64, gamma: f64) -> Complex64 {
    let i = Complex64::i();
    (m.qp * (2.0 * gamma) - i * m.pp) * alpha0 + (m.qq * (2.0 * gamma) - i * m.pq)
}

/// Cutoff on `|dxi/dq0|` below which a point counts as a caustic.
pub const CAUSTIC_CUTOFF: f64 = 1e-10;

/// `(|dxi/dq0|^2, (8 gamma pi)^{1/4} (dxi/dq0)^{-1/2})` with the square root
/// taken on the branch given by the continuous argument `arg`.
pub fn jacobian_and_prefactor(dxi: Complex64, arg: f64, gamma: f64) -> Result<(f64, Complex64), Error> {
    let r = dxi.norm();
    if !(r >= CAUSTIC_CUTOFF) {
        return Err(Error::Caustic);
    }
    let phi = Complex64::from_polar((8.0 * gamma * PI).powf(0.25) / r.sqrt(), -0.5 * arg);
    Ok((r * r, phi))
}

pub fn frame_from_state(state: &TrajectoryState, gamma: f64) -> Result<GaussianFrame, Error> {
    let (xi, q_bar, p_bar) = coherent_label(state.q, state.p, gamma);
    let sigma = sigma_exponent(state.s_cl, state.p, xi, gamma);
    let (jac, phi) = jacobian_and_prefactor(state.dxi(gamma), state.dxi_arg, gamma)?;
    Ok(GaussianFrame { xi, q_bar, p_bar, sigma, phi, jac, gamma })
}

/// Normalized ket Gaussian `(2g/pi)^{1/4} exp(-g (x-q)^2 + i p (x-q))`.
pub fn gaussian_value(x: f64, q_bar: f64, p_bar: f64, gamma: f64) -> Complex64 {
    let d = x - q_bar;
    let norm = (2.0 * gamma / PI).powf(0.25);
    Complex64::from_polar(norm * (-gamma * d * d).exp(), p_bar * d)
}

pub fn gaussian_eval(x: &[f64], frame: &GaussianFrame) -> Vec<Complex64> {
    x.iter().map(|&xv| gaussian_value(xv, frame.q_bar, frame.p_bar, frame.gamma)).collect()
}

/// Complex amplitudes on a real grid.
#[derive(Clone, Debug, PartialEq)]
pub struct WavefunctionGrid {
    pub x: Vec<f64>,
    pub psi: Vec<Complex64>,
}

impl WavefunctionGrid {
    pub fn zeros(x: Vec<f64>) -> Self {
        let n = x.len();
        Self { x, psi: vec![Complex64::new(0.0, 0.0); n] }
    }

    /// Uniform grid of `n` points on `[a, b]`.
    pub fn uniform(a: f64, b: f64, n: usize) -> Self {
        let x = (0..n).map(|k| if n > 1 { a + (b - a) * k as f64 / (n - 1) as f64 } else { a }).collect();
        Self::zeros(x)
    }

    pub fn ground_state(x: Vec<f64>, t: f64) -> Self {
        let mut g = Self::zeros(x);
        add_core_state(&mut g, t);
        g
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterSettings {
    pub sigma_cap: f64,
    pub caustic_cutoff: f64,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self { sigma_cap: 2.0, caustic_cutoff: CAUSTIC_CUTOFF }
    }
}

/// A frame that survived filtering, with its quadrature weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contribution {
    pub index: usize,
    pub weight: f64,
    pub frame: GaussianFrame,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FilterReport {
    pub kept: usize,
    pub flagged: usize,
    pub caustic: usize,
    pub sigma_capped: usize,
    pub masked: usize,
}

/// Why a point was left out of the sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rejection {
    Masked,
    Flagged,
    Caustic,
    SigmaCapped,
}

/// Filter one point. `None` states count as flagged.
pub fn classify(
    point: &ManifoldPoint,
    state: Option<&TrajectoryState>,
    mask: Option<&Mask>,
    gamma: f64,
    settings: &FilterSettings,
) -> Result<Contribution, Rejection> {
    if mask.is_some_and(|m| !m.contains(point.q0)) {
        return Err(Rejection::Masked);
    }
    let st = match state {
        Some(s) if s.status == Status::Alive => s,
        _ => return Err(Rejection::Flagged),
    };
    if st.dxi(gamma).norm() < settings.caustic_cutoff {
        return Err(Rejection::Caustic);
    }
    let frame = frame_from_state(st, gamma).map_err(|_| Rejection::Caustic)?;
    if !(frame.sigma.re <= settings.sigma_cap) {
        return Err(Rejection::SigmaCapped);
    }
    Ok(Contribution { index: point.index, weight: point.weight, frame })
}

impl FilterReport {
    pub fn record(&mut self, outcome: &Result<Contribution, Rejection>) {
        match outcome {
            Ok(_) => self.kept += 1,
            Err(Rejection::Masked) => self.masked += 1,
            Err(Rejection::Flagged) => self.flagged += 1,
            Err(Rejection::Caustic) => self.caustic += 1,
            Err(Rejection::SigmaCapped) => self.sigma_capped += 1,
        }
    }

    pub fn merge(&mut self, other: &FilterReport) {
        self.kept += other.kept;
        self.masked += other.masked;
        self.flagged += other.flagged;
        self.caustic += other.caustic;
        self.sigma_capped += other.sigma_capped;
    }
}

/// Drop flagged trajectories, caustics, points with `Re sigma` above the cap
/// and points outside `mask`. `None` states count as flagged.
pub fn filter_trajectories(
    points: &[ManifoldPoint],
    states: &[Option<TrajectoryState>],
    mask: Option<&Mask>,
    gamma: f64,
    settings: &FilterSettings,
) -> (Vec<Contribution>, FilterReport) {
    let mut out = Vec::new();
    let mut rep = FilterReport::default();
    for (pt, st) in points.iter().zip(states) {
        let outcome = classify(pt, st.as_ref(), mask, gamma, settings);
        rep.record(&outcome);
        if let Ok(c) = outcome {
            out.push(c);
        }
    }
    (out, rep)
}

/// Gaussians are summed only where `gamma (x - q)^2` stays below this.
const GAUSSIAN_REACH: f64 = 40.0;

/// Riemann sum `sum w |dxi/dq0|^2 / (4 pi gamma) g(x) phi e^sigma`, in the
/// given order. `x` must be ascending.
pub fn reconstruct(contribs: &[Contribution], x: &[f64]) -> WavefunctionGrid {
    let mut out = WavefunctionGrid::zeros(x.to_vec());
    accumulate(&mut out, contribs);
    out
}

pub fn accumulate(grid: &mut WavefunctionGrid, contribs: &[Contribution]) {
    for c in contribs {
        let f = &c.frame;
        let amp = f.phi * f.sigma.exp() * (c.weight * f.jac / (4.0 * PI * f.gamma));
        if !(amp.re.is_finite() && amp.im.is_finite()) {
            continue;
        }
        let reach = (GAUSSIAN_REACH / f.gamma).sqrt();
        let lo = grid.x.partition_point(|&v| v < f.q_bar - reach);
        let hi = grid.x.partition_point(|&v| v <= f.q_bar + reach);
        for k in lo..hi {
            grid.psi[k] += amp * gaussian_value(grid.x[k], f.q_bar, f.p_bar, f.gamma);
        }
    }
}

/// Add `Psi0(x) e^{it/2}`.
pub fn add_core_state(grid: &mut WavefunctionGrid, t: f64) {
    let phase = Complex64::from_polar(1.0, -model::E0 * t);
    for (x, v) in grid.x.iter().zip(grid.psi.iter_mut()) {
        *v += phase * model::psi0_real(*x);
    }
}

/// Discrete relative L2 distance `|a - b| / |b|` on a common uniform grid.
pub fn relative_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(u, v)| (u - v).norm_sqr()).sum();
    let den: f64 = b.iter().map(|v| v.norm_sqr()).sum();
    (num / den).sqrt()
}

/// Projection coefficient `<b|a> / <b|b>`.
pub fn projection(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let num: Complex64 = a.iter().zip(b).map(|(u, v)| v.conj() * u).sum();
    let den: f64 = b.iter().map(|v| v.norm_sqr()).sum();
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn labels() {
        let (xi, q, p) = coherent_label(c(1.0, 0.0), c(0.0, 0.0), 0.5);
        assert_eq!((xi, q, p), (c(1.0, 0.0), 1.0, 0.0));
        let (xi, q, p) = coherent_label(c(1.0, 1.0), c(2.0, -1.0), 0.5);
        assert_relative_eq!(xi.re, 0.0, epsilon = 1e-15);
        assert_relative_eq!(xi.im, -1.0, epsilon = 1e-15);
        assert_relative_eq!(q, 0.0, epsilon = 1e-15);
        assert_relative_eq!(p, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn sigma_at_t0() {
        let (xi, _, _) = coherent_label(c(1.0, 0.0), c(0.0, 0.0), 0.5);
        assert_eq!(sigma_exponent(c(0.0, 0.0), c(0.0, 0.0), xi, 0.5), c(0.0, 0.0));
        let p0 = model::momentum0(c(2.0, 0.0)).unwrap();
        let (xi, _, _) = coherent_label(c(2.0, 0.0), p0, 0.5);
        assert_relative_eq!(xi.re, 2.5, epsilon = 1e-15);
        let s = sigma_exponent(c(0.0, 0.0), p0, xi, 0.5);
        assert_relative_eq!(s.re, -0.125, epsilon = 1e-15);
    }

    #[test]
    fn prefactor_at_unit_point() {
        let d = dxi_dq0(&StabilityMatrix::identity(), c(0.0, 1.0), 0.5);
        assert_eq!(d, c(2.0, 0.0));
        let (jac, phi) = jacobian_and_prefactor(d, 0.0, 0.5).unwrap();
        assert_eq!(jac, 4.0);
        assert_relative_eq!(phi.re, (4.0 * PI).powf(0.25) / 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(jacobian_and_prefactor(c(1e-12, 0.0), 0.0, 0.5), Err(Error::Caustic));
    }

    #[test]
    fn prefactor_follows_branch() {
        let d = c(-1.0, 1e-3);
        let (_, a) = jacobian_and_prefactor(d, d.arg(), 0.5).unwrap();
        let (_, b) = jacobian_and_prefactor(d, d.arg() - 2.0 * PI, 0.5).unwrap();
        assert_relative_eq!((a + b).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn gaussian_peak_and_norm() {
        let g = gaussian_value(0.0, 0.0, 0.0, 0.5);
        assert_relative_eq!(g.re, PI.powf(-0.25), epsilon = 1e-15);
        let grid = WavefunctionGrid::uniform(-20.0, 20.0, 4001);
        let f = GaussianFrame {
            xi: c(0.0, 0.0),
            q_bar: 1.0,
            p_bar: 3.0,
            sigma: c(0.0, 0.0),
            phi: c(1.0, 0.0),
            jac: 1.0,
            gamma: 0.5,
        };
        let v = gaussian_eval(&grid.x, &f);
        let dx = grid.x[1] - grid.x[0];
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx;
        assert_relative_eq!(norm, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn core_state_phase() {
        let x = alloc::vec![0.5, 1.0, 2.0];
        let g = WavefunctionGrid::ground_state(x.clone(), 4.0 * PI);
        for (k, &xv) in x.iter().enumerate() {
            assert_relative_eq!(g.psi[k].re, model::psi0_real(xv), epsilon = 1e-14);
            assert_relative_eq!(g.psi[k].im, 0.0, epsilon = 1e-14);
        }
        let g = WavefunctionGrid::ground_state(x, PI);
        assert_relative_eq!(g.psi[1].im, model::psi0_real(1.0), epsilon = 1e-14);
    }

    #[test]
    fn empty_reconstruction_is_zero() {
        let g = reconstruct(&[], &[0.5, 1.0]);
        assert!(g.psi.iter().all(|z| *z == c(0.0, 0.0)));
    }
}
