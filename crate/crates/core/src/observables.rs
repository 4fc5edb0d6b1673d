//! Dipole acceleration, post-symmetrization and harmonic spectra.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::model::{FieldParams, CHARGE};
use crate::Error;

/// `a(t) = ∫ |Psi|^2 dV/dx dx` over the half line, trapezoid rule.
///
/// `x` must be ascending and positive. The interval `[0, x_0]` is included
/// using the limit `|Psi/x|^2` at the origin, valid for states that vanish
/// linearly there.
pub fn dipole_acceleration(x: &[f64], psi: &[Complex64], t: f64, field: Option<&FieldParams>) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let e = field.map_or(0.0, |f| CHARGE * f.f0 * (f.omega * t).sin());
    let integrand = |k: usize| psi[k].norm_sqr() * (1.0 / (x[k] * x[k]) + e);
    let mut sum = 0.0;
    if x[0] > 0.0 {
        let origin = psi[0].norm_sqr() / (x[0] * x[0]);
        sum += 0.5 * x[0] * (origin + integrand(0));
    }
    for k in 1..x.len() {
        sum += 0.5 * (x[k] - x[k - 1]) * (integrand(k) + integrand(k - 1));
    }
    sum
}

/// Number of samples in half a field period, if `dt` divides it.
pub fn half_period_shift(dt: f64, omega: f64) -> Result<usize, Error> {
    let half = PI / omega;
    let n = (half / dt).round();
    if n < 1.0 || (n * dt - half).abs() > 1e-9 * half {
        return Err(Error::StrideMismatch);
    }
    Ok(n as usize)
}

/// `a(t) - a(t - pi/omega)` on the samples that have a partner half a period
/// earlier. Element `j` of the result belongs to input sample `j + shift`.
pub fn post_symmetrize(a: &[f64], dt: f64, omega: f64) -> Result<Vec<f64>, Error> {
    let n = half_period_shift(dt, omega)?;
    if a.len() <= n {
        return Err(Error::StrideMismatch);
    }
    Ok((n..a.len()).map(|j| a[j] - a[j - n]).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    fn weight(&self, j: usize, n: usize) -> f64 {
        match self {
            Window::Hann => 0.5 * (1.0 - (2.0 * PI * j as f64 / n as f64).cos()),
            Window::Rectangular => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumResult {
    pub harmonic_order: Vec<f64>,
    pub power_db: Vec<f64>,
    pub cutoff_marker: f64,
    pub fundamental_marker: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumSettings {
    pub window: Window,
    pub max_harmonic: f64,
    /// Frequency samples per DFT bin.
    pub oversample: usize,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        Self { window: Window::Hann, max_harmonic: 40.0, oversample: 2 }
    }
}

/// Floor applied before taking logarithms.
const POWER_FLOOR: f64 = 1e-300;

/// Windowed discrete Fourier transform of a uniformly sampled series that
/// spans an integer number of field periods, as `20 log10 |a(Omega)|`
/// against `Omega / omega`.
pub fn hhg_spectrum(
    a: &[f64],
    dt: f64,
    omega: f64,
    cutoff_marker: f64,
    settings: &SpectrumSettings,
) -> Result<SpectrumResult, Error> {
    let n = a.len();
    let periods = n as f64 * dt * omega / (2.0 * PI);
    if n == 0 || (periods - periods.round()).abs() > 1e-6 || periods.round() < 1.0 {
        return Err(Error::NonIntegerPeriods);
    }
    let per_harmonic = periods.round() as usize * settings.oversample.max(1);
    let n_freq = (settings.max_harmonic * per_harmonic as f64).floor() as usize + 1;
    let windowed: Vec<f64> = a.iter().enumerate().map(|(j, v)| v * settings.window.weight(j, n)).collect();
    let mut harmonic_order = Vec::with_capacity(n_freq);
    let mut power_db = Vec::with_capacity(n_freq);
    for k in 0..n_freq {
        let h = k as f64 / per_harmonic as f64;
        let w = h * omega * dt;
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, v) in windowed.iter().enumerate() {
            acc += Complex64::from_polar(*v, -w * j as f64);
        }
        harmonic_order.push(h);
        power_db.push(20.0 * (acc.norm() * dt).max(POWER_FLOOR).log10());
    }
    Ok(SpectrumResult { harmonic_order, power_db, cutoff_marker, fundamental_marker: 1.0 })
}

impl SpectrumResult {
    pub fn max_db(&self) -> f64 {
        self.power_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Shift so that `reference` maps to 0 dB.
    pub fn normalized(&self, reference: f64) -> Self {
        let mut out = self.clone();
        for v in out.power_db.iter_mut() {
            *v -= reference;
        }
        out
    }

    /// Largest power within `[h - half_width, h + half_width]` and where it
    /// occurs.
    pub fn peak_near(&self, h: f64, half_width: f64) -> Option<(f64, f64)> {
        self.harmonic_order
            .iter()
            .zip(&self.power_db)
            .filter(|(x, _)| (**x - h).abs() <= half_width)
            .fold(None, |best: Option<(f64, f64)>, (x, p)| match best {
                Some((_, bp)) if bp >= *p => best,
                _ => Some((*x, *p)),
            })
    }

    /// Power at the sample closest to harmonic `h`.
    pub fn power_at(&self, h: f64) -> Option<f64> {
        self.harmonic_order
            .iter()
            .zip(&self.power_db)
            .min_by(|a, b| (a.0 - h).abs().total_cmp(&(b.0 - h).abs()))
            .map(|(_, p)| *p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakComparison {
    pub harmonic: u32,
    pub position_1: f64,
    pub position_2: f64,
    pub height_1: f64,
    pub height_2: f64,
}

impl PeakComparison {
    pub fn position_delta(&self) -> f64 {
        self.position_2 - self.position_1
    }

    pub fn height_delta(&self) -> f64 {
        self.height_2 - self.height_1
    }
}

/// Locate the maxima near each odd harmonic up to `max_order` in both
/// spectra. The spectra must share their frequency axis.
pub fn compare_spectra(s1: &SpectrumResult, s2: &SpectrumResult, max_order: u32) -> Vec<PeakComparison> {
    let mut out = Vec::new();
    for h in (1..=max_order).step_by(2) {
        let (Some(p1), Some(p2)) = (s1.peak_near(h as f64, 0.75), s2.peak_near(h as f64, 0.75)) else {
            continue;
        };
        out.push(PeakComparison { harmonic: h, position_1: p1.0, position_2: p2.0, height_1: p1.1, height_2: p2.1 });
    }
    out
}

/// Highest odd harmonic whose peak lies within `drop_db` of the plateau
/// level, taken as the median odd-harmonic peak over `plateau`.
pub fn plateau_cutoff(s: &SpectrumResult, plateau: (u32, u32), drop_db: f64) -> Option<u32> {
    let odd_peak = |h: u32| s.peak_near(h as f64, 0.5).map(|p| p.1);
    let mut levels: Vec<f64> = (plateau.0..=plateau.1).filter(|h| h % 2 == 1).filter_map(odd_peak).collect();
    if levels.is_empty() {
        return None;
    }
    levels.sort_by(f64::total_cmp);
    let level = levels[levels.len() / 2];
    let top = s.harmonic_order.last().copied().unwrap_or(0.0).floor() as u32;
    (1..=top).filter(|h| h % 2 == 1).filter(|&h| odd_peak(h).is_some_and(|p| p >= level - drop_db)).max()
}

/// Smallest margin, in dB, by which each even harmonic in `[2, up_to]`,
/// read at its exact frequency, lies below the weaker of its odd neighbours'
/// peaks.
pub fn even_suppression(s: &SpectrumResult, up_to: u32) -> Option<f64> {
    let peak = |h: u32| s.peak_near(h as f64, 0.5).map(|p| p.1);
    (2..=up_to)
        .step_by(2)
        .filter_map(|h| Some(peak(h - 1)?.min(peak(h + 1)?) - s.power_at(h as f64)?))
        .min_by(f64::total_cmp)
}

/// Local minima of `amp` inside `region` that dip below `depth` times both
/// neighbouring maxima, refined by a parabola through three samples.
pub fn find_nodes(x: &[f64], amp: &[f64], region: (f64, f64), depth: f64) -> Vec<f64> {
    let n = amp.len().min(x.len());
    let mut out = Vec::new();
    for k in 1..n.saturating_sub(1) {
        if x[k] < region.0 || x[k] > region.1 || !(amp[k] <= amp[k - 1] && amp[k] < amp[k + 1]) {
            continue;
        }
        let mut l = k;
        while l > 0 && amp[l - 1] >= amp[l] {
            l -= 1;
        }
        let mut r = k;
        while r + 1 < n && amp[r + 1] >= amp[r] {
            r += 1;
        }
        if !(amp[k] < depth * amp[l].min(amp[r])) {
            continue;
        }
        let curv = amp[k - 1] - 2.0 * amp[k] + amp[k + 1];
        let shift = if curv > 0.0 { 0.5 * (amp[k - 1] - amp[k + 1]) / curv } else { 0.0 };
        out.push(x[k] + shift * 0.5 * (x[k + 1] - x[k - 1]));
    }
    out
}

/// Remove `2 pi` jumps between consecutive phases.
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(phases.len());
    for &p in phases {
        let next = match out.last() {
            Some(&prev) => {
                let mut d = p - prev;
                d -= 2.0 * PI * (d / (2.0 * PI)).round();
                prev + d
            }
            None => p,
        };
        out.push(next);
    }
    out
}

/// Least-squares slope of `y` against `t`.
pub fn linear_slope(t: &[f64], y: &[f64]) -> Option<f64> {
    let n = t.len().min(y.len());
    if n < 2 {
        return None;
    }
    let tm = t[..n].iter().sum::<f64>() / n as f64;
    let ym = y[..n].iter().sum::<f64>() / n as f64;
    let sxy: f64 = t[..n].iter().zip(&y[..n]).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let sxx: f64 = t[..n].iter().map(|a| (a - tm) * (a - tm)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::psi0_real;
    use alloc::vec;
    use approx::assert_relative_eq;

    const OMEGA: f64 = 0.0735;

    #[test]
    fn ground_state_acceleration_is_two() {
        let dx = 1e-3;
        let x: Vec<f64> = (1..=40_000).map(|k| k as f64 * dx).collect();
        let psi: Vec<Complex64> = x.iter().map(|&v| Complex64::new(psi0_real(v), 0.0)).collect();
        let a = dipole_acceleration(&x, &psi, 0.0, None);
        assert_relative_eq!(a, 2.0, epsilon = 1e-5);
        assert_eq!(dipole_acceleration(&x, &vec![Complex64::new(0.0, 0.0); x.len()], 0.0, None), 0.0);
    }

    #[test]
    fn symmetrization_cases() {
        let n_half = 64;
        let dt = PI / OMEGA / n_half as f64;
        let t: Vec<f64> = (0..8 * n_half).map(|j| j as f64 * dt).collect();
        let c = post_symmetrize(&vec![3.0; t.len()], dt, OMEGA).unwrap();
        assert!(c.iter().all(|v| *v == 0.0));
        let s: Vec<f64> = t.iter().map(|t| (OMEGA * t).sin()).collect();
        let out = post_symmetrize(&s, dt, OMEGA).unwrap();
        for (j, v) in out.iter().enumerate() {
            assert_relative_eq!(*v, 2.0 * (OMEGA * t[j + n_half]).sin(), epsilon = 1e-12);
        }
        let s2: Vec<f64> = t.iter().map(|t| (2.0 * OMEGA * t).sin()).collect();
        assert!(post_symmetrize(&s2, dt, OMEGA).unwrap().iter().all(|v| v.abs() < 1e-12));
        assert_eq!(post_symmetrize(&s, dt * 1.01, OMEGA), Err(Error::StrideMismatch));
    }

    #[test]
    fn pure_tone_spectrum() {
        let n = 4 * 128;
        let dt = 2.0 * PI / OMEGA / 128.0;
        let a: Vec<f64> = (0..n).map(|j| 2.0 * (OMEGA * j as f64 * dt).sin()).collect();
        let s = hhg_spectrum(&a, dt, OMEGA, 17.6, &SpectrumSettings::default()).unwrap();
        let (pos, peak) = s.peak_near(1.0, 0.5).unwrap();
        assert_eq!(pos, 1.0);
        assert_eq!(peak, s.max_db());
        for h in [2.0, 3.0, 5.0] {
            assert!(s.power_at(h).unwrap() < peak - 40.0);
        }
        assert_eq!(s.cutoff_marker, 17.6);
        assert_eq!(s.fundamental_marker, 1.0);
        assert_eq!(hhg_spectrum(&a[..n - 7], dt, OMEGA, 17.6, &SpectrumSettings::default()), Err(Error::NonIntegerPeriods));
    }

    #[test]
    fn identical_and_shifted_comparisons() {
        let n = 4 * 128;
        let dt = 2.0 * PI / OMEGA / 128.0;
        let a: Vec<f64> = (0..n)
            .map(|j| {
                let t = OMEGA * j as f64 * dt;
                t.sin() + 0.3 * (3.0 * t).sin() + 0.1 * (5.0 * t).sin()
            })
            .collect();
        let s = hhg_spectrum(&a, dt, OMEGA, 17.6, &SpectrumSettings::default()).unwrap();
        for p in compare_spectra(&s, &s, 5) {
            assert_eq!(p.position_delta(), 0.0);
            assert_eq!(p.height_delta(), 0.0);
        }
        let shifted = s.normalized(-3.0);
        for p in compare_spectra(&s, &shifted, 5) {
            assert_relative_eq!(p.height_delta(), 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn nodes_of_a_standing_wave() {
        let x: Vec<f64> = (0..2001).map(|k| k as f64 * 0.01).collect();
        let amp: Vec<f64> = x.iter().map(|v| (PI * v / 4.0).sin().abs()).collect();
        let nodes = find_nodes(&x, &amp, (1.0, 19.0), 0.5);
        assert_eq!(nodes.len(), 4);
        for (n, want) in nodes.iter().zip([4.0, 8.0, 12.0, 16.0]) {
            assert!((n - want).abs() < 0.01);
        }
        let shallow: Vec<f64> = x.iter().map(|v| 1.0 + 0.1 * (PI * v / 4.0).cos()).collect();
        assert!(find_nodes(&x, &shallow, (0.0, 20.0), 0.5).is_empty());
    }

    #[test]
    fn phases_unwrap_to_a_line() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.7).collect();
        let wrapped: Vec<f64> = t.iter().map(|v| Complex64::from_polar(1.0, 0.5 * v).arg()).collect();
        let slope = linear_slope(&t, &unwrap_phases(&wrapped)).unwrap();
        assert_relative_eq!(slope, 0.5, epsilon = 1e-12);
        assert_eq!(linear_slope(&[1.0], &[2.0]), None);
    }

    #[test]
    fn cutoff_and_even_suppression_of_a_synthetic_plateau() {
        let n_half = 64;
        let dt = PI / OMEGA / n_half as f64;
        let a: Vec<f64> = (0..8 * n_half)
            .map(|j| {
                let w = OMEGA * j as f64 * dt;
                (1..=25).step_by(2).map(|h| if h <= 17 { 1.0 } else { 1e-3 } * (h as f64 * w).sin()).sum()
            })
            .collect();
        let s = hhg_spectrum(&a, dt, OMEGA, 17.6, &SpectrumSettings::default()).unwrap();
        assert_eq!(plateau_cutoff(&s, (5, 13), 10.0), Some(17));
        assert!(even_suppression(&s, 20).unwrap() > 30.0);
    }
}
