//! Split-operator reference solver for the half-line Coulomb problem with
//! a Dirichlet node at the origin.

use std::f64::consts::PI;
use std::sync::Arc;

use hhg_core::model::{self, FieldParams};
use hhg_core::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Absorber {
    /// Start of the mask as a fraction of `x_max`.
    pub onset: f64,
    /// Per-step mask is `cos(pi/2 * u)^exponent` with `u` in `[0, 1]`.
    pub exponent: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantumGrid {
    pub x_max: f64,
    /// Number of intervals; the unknowns sit at the `n - 1` interior nodes.
    pub n_intervals: usize,
    pub dt: f64,
    pub absorber: Option<Absorber>,
    /// Floor on `-1/x` near the origin.
    pub v_cap: f64,
}

impl Default for QuantumGrid {
    fn default() -> Self {
        Self { x_max: 600.0, n_intervals: 1 << 14, dt: 0.0025, absorber: Some(Absorber { onset: 0.8, exponent: 0.125 }), v_cap: 1e3 }
    }
}

impl QuantumGrid {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !self.n_intervals.is_power_of_two() || self.n_intervals < 4 {
            return Err("quantum grid size must be a power of two of at least 4");
        }
        if !(self.x_max > 0.0 && self.x_max.is_finite()) {
            return Err("quantum x_max must be positive");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err("quantum dt must be positive");
        }
        if !(self.v_cap > 0.0) {
            return Err("v_cap must be positive");
        }
        if let Some(a) = self.absorber {
            if !(a.onset > 0.5 && a.onset < 1.0) {
                return Err("absorber onset must lie in (0.5, 1)");
            }
            if !(a.exponent > 0.0) {
                return Err("absorber exponent must be positive");
            }
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.x_max / self.n_intervals as f64
    }

    /// Interior nodes `x_j = j dx`, `j = 1 .. n-1`.
    pub fn nodes(&self) -> Vec<f64> {
        (1..self.n_intervals).map(|j| j as f64 * self.dx()).collect()
    }

    /// Largest step not above `dt` that divides `span` into whole steps.
    pub fn snapped_dt(dt: f64, span: f64) -> (f64, usize) {
        let n = (span / dt).ceil().max(1.0) as usize;
        (span / n as f64, n)
    }
}

pub struct SplitOperator {
    grid: QuantumGrid,
    x: Vec<f64>,
    kinetic: Vec<Complex64>,
    k2_half: Vec<f64>,
    mask: Option<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
    spectrum: Vec<Complex64>,
}

impl SplitOperator {
    pub fn new(grid: QuantumGrid) -> Result<Self, &'static str> {
        grid.validate()?;
        let n = grid.n_intervals;
        let x = grid.nodes();
        let k2_half: Vec<f64> = (1..n)
            .map(|m| {
                let k = PI * m as f64 / grid.x_max;
                0.5 * k * k
            })
            .collect();
        let kinetic = k2_half.iter().map(|e| Complex64::from_polar(1.0, -e * grid.dt)).collect();
        let mask = grid.absorber.map(|a| {
            let start = a.onset * grid.x_max;
            x.iter()
                .map(|&xv| if xv <= start { 1.0 } else { (0.5 * PI * (xv - start) / (grid.x_max - start)).cos().max(0.0).powf(a.exponent) })
                .collect()
        });
        let fft = FftPlanner::new().plan_fft_forward(2 * n);
        let scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        Ok(Self {
            grid,
            x,
            kinetic,
            k2_half,
            mask,
            fft,
            buf: vec![Complex64::new(0.0, 0.0); 2 * n],
            scratch,
            spectrum: vec![Complex64::new(0.0, 0.0); n - 1],
        })
    }

    pub fn grid(&self) -> &QuantumGrid {
        &self.grid
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Unnormalized sine transform `out_m = sum_j u_j sin(pi j m / n)` via
    /// an FFT of the odd extension.
    fn sine_transform(&mut self, input: &[Complex64], out: &mut [Complex64]) {
        let n = self.grid.n_intervals;
        let zero = Complex64::new(0.0, 0.0);
        self.buf[0] = zero;
        self.buf[n] = zero;
        for j in 1..n {
            self.buf[j] = input[j - 1];
            self.buf[2 * n - j] = -input[j - 1];
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let half_i = Complex64::new(0.0, 0.5);
        for m in 1..n {
            out[m - 1] = self.buf[m] * half_i;
        }
    }

    fn potential(&self, x: f64, t: f64, field: Option<&FieldParams>) -> f64 {
        let coulomb = (-1.0 / x).max(-self.grid.v_cap);
        coulomb + field.map_or(0.0, |f| model::CHARGE * x * f.f0 * (f.omega * t).sin())
    }

    /// `2x e^{-x}` on the interior nodes, normalized on the grid.
    pub fn ground_state(&self) -> Vec<Complex64> {
        let mut psi: Vec<Complex64> = self.x.iter().map(|&x| Complex64::new(model::psi0_real(x), 0.0)).collect();
        let n = self.norm(&psi).sqrt();
        for v in psi.iter_mut() {
            *v /= n;
        }
        psi
    }

    pub fn norm(&self, psi: &[Complex64]) -> f64 {
        psi.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    /// `<a|b>` by the grid quadrature.
    pub fn overlap(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(u, v)| u.conj() * v).sum::<Complex64>() * self.grid.dx()
    }

    /// `<H>` per unit norm, kinetic part evaluated spectrally.
    pub fn energy(&mut self, psi: &[Complex64], t: f64, field: Option<&FieldParams>) -> f64 {
        let n = self.grid.n_intervals;
        let mut s = std::mem::take(&mut self.spectrum);
        self.sine_transform(psi, &mut s);
        let kinetic: f64 = s.iter().zip(&self.k2_half).map(|(v, e)| v.norm_sqr() * e).sum::<f64>() * 2.0 / n as f64;
        self.spectrum = s;
        let potential: f64 = psi.iter().zip(&self.x).map(|(v, &x)| v.norm_sqr() * self.potential(x, t, field)).sum();
        (kinetic + potential) * self.grid.dx() / self.norm(psi)
    }

    /// One Strang step from `t` to `t + dt`, the potential taken at the
    /// midpoint, followed by the absorbing mask.
    pub fn step(&mut self, psi: &mut [Complex64], t: f64, field: Option<&FieldParams>) {
        let dt = self.grid.dt;
        let tm = t + 0.5 * dt;
        for (v, &x) in psi.iter_mut().zip(&self.x) {
            *v *= Complex64::from_polar(1.0, -0.5 * dt * self.potential(x, tm, field));
        }
        let mut s = std::mem::take(&mut self.spectrum);
        self.sine_transform(psi, &mut s);
        for (v, k) in s.iter_mut().zip(&self.kinetic) {
            *v *= k;
        }
        self.sine_transform(&s, psi);
        self.spectrum = s;
        let scale = 2.0 / self.grid.n_intervals as f64;
        for (v, &x) in psi.iter_mut().zip(&self.x) {
            *v *= Complex64::from_polar(scale, -0.5 * dt * self.potential(x, tm, field));
        }
        if let Some(mask) = &self.mask {
            for (v, m) in psi.iter_mut().zip(mask) {
                *v *= m;
            }
        }
    }

    /// Take `n_steps` steps from `t0`. The observer sees the state after
    /// every `stride`-th step, starting with the initial state.
    pub fn evolve<F>(&mut self, psi: &mut [Complex64], t0: f64, n_steps: usize, field: Option<&FieldParams>, stride: usize, mut observer: F)
    where
        F: FnMut(usize, f64, &[Complex64]),
    {
        let stride = stride.max(1);
        observer(0, t0, psi);
        for k in 1..=n_steps {
            let t = t0 + (k - 1) as f64 * self.grid.dt;
            self.step(psi, t, field);
            if k % stride == 0 {
                observer(k, t0 + k as f64 * self.grid.dt, psi);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> QuantumGrid {
        QuantumGrid { x_max: 100.0, n_intervals: 1 << 12, dt: 0.02, absorber: None, v_cap: 1e3 }
    }

    #[test]
    fn ground_state_is_normalized_and_peaks_at_one() {
        let so = SplitOperator::new(small()).unwrap();
        let psi = so.ground_state();
        assert!((so.norm(&psi) - 1.0).abs() < 1e-10);
        let (k, _) = psi.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap();
        assert!((so.x()[k] - 1.0).abs() <= so.grid().dx());
    }

    #[test]
    fn sine_transform_round_trips() {
        let mut so = SplitOperator::new(QuantumGrid { n_intervals: 64, ..small() }).unwrap();
        let u: Vec<Complex64> = (0..63).map(|j| Complex64::new((j as f64 * 0.3).sin(), (j as f64).cos())).collect();
        let mut s = vec![Complex64::new(0.0, 0.0); 63];
        let mut back = s.clone();
        so.sine_transform(&u, &mut s);
        so.sine_transform(&s, &mut back);
        for (a, b) in u.iter().zip(&back) {
            assert!((a - b * (2.0 / 64.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_steps_return_the_initial_state() {
        let mut so = SplitOperator::new(small()).unwrap();
        let mut psi = so.ground_state();
        let before = psi.clone();
        let mut seen = 0;
        so.evolve(&mut psi, 0.0, 0, None, 1, |_, _, _| seen += 1);
        assert_eq!(psi, before);
        assert_eq!(seen, 1);
    }

    #[test]
    fn invalid_grids_are_rejected() {
        assert!(QuantumGrid { n_intervals: 1000, ..small() }.validate().is_err());
        assert!(QuantumGrid { dt: 0.0, ..small() }.validate().is_err());
        assert!(QuantumGrid { absorber: Some(Absorber { onset: 0.3, exponent: 1.0 }), ..small() }.validate().is_err());
    }

    #[test]
    fn snapping_divides_the_span() {
        let half = PI / 0.0735;
        let (dt, n) = QuantumGrid::snapped_dt(0.02, half);
        assert!(dt <= 0.02);
        assert!((dt * n as f64 - half).abs() < 1e-9);
    }
}
