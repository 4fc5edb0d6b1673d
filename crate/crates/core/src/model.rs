//! Physical constants, potentials, the analytically continued ground state
//! and the initial trajectory manifold.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::Error;

/// Reduced Planck constant in atomic units.
pub const HBAR: f64 = 1.0;
/// Electron mass in atomic units.
pub const MASS: f64 = 1.0;
/// Elementary charge in atomic units.
pub const CHARGE: f64 = 1.0;

/// Ground-state energy of the 1D Coulomb atom.
pub const E0: f64 = -0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalSetup {
    pub ionization_potential: f64,
}

impl Default for PhysicalSetup {
    fn default() -> Self {
        Self { ionization_potential: 0.5 }
    }
}

/// Monochromatic field `F0 sin(omega t)` in the length gauge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldParams {
    pub f0: f64,
    pub omega: f64,
    pub n_periods: f64,
}

impl FieldParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return Err(Error::InvalidParameter("field strength must be positive"));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidParameter("field frequency must be positive"));
        }
        if !(self.n_periods >= 0.0) {
            return Err(Error::InvalidParameter("number of periods must be non-negative"));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// Field value at a complex time.
    pub fn value(&self, t: Complex64) -> Complex64 {
        (t * self.omega).sin() * self.f0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldDerived {
    pub up: f64,
    pub keldysh: f64,
    pub cutoff_energy: f64,
}

impl FieldDerived {
    pub fn cutoff_harmonic(&self, omega: f64) -> f64 {
        self.cutoff_energy / omega
    }
}

pub fn field_derived(field: &FieldParams, setup: &PhysicalSetup) -> FieldDerived {
    let up = field.f0 * field.f0 / (4.0 * field.omega * field.omega);
    let keldysh = field.omega * (2.0 * setup.ionization_potential).sqrt() / field.f0;
    FieldDerived { up, keldysh, cutoff_energy: 3.17 * up + setup.ionization_potential }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianBasisParams {
    pub gamma: f64,
}

impl GaussianBasisParams {
    pub fn new(gamma: f64) -> Result<Self, Error> {
        if gamma > 0.0 && gamma.is_finite() {
            Ok(Self { gamma })
        } else {
            Err(Error::InvalidParameter("gamma must be positive"))
        }
    }
}

fn check_branch(x: Complex64) -> Result<(), Error> {
    if x.re > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain("Re q must be positive"))
    }
}

/// `2x e^{-x}`, continued off the real axis on the positive branch.
pub fn eval_psi0(x: Complex64) -> Result<Complex64, Error> {
    check_branch(x)?;
    Ok(x * 2.0 * (-x).exp())
}

/// Real-axis ground state `2|x| e^{-|x|}` restricted to the half line.
pub fn psi0_real(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        2.0 * x * (-x).exp()
    }
}

/// `S0 = -i (ln 2q0 - q0)`; the logarithm of `2q0` is principal, which is
/// continuous on the whole half plane `Re q0 > 0`.
pub fn action0(q0: Complex64) -> Result<Complex64, Error> {
    check_branch(q0)?;
    Ok(-Complex64::i() * ((q0 * 2.0).ln() - q0))
}

pub fn momentum0(q0: Complex64) -> Result<Complex64, Error> {
    check_branch(q0)?;
    Ok(-Complex64::i() * (q0.inv() - 1.0))
}

pub fn alpha0(q0: Complex64) -> Result<Complex64, Error> {
    check_branch(q0)?;
    Ok(Complex64::i() / (q0 * q0))
}

/// Potential value and first two derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Potential {
    pub v: Complex64,
    pub dv: Complex64,
    pub d2v: Complex64,
}

/// `V = -1/q + q F0 sin(omega t)` for the positive Coulomb branch.
pub fn potential(q: Complex64, t: Complex64, field: Option<&FieldParams>) -> Result<Potential, Error> {
    if q.norm_sqr() == 0.0 {
        return Err(Error::Singular);
    }
    let inv = q.inv();
    let inv2 = inv * inv;
    let mut out = Potential { v: -inv, dv: inv2, d2v: inv2 * inv * -2.0 };
    if let Some(f) = field {
        let e = f.value(t) * CHARGE;
        out.v += q * e;
        out.dv += e;
    }
    Ok(out)
}

/// Axis-aligned rectangle in the complex `q0` plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl Rect {
    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re.0 && z.re <= self.re.1 && z.im >= self.im.0 && z.im <= self.im.1
    }
}

/// Union of rectangles; an empty list selects the whole manifold.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub name: String,
    pub rects: Vec<Rect>,
}

impl Mask {
    pub fn full(name: &str) -> Self {
        Self { name: name.into(), rects: Vec::new() }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.rects.is_empty() || self.rects.iter().any(|r| r.contains(z))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialManifold {
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    pub n_re: usize,
    pub n_im: usize,
    pub masks: Vec<Mask>,
}

impl Default for InitialManifold {
    fn default() -> Self {
        Self { re_range: (0.1, 6.0), im_range: (-2.0, 2.0), n_re: 120, n_im: 80, masks: Vec::new() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManifoldPoint {
    /// Row-major index, `i_im * n_re + i_re`.
    pub index: usize,
    pub q0: Complex64,
    pub p0: Complex64,
    pub alpha0: Complex64,
    pub s0: Complex64,
    pub weight: f64,
}

impl ManifoldPoint {
    pub fn new(index: usize, q0: Complex64, weight: f64) -> Result<Self, Error> {
        Ok(Self {
            index,
            q0,
            p0: momentum0(q0)?,
            alpha0: alpha0(q0)?,
            s0: action0(q0)?,
            weight,
        })
    }
}

impl InitialManifold {
    pub fn validate(&self) -> Result<(), Error> {
        if self.n_re == 0 || self.n_im == 0 {
            return Err(Error::EmptyGrid);
        }
        let (a, b) = self.re_range;
        let (c, d) = self.im_range;
        if !(a > 0.0 && b > a && d > c) || ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("manifold ranges must be ordered with Re q0 > 0"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_re * self.n_im
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        let dre = (self.re_range.1 - self.re_range.0) / self.n_re as f64;
        let dim = (self.im_range.1 - self.im_range.0) / self.n_im as f64;
        dre * dim
    }

    /// Cell-centered point `(i_re, i_im)`.
    pub fn point(&self, i_re: usize, i_im: usize) -> Complex64 {
        let dre = (self.re_range.1 - self.re_range.0) / self.n_re as f64;
        let dim = (self.im_range.1 - self.im_range.0) / self.n_im as f64;
        Complex64::new(
            self.re_range.0 + (i_re as f64 + 0.5) * dre,
            self.im_range.0 + (i_im as f64 + 0.5) * dim,
        )
    }

    pub fn mask(&self, name: &str) -> Option<&Mask> {
        self.masks.iter().find(|m| m.name == name)
    }
}

/// Uniform cell-centered grid with equal area weights, in row-major order.
pub fn build_manifold(spec: &InitialManifold) -> Result<Vec<ManifoldPoint>, Error> {
    spec.validate()?;
    let w = spec.cell_area();
    let mut out = Vec::with_capacity(spec.len());
    for i_im in 0..spec.n_im {
        for i_re in 0..spec.n_re {
            let q0 = spec.point(i_re, i_im);
            out.push(ManifoldPoint::new(i_im * spec.n_re + i_re, q0, w)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn psi0_values() {
        let v = eval_psi0(c(1.0, 0.0)).unwrap();
        assert_relative_eq!(v.re, 0.735_758_882_342_884_6, epsilon = 1e-15);
        let z = c(1.0, 1.0);
        let want = z * 2.0 * (-z).exp();
        assert_eq!(eval_psi0(z).unwrap(), want);
        assert!(eval_psi0(c(0.0, 1.0)).is_err());
        assert!(eval_psi0(c(-1.0, 0.0)).is_err());
    }

    #[test]
    fn action_values() {
        let s = action0(c(1.0, 0.0)).unwrap();
        assert_relative_eq!(s.im, 0.306_852_819_440_054_7, epsilon = 1e-14);
        assert_relative_eq!(s.re, 0.0, epsilon = 1e-15);
        let s = action0(c(core::f64::consts::E / 2.0, 0.0)).unwrap();
        assert_relative_eq!(s.im, 0.359_140_914_229_522_6, epsilon = 1e-14);
        assert!(action0(c(0.0, 0.0)).is_err());
    }

    #[test]
    fn momentum_and_alpha() {
        assert_eq!(momentum0(c(1.0, 0.0)).unwrap(), c(0.0, 0.0));
        assert_eq!(alpha0(c(1.0, 0.0)).unwrap(), c(0.0, 1.0));
        assert_relative_eq!(momentum0(c(2.0, 0.0)).unwrap().im, 0.5);
        assert_relative_eq!(alpha0(c(2.0, 0.0)).unwrap().im, 0.25);
    }

    #[test]
    fn potential_values() {
        let p = potential(c(1.0, 0.0), c(0.0, 0.0), None).unwrap();
        assert_eq!((p.v, p.dv, p.d2v), (c(-1.0, 0.0), c(1.0, 0.0), c(-2.0, 0.0)));
        let p = potential(c(0.0, 1.0), c(0.0, 0.0), None).unwrap();
        assert_relative_eq!(p.v.im, 1.0, epsilon = 1e-15);
        let f = FieldParams { f0: 0.0735, omega: 0.0735, n_periods: 4.0 };
        let t = c(PI / (2.0 * f.omega), 0.0);
        let p = potential(c(1.0, 0.0), t, Some(&f)).unwrap();
        assert_relative_eq!(p.v.re, -1.0 + 0.0735, epsilon = 1e-14);
        assert!(potential(c(0.0, 0.0), t, None).is_err());
    }

    #[test]
    fn derived_field_quantities() {
        let f = FieldParams { f0: 0.0735, omega: 0.0735, n_periods: 4.0 };
        let d = field_derived(&f, &PhysicalSetup::default());
        assert_eq!(d.keldysh, 1.0);
        assert_relative_eq!(d.up, 0.25, epsilon = 1e-15);
        assert_relative_eq!(d.cutoff_energy, 1.2925, epsilon = 1e-14);
        assert_relative_eq!(d.cutoff_harmonic(f.omega), 17.585, epsilon = 1e-3);
    }

    #[test]
    fn single_point_manifold() {
        let spec = InitialManifold {
            re_range: (0.5, 1.5),
            im_range: (-0.5, 0.5),
            n_re: 1,
            n_im: 1,
            masks: Vec::new(),
        };
        let pts = build_manifold(&spec).unwrap();
        assert_eq!(pts.len(), 1);
        let p = pts[0];
        assert_eq!(p.q0, c(1.0, 0.0));
        assert_eq!(p.p0, c(0.0, 0.0));
        assert_eq!(p.alpha0, c(0.0, 1.0));
        assert_relative_eq!(p.s0.im, -(2.0f64.ln() - 1.0), epsilon = 1e-15);
        assert_eq!(p.weight, 1.0);
    }

    #[test]
    fn manifold_counts_and_weights() {
        let spec = InitialManifold { n_re: 12, n_im: 8, ..Default::default() };
        let pts = build_manifold(&spec).unwrap();
        assert_eq!(pts.len(), 96);
        let area: f64 = pts.iter().map(|p| p.weight).sum();
        assert_relative_eq!(area, 5.9 * 4.0, epsilon = 1e-12);
        assert!(pts.iter().all(|p| p.q0.re > 0.0));
        assert!(pts.iter().enumerate().all(|(i, p)| p.index == i));
    }

    #[test]
    fn manifold_rejects_bad_ranges() {
        let mut spec = InitialManifold { n_re: 0, ..Default::default() };
        assert_eq!(build_manifold(&spec), Err(Error::EmptyGrid));
        spec.n_re = 4;
        spec.re_range = (-0.1, 1.0);
        assert!(build_manifold(&spec).is_err());
    }

    #[test]
    fn masks_select_subsets() {
        let spec = InitialManifold {
            n_re: 10,
            n_im: 10,
            masks: alloc::vec![Mask {
                name: "ionization-1".into(),
                rects: alloc::vec![Rect { re: (0.1, 2.0), im: (0.0, 2.0) }],
            }],
            ..Default::default()
        };
        let pts = build_manifold(&spec).unwrap();
        let mask = spec.mask("ionization-1").unwrap();
        let n = pts.iter().filter(|p| mask.contains(p.q0)).count();
        assert!(n > 0 && n < pts.len());
        assert!(Mask::full("all").contains(c(100.0, 100.0)));
    }
}
