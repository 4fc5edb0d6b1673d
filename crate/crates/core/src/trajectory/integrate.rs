use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use super::{rhs, Propagator, Status, TimeContour, TrajectoryState, DIM};
use crate::Error;

/// Piece of a complex-time contour, parametrized by `s` in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Segment {
    Line {
        from: Complex64,
        to: Complex64,
    },
    /// Circle around `center`, starting and ending at
    /// `center + radius * exp(i start_angle)`.
    Loop {
        center: Complex64,
        radius: f64,
        start_angle: f64,
        turns: u32,
        /// `+1` counter-clockwise, `-1` clockwise.
        direction: i8,
    },
}

impl Segment {
    pub fn start(&self) -> Complex64 {
        match *self {
            Segment::Line { from, .. } => from,
            Segment::Loop { center, radius, start_angle, .. } => center + Complex64::from_polar(radius, start_angle),
        }
    }

    pub fn end(&self) -> Complex64 {
        match *self {
            Segment::Line { to, .. } => to,
            Segment::Loop { .. } => self.start(),
        }
    }

    fn sweep(&self) -> f64 {
        match *self {
            Segment::Line { .. } => 0.0,
            Segment::Loop { turns, direction, .. } => 2.0 * PI * turns as f64 * direction as f64,
        }
    }

    pub fn at(&self, s: f64) -> Complex64 {
        match *self {
            Segment::Line { from, to } => from + (to - from) * s,
            Segment::Loop { center, radius, start_angle, .. } => {
                center + Complex64::from_polar(radius, start_angle + self.sweep() * s)
            }
        }
    }

    pub fn dt_ds(&self, s: f64) -> Complex64 {
        match *self {
            Segment::Line { from, to } => to - from,
            Segment::Loop { center, .. } => Complex64::i() * self.sweep() * (self.at(s) - center),
        }
    }

    pub fn turns(&self) -> u32 {
        match *self {
            Segment::Line { .. } => 0,
            Segment::Loop { turns, .. } => turns,
        }
    }

    /// Geometric length of the path.
    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { from, to } => (to - from).norm(),
            Segment::Loop { radius, .. } => radius * self.sweep().abs(),
        }
    }
}

/// Returned by step observers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// One accepted step of a dense path record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathPoint {
    pub s: f64,
    pub t: Complex64,
    pub q: Complex64,
    pub p: Complex64,
    pub sheet_index: i32,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = B1 - 5179.0 / 57600.0;
const E3: f64 = B3 - 7571.0 / 16695.0;
const E4: f64 = B4 - 393.0 / 640.0;
const E5: f64 = B5 + 92097.0 / 339200.0;
const E6: f64 = B6 - 187.0 / 2100.0;
const E7: f64 = -1.0 / 40.0;

type Vector = [Complex64; DIM];

fn combine(y: &Vector, h: f64, terms: &[(f64, &Vector)]) -> Vector {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, k) in terms {
            acc += k[i] * *a;
        }
        *o += acc * h;
    }
    out
}

fn finite(y: &Vector) -> bool {
    y.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

struct Step {
    y: Vector,
    k7: Vector,
    err: f64,
}

fn dopri_step<F>(f: &F, y: &Vector, k1: &Vector, s: f64, h: f64, atol: f64, rtol: f64) -> Result<Step, Error>
where
    F: Fn(&Vector, f64) -> Result<Vector, Error>,
{
    let k2 = f(&combine(y, h, &[(A21, k1)]), s + C2 * h)?;
    let k3 = f(&combine(y, h, &[(A31, k1), (A32, &k2)]), s + C3 * h)?;
    let k4 = f(&combine(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]), s + C4 * h)?;
    let k5 = f(&combine(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]), s + C5 * h)?;
    let k6 = f(&combine(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]), s + h)?;
    let y_new = combine(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(&y_new, s + h)?;
    let mut err = 0.0f64;
    for i in 0..DIM {
        let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        let sc = atol + rtol * Float::max(y[i].norm(), y_new[i].norm());
        err = Float::max(err, e.norm() / sc);
    }
    Ok(Step { y: y_new, k7, err })
}

/// Propagate along one segment, calling `observer` after each accepted step.
/// Returns the state where integration ended and whether the observer
/// stopped it early.
pub(crate) fn propagate_observed<F>(
    state: &TrajectoryState,
    seg: &Segment,
    prop: &Propagator<'_>,
    mut observer: F,
) -> Result<(TrajectoryState, bool), Error>
where
    F: FnMut(&TrajectoryState, f64) -> Flow,
{
    let mut st = *state;
    st.t = seg.start();
    if !st.is_alive() || seg.length() == 0.0 {
        return Ok((st, false));
    }
    let tol = prop.tol;
    let f = |y: &Vector, s: f64| -> Result<Vector, Error> {
        let mut d = rhs(y, seg.at(s), prop.field)?;
        let w = seg.dt_ds(s);
        for o in d.iter_mut() {
            *o *= w;
        }
        Ok(d)
    };

    let mut y = st.pack();
    let mut s = 0.0;
    let scale = Float::max(y[0].norm(), 1e-3);
    let mut h = Float::min(1.0, 1e-2 * scale * scale.sqrt() / seg.dt_ds(0.0).norm());
    let mut k1 = match f(&y, s) {
        Ok(k) => k,
        Err(_) => {
            st.status = Status::SingularHit;
            return Ok((st, false));
        }
    };
    let mut dxi_prev = st.dxi(prop.gamma);
    let mut steps = 0usize;

    while s < 1.0 {
        steps += 1;
        if steps > tol.max_steps {
            return Err(Error::ToleranceFailure);
        }
        let last = s + h >= 1.0;
        if last {
            h = 1.0 - s;
        }
        if h * seg.dt_ds(s).norm() < tol.h_min && !last {
            st.unpack(&y);
            if y[0].norm() < 1e-3 {
                st.status = Status::SingularHit;
                return Ok((st, false));
            }
            return Err(Error::ToleranceFailure);
        }

        let step = match dopri_step(&f, &y, &k1, s, h, tol.atol, tol.rtol) {
            Ok(step) => step,
            Err(_) => {
                // A stage landed on q = 0 exactly.
                h *= 0.5;
                continue;
            }
        };
        if !(step.err <= 1.0) || !finite(&step.y) {
            let fac = if step.err.is_finite() { 0.9 * step.err.powf(-0.2) } else { 0.1 };
            h *= fac.clamp(0.1, 0.5);
            continue;
        }

        let mut next = st;
        next.unpack(&step.y);
        let dxi = next.dxi(prop.gamma);
        let turn = if dxi.norm() > 0.0 && dxi_prev.norm() > 0.0 {
            (dxi * dxi_prev.conj()).arg()
        } else {
            0.0
        };
        if turn.abs() > FRAC_PI_2 && h * seg.dt_ds(s).norm() > tol.h_min {
            h *= 0.25;
            continue;
        }

        s = if last { 1.0 } else { s + h };
        next.t = if last { seg.end() } else { seg.at(s) };
        next.dxi_arg += turn;
        y = step.y;
        k1 = step.k7;
        if dxi.norm() > 0.0 {
            dxi_prev = dxi;
        }
        st = next;

        let qn = y[0].norm();
        if !(qn <= tol.overflow && y[1].norm() <= tol.overflow) {
            st.status = Status::Diverged;
            return Ok((st, false));
        }
        if qn < tol.q_min {
            st.status = Status::SingularHit;
            return Ok((st, false));
        }
        if observer(&st, s) == Flow::Stop {
            return Ok((st, true));
        }
        let fac = if step.err > 0.0 { 0.9 * step.err.powf(-0.2) } else { 5.0 };
        h *= fac.clamp(0.2, 5.0);
    }
    Ok((st, false))
}

/// Adaptive Dormand–Prince integration of the equations of motion along one
/// segment. Flagged states (diverged, singular hit) are returned as such.
pub fn propagate_segment(state: &TrajectoryState, seg: &Segment, prop: &Propagator<'_>) -> Result<TrajectoryState, Error> {
    propagate_observed(state, seg, prop, |_, _| Flow::Continue).map(|(s, _)| s)
}

/// Propagate through every segment of a contour. Each completed loop advances
/// the sheet index by its number of turns.
pub fn run_trajectory(
    state: &TrajectoryState,
    contour: &TimeContour,
    prop: &Propagator<'_>,
    mut path: Option<&mut Vec<PathPoint>>,
) -> Result<TrajectoryState, Error> {
    let mut st = *state;
    if let Some(p) = path.as_deref_mut() {
        p.push(PathPoint { s: 0.0, t: st.t, q: st.q, p: st.p, sheet_index: st.sheet_index });
    }
    for (k, seg) in contour.segments.iter().enumerate() {
        let sheet = st.sheet_index;
        let (next, _) = propagate_observed(&st, seg, prop, |x, s| {
            if let Some(p) = path.as_deref_mut() {
                p.push(PathPoint { s: k as f64 + s, t: x.t, q: x.q, p: x.p, sheet_index: sheet });
            }
            Flow::Continue
        })?;
        st = next;
        if !st.is_alive() {
            break;
        }
        st.sheet_index += seg.turns() as i32;
    }
    Ok(st)
}
