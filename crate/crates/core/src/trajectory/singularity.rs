use alloc::vec::Vec;

use num_complex::Complex64;

use super::{propagate_segment, Propagator, Segment, Status, TrajectoryState};
use crate::Error;

/// Estimated collision time together with the march that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularityEstimate {
    pub t_s: Complex64,
    /// Points `(t, q)` visited while approaching the singularity.
    pub approach: Vec<(Complex64, Complex64)>,
}

/// Fraction of the predicted distance covered per probe ray.
const PROBE_FRACTION: f64 = 0.75;
/// Approach stops once `|q|` drops below this.
const Q_DETECT: f64 = 1e-4;
const MAX_RAYS: usize = 80;
/// Points used in the final regression.
const WINDOW: usize = 6;

/// Locate the nearest collision time ahead of `state`.
///
/// Near a Coulomb collision `q ≈ C (t - t_s)^{2/3}`, so `q^{3/2}` is linear
/// in `t` and each point predicts `t_s ≈ t - 2q/(3p)`. The state is carried
/// along successive probe rays towards that prediction until the collision
/// guard trips or `|q|` is small; `t_s` is then the root of a straight-line
/// fit of `q^{3/2}` against `t` over the final rays.
pub fn detect_singularity_time(
    state: &TrajectoryState,
    horizon: f64,
    prop: &Propagator<'_>,
) -> Result<SingularityEstimate, Error> {
    let mut st = *state;
    let start = st.t;
    let mut approach = Vec::new();
    approach.push((st.t, st.q));
    for _ in 0..MAX_RAYS {
        let d = -st.q / st.p * (2.0 / 3.0);
        if !(d.norm() < horizon) || !((st.t + d - start).norm() < horizon) {
            return Err(Error::NoSingularity);
        }
        if st.q.norm() < Q_DETECT || d.norm() < 1e-13 {
            break;
        }
        let seg = Segment::Line { from: st.t, to: st.t + d * PROBE_FRACTION };
        st = propagate_segment(&st, &seg, prop)?;
        approach.push((st.t, st.q));
        match st.status {
            Status::Alive => {}
            Status::SingularHit => break,
            Status::Diverged => return Err(Error::NoSingularity),
        }
    }
    if st.q.norm() >= Q_DETECT && st.status == Status::Alive {
        return Err(Error::NoSingularity);
    }
    let t_s = regress_root(&approach, WINDOW).unwrap_or_else(|| st.t - st.q / st.p * (2.0 / 3.0));
    Ok(SingularityEstimate { t_s, approach })
}

/// Root of the least-squares line through `(t, q^{3/2})` over the last
/// `window` points, with the square root continued along the sequence.
pub(crate) fn regress_root(points: &[(Complex64, Complex64)], window: usize) -> Option<Complex64> {
    if window < 2 || points.len() < 2 {
        return None;
    }
    let pts = &points[points.len().saturating_sub(window)..];
    let mut w: Vec<Complex64> = Vec::with_capacity(pts.len());
    for &(_, q) in pts {
        let mut v = q * q.sqrt();
        if let Some(&prev) = w.last() {
            if (v / prev).re < 0.0 {
                v = -v;
            }
        }
        w.push(v);
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<Complex64>() / n;
    let wm = w.iter().sum::<Complex64>() / n;
    let mut stt = Complex64::new(0.0, 0.0);
    let mut stw = Complex64::new(0.0, 0.0);
    for (p, wi) in pts.iter().zip(&w) {
        let dt = p.0 - tm;
        stt += dt.conj() * dt;
        stw += dt.conj() * (wi - wm);
    }
    if stt.norm() == 0.0 {
        return None;
    }
    let slope = stw / stt;
    if slope.norm() == 0.0 {
        return None;
    }
    Some(tm - wm / slope)
}
