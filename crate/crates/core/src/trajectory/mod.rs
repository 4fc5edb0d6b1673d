//! Complex trajectories and their stability matrices along complex-time
//! contours.

mod contour;
mod integrate;
mod singularity;

pub use contour::{
    loop_closure, run_recipe, ClosureReport, ContourRecipe, ContourSettings, Excursion, Observation, Process,
    RecipeRun, TimeContour,
};
pub use integrate::{propagate_segment, run_trajectory, Flow, PathPoint, Segment};
pub use singularity::{detect_singularity_time, SingularityEstimate};

use num_complex::Complex64;

use crate::model::{self, FieldParams, ManifoldPoint};
use crate::reconstruction::dxi_dq0;
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Alive,
    Diverged,
    SingularHit,
}

/// Stability matrix `d(q_t, p_t) / d(q_0, p_0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityMatrix {
    pub pp: Complex64,
    pub pq: Complex64,
    pub qp: Complex64,
    pub qq: Complex64,
}

impl StabilityMatrix {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self { pp: one, pq: zero, qp: zero, qq: one }
    }

    pub fn det(&self) -> Complex64 {
        self.pp * self.qq - self.pq * self.qp
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryState {
    pub t: Complex64,
    pub q: Complex64,
    pub p: Complex64,
    /// Classical action including the initial action `S0(q0)`.
    pub s_cl: Complex64,
    /// Quantum correction `i/2 ∫ alpha dt`.
    pub s_qm: Complex64,
    pub alpha: Complex64,
    pub m: StabilityMatrix,
    /// Initial stability parameter, needed to follow `dxi/dq0`.
    pub alpha0: Complex64,
    /// Continuous argument of `dxi/dq0`.
    pub dxi_arg: f64,
    pub sheet_index: i32,
    pub status: Status,
}

impl TrajectoryState {
    pub fn from_point(point: &ManifoldPoint, t0: f64, gamma: f64) -> Self {
        let mut s = Self {
            t: Complex64::new(t0, 0.0),
            q: point.q0,
            p: point.p0,
            s_cl: point.s0,
            s_qm: Complex64::new(0.0, 0.0),
            alpha: point.alpha0,
            m: StabilityMatrix::identity(),
            alpha0: point.alpha0,
            dxi_arg: 0.0,
            sheet_index: 0,
            status: Status::Alive,
        };
        s.dxi_arg = s.dxi(gamma).arg();
        s
    }

    pub fn from_q0(q0: Complex64, gamma: f64) -> Result<Self, Error> {
        Ok(Self::from_point(&ManifoldPoint::new(0, q0, 1.0)?, 0.0, gamma))
    }

    pub fn action(&self) -> Complex64 {
        self.s_cl + self.s_qm
    }

    pub fn is_alive(&self) -> bool {
        self.status == Status::Alive
    }

    /// Field-free classical energy `p^2/2 - 1/q`.
    pub fn energy(&self) -> Complex64 {
        self.p * self.p * 0.5 - self.q.inv()
    }

    pub fn dxi(&self, gamma: f64) -> Complex64 {
        dxi_dq0(&self.m, self.alpha0, gamma)
    }

    pub(crate) fn pack(&self) -> [Complex64; DIM] {
        [self.q, self.p, self.s_cl, self.s_qm, self.alpha, self.m.pp, self.m.pq, self.m.qp, self.m.qq]
    }

    pub(crate) fn unpack(&mut self, y: &[Complex64; DIM]) {
        self.q = y[0];
        self.p = y[1];
        self.s_cl = y[2];
        self.s_qm = y[3];
        self.alpha = y[4];
        self.m = StabilityMatrix { pp: y[5], pq: y[6], qp: y[7], qq: y[8] };
    }
}

pub(crate) const DIM: usize = 9;

/// Time derivative of the packed state.
pub(crate) fn rhs(y: &[Complex64; DIM], t: Complex64, field: Option<&FieldParams>) -> Result<[Complex64; DIM], Error> {
    let v = model::potential(y[0], t, field)?;
    let (p, alpha) = (y[1], y[4]);
    let i = Complex64::i();
    Ok([
        p / model::MASS,
        -v.dv,
        p * p / (2.0 * model::MASS) - v.v,
        i * model::HBAR * alpha / (2.0 * model::MASS),
        -v.d2v - alpha * alpha / model::MASS,
        -v.d2v * y[7],
        -v.d2v * y[8],
        y[5] / model::MASS,
        y[6] / model::MASS,
    ])
}

/// Equations of motion evaluated on a full state.
pub fn eom_derivatives(
    state: &TrajectoryState,
    t: Complex64,
    field: Option<&FieldParams>,
) -> Result<TrajectoryState, Error> {
    let d = rhs(&state.pack(), t, field)?;
    let mut out = *state;
    out.unpack(&d);
    Ok(out)
}

/// Integration tolerances and guards.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub q_min: f64,
    pub overflow: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, q_min: 1e-6, overflow: 1e8, h_min: 1e-14, max_steps: 500_000 }
    }
}

/// Everything a propagation needs besides the state and the path.
#[derive(Clone, Copy, Debug)]
pub struct Propagator<'a> {
    pub field: Option<&'a FieldParams>,
    pub tol: Tolerances,
    /// Width used to follow the branch of `dxi/dq0`.
    pub gamma: f64,
}

impl<'a> Propagator<'a> {
    pub fn new(field: Option<&'a FieldParams>, tol: Tolerances, gamma: f64) -> Self {
        Self { field, tol, gamma }
    }
}
