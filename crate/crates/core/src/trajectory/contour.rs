use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use super::integrate::propagate_observed;
use super::{detect_singularity_time, propagate_segment, Flow, Propagator, Segment, TrajectoryState};
use crate::Error;

/// Ordered contour segments ending on the real axis at `t_eval`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeContour {
    pub segments: Vec<Segment>,
    pub t_eval: f64,
}

impl TimeContour {
    pub fn end(&self) -> Option<Complex64> {
        self.segments.last().map(|s| s.end())
    }

    pub fn is_connected(&self) -> bool {
        self.segments.windows(2).all(|w| (w[0].end() - w[1].start()).norm() <= 1e-12 * (1.0 + w[1].start().norm()))
    }

    pub fn loop_count(&self) -> usize {
        self.segments.iter().filter(|s| matches!(s, Segment::Loop { .. })).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Process {
    Core,
    Ionization,
    Recollision,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourRecipe {
    pub process: Process,
    /// Loops before the bound sequence ends; `None` loops every collision
    /// met before `t_eval`.
    pub n_initial_loops: Option<u32>,
    pub includes_recollision_loop: bool,
    pub t_eval: f64,
}

impl ContourRecipe {
    pub fn core(t_eval: f64) -> Self {
        Self { process: Process::Core, n_initial_loops: None, includes_recollision_loop: false, t_eval }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.t_eval >= 0.0 && self.t_eval.is_finite()) {
            return Err(Error::InvalidParameter("t_eval must be finite and non-negative"));
        }
        let recollides = self.process == Process::Recollision;
        if recollides != self.includes_recollision_loop {
            return Err(Error::RecipeInfeasible("only recollision recipes carry the recollision loop"));
        }
        if self.process != Process::Core && self.n_initial_loops.is_none() {
            return Err(Error::RecipeInfeasible("ionizing recipes need a finite loop count"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourSettings {
    /// Loop radius as a fraction of the distance from the real axis.
    pub loop_radius_factor: f64,
    /// Global orientation; loops below the axis run the opposite way so
    /// that every excursion circles its singularity on the same side.
    pub loop_direction: i8,
    pub turns_per_loop: u32,
    /// Largest distance searched for a singularity.
    pub probe_horizon: f64,
    /// Real-time spacing of singularity probes along the walk, in addition
    /// to the probes at local minima of `|q|`.
    pub probe_stride: f64,
    /// Distance from the origin the ionized electron must reach before a
    /// singularity counts as a recollision.
    pub recollision_reach: f64,
    /// Contours needing more loops than this before `t_eval` are abandoned.
    pub max_loops: u32,
}

impl Default for ContourSettings {
    fn default() -> Self {
        Self { loop_radius_factor: 0.5, loop_direction: 1, turns_per_loop: 1, probe_horizon: 20.0, probe_stride: 1.0, recollision_reach: 5.0, max_loops: 400 }
    }
}

impl ContourSettings {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.loop_radius_factor > 0.0 && self.loop_radius_factor < 1.0) {
            return Err(Error::InvalidParameter("loop radius factor must lie in (0, 1)"));
        }
        if self.loop_direction != 1 && self.loop_direction != -1 {
            return Err(Error::InvalidParameter("loop direction must be +1 or -1"));
        }
        if self.turns_per_loop == 0 {
            return Err(Error::InvalidParameter("loops need at least one turn"));
        }
        if !(self.probe_horizon > 0.0) {
            return Err(Error::InvalidParameter("probe horizon must be positive"));
        }
        if !(self.probe_stride > 0.0) {
            return Err(Error::InvalidParameter("probe stride must be positive"));
        }
        if self.max_loops == 0 {
            return Err(Error::InvalidParameter("loop budget must be positive"));
        }
        if !(self.recollision_reach >= 0.0) {
            return Err(Error::InvalidParameter("recollision reach must be non-negative"));
        }
        Ok(())
    }
}

/// State recorded when the walk passes a requested real time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub state: TrajectoryState,
    pub loops: u32,
    /// Whether the recipe's loop sequence was finished at this time.
    pub complete: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecipeRun {
    pub contour: TimeContour,
    pub observations: Vec<Observation>,
    pub final_state: TrajectoryState,
    pub singularities: Vec<Complex64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Stage {
    Bound,
    Excursion,
    Done,
}

struct Walk<'p, 'f> {
    recipe: ContourRecipe,
    settings: ContourSettings,
    prop: &'p Propagator<'f>,
    state: TrajectoryState,
    segments: Vec<Segment>,
    loops: u32,
    stage: Stage,
    /// Largest `|q|` seen on the real axis since the bound loops ended.
    reach: f64,
}

impl Walk<'_, '_> {
    fn looking(&self) -> bool {
        match self.stage {
            Stage::Bound => true,
            Stage::Excursion => self.recipe.includes_recollision_loop,
            Stage::Done => false,
        }
    }

    fn complete(&self) -> bool {
        match self.recipe.process {
            Process::Core => true,
            Process::Ionization => self.stage != Stage::Bound,
            Process::Recollision => self.stage == Stage::Done,
        }
    }

    fn advance(&mut self, seg: Segment) -> Result<(), Error> {
        self.state = propagate_segment(&self.state, &seg, self.prop)?;
        if self.state.is_alive() {
            self.state.sheet_index += seg.turns() as i32;
        }
        self.segments.push(seg);
        Ok(())
    }

    /// Walk along the real axis towards `t_stop`. Returns `true` if the walk
    /// halted to probe for a singularity: just past a local minimum of `|q|`
    /// or after `probe_stride`.
    fn walk_to(&mut self, t_stop: f64) -> Result<bool, Error> {
        let from = self.state.t;
        let seg = Segment::Line { from, to: Complex64::new(t_stop, 0.0) };
        let looking = self.looking();
        let stride = self.settings.probe_stride;
        let mut prev2 = self.state.q.norm();
        let mut prev1 = prev2;
        let mut reach = self.reach;
        let excursion = self.stage == Stage::Excursion;
        let (st, stopped) = propagate_observed(&self.state, &seg, self.prop, |x, _| {
            if !looking {
                return Flow::Continue;
            }
            let n = x.q.norm();
            if excursion {
                reach = reach.max(n);
            }
            let min = prev1 < prev2 && n > prev1;
            prev2 = prev1;
            prev1 = n;
            if min || (x.t.re - from.re).abs() >= stride {
                Flow::Stop
            } else {
                Flow::Continue
            }
        })?;
        self.segments.push(Segment::Line { from, to: st.t });
        self.state = st;
        self.reach = reach;
        Ok(stopped)
    }

    /// Vertical excursion from the real axis around `t_s` and back.
    fn excursion(&mut self, t_s: Complex64) -> Result<(), Error> {
        let ex = Excursion::new(t_s, &self.settings, self.settings.turns_per_loop);
        self.advance(Segment::Line { from: self.state.t, to: ex.anchor })?;
        self.advance(Segment::Line { from: ex.anchor, to: ex.entry })?;
        self.advance(ex.circle)?;
        self.advance(Segment::Line { from: ex.entry, to: ex.anchor })
    }
}

/// Geometry of one loop excursion: the real-axis anchor below (or above)
/// `t_s`, the entry point on the circle facing the axis, and the circle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Excursion {
    pub anchor: Complex64,
    pub entry: Complex64,
    pub circle: Segment,
}

impl Excursion {
    pub fn new(t_s: Complex64, settings: &ContourSettings, turns: u32) -> Self {
        let anchor = Complex64::new(t_s.re, 0.0);
        let side = if t_s.im > 0.0 { 1.0 } else { -1.0 };
        let radius = settings.loop_radius_factor * t_s.im.abs();
        let entry = t_s - Complex64::new(0.0, side * radius);
        let circle = Segment::Loop {
            center: t_s,
            radius,
            start_angle: -side * FRAC_PI_2,
            turns,
            direction: settings.loop_direction * side as i8,
        };
        Self { anchor, entry, circle }
    }
}

/// Result of circling one singularity several times.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosureReport {
    pub t_s: Complex64,
    pub entry: TrajectoryState,
    /// Relative phase-space distance from the entry state after `k + 1`
    /// turns.
    pub distances: Vec<f64>,
}

/// Locate the nearest singularity of `state`, move to the entry point of its
/// loop and compare `(q, p)` after 1, 2, ... `max_turns` turns with the
/// entry state.
pub fn loop_closure(
    state: &TrajectoryState,
    settings: &ContourSettings,
    prop: &Propagator<'_>,
    max_turns: u32,
) -> Result<ClosureReport, Error> {
    settings.validate()?;
    let t_s = detect_singularity_time(state, settings.probe_horizon, prop)?.t_s;
    if t_s.im.abs() < 1e-9 {
        return Err(Error::NoSingularity);
    }
    let ex = Excursion::new(t_s, settings, 1);
    let mut entry = propagate_segment(state, &Segment::Line { from: state.t, to: ex.anchor }, prop)?;
    entry = propagate_segment(&entry, &Segment::Line { from: ex.anchor, to: ex.entry }, prop)?;
    if !entry.is_alive() {
        return Err(Error::Singular);
    }
    let scale = (entry.q.norm_sqr() + entry.p.norm_sqr()).sqrt();
    let mut distances = Vec::with_capacity(max_turns as usize);
    let mut st = entry;
    for _ in 0..max_turns {
        st = propagate_segment(&st, &ex.circle, prop)?;
        if !st.is_alive() {
            return Err(Error::Singular);
        }
        distances.push(((st.q - entry.q).norm_sqr() + (st.p - entry.p).norm_sqr()).sqrt() / scale);
    }
    Ok(ClosureReport { t_s, entry, distances })
}

fn probe_once(state: &TrajectoryState, horizon: f64, prop: &Propagator<'_>) -> Result<Option<Complex64>, Error> {
    match detect_singularity_time(state, horizon, prop) {
        Ok(est) if est.t_s.im.abs() >= 1e-9 => Ok(Some(est.t_s)),
        Ok(_) | Err(Error::NoSingularity) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Singularities looped so far and the real-axis anchor of the last one.
#[derive(Default)]
struct Finder {
    looped: Vec<Complex64>,
    anchor: f64,
}

impl Finder {
    fn fresh(&self, t: Complex64) -> bool {
        !self.looped.last().is_some_and(|&s| (s - t).norm() < 1e-4 * (1.0 + t.norm())) && t.re >= self.anchor
    }

    fn record(&mut self, t_s: Complex64) {
        self.looped.push(t_s);
        self.anchor = t_s.re;
    }

    /// Nearest singularity seen from `state`, if it has not been looped and
    /// lies ahead of the last anchor.
    fn next(&self, state: &TrajectoryState, settings: &ContourSettings, prop: &Propagator<'_>) -> Result<Option<Complex64>, Error> {
        Ok(probe_once(state, settings.probe_horizon, prop)?.filter(|&t| self.fresh(t)))
    }
}

/// Build the contour for one initial condition while propagating it.
///
/// The contour runs along the real axis. Whenever `|q|` passes a local
/// minimum the nearest collision time is located; if the recipe still needs
/// loops, the walk returns to `Re t_s`, goes straight up (or down) towards
/// the singularity, circles it and comes back before continuing. The
/// collision times therefore depend on the sheet reached so far.
///
/// `obs_times` must be ascending and no larger than the recipe's `t_eval`,
/// which is always observed last. Each observation sees the contour that
/// loops exactly the collisions with `Re t_s` before it.
pub fn run_recipe(
    initial: &TrajectoryState,
    recipe: &ContourRecipe,
    settings: &ContourSettings,
    prop: &Propagator<'_>,
    obs_times: &[f64],
) -> Result<RecipeRun, Error> {
    recipe.validate()?;
    settings.validate()?;
    if obs_times.windows(2).any(|w| w[1] < w[0]) || obs_times.iter().any(|&t| t > recipe.t_eval) {
        return Err(Error::InvalidParameter("observation times must ascend up to t_eval"));
    }
    let mut times: Vec<f64> = obs_times.to_vec();
    if times.last() != Some(&recipe.t_eval) {
        times.push(recipe.t_eval);
    }

    let mut walk = Walk {
        recipe: *recipe,
        settings: *settings,
        prop,
        state: *initial,
        segments: Vec::new(),
        loops: 0,
        stage: Stage::Bound,
        reach: 0.0,
    };
    if recipe.n_initial_loops == Some(0) {
        walk.stage = if recipe.includes_recollision_loop { Stage::Excursion } else { Stage::Done };
    }
    let mut observations: Vec<Observation> = Vec::with_capacity(times.len());
    let mut finder = Finder { anchor: initial.t.re, ..Finder::default() };

    while observations.len() < times.len() && walk.state.is_alive() {
        let t_stop = times[observations.len()];
        let stopped = walk.walk_to(t_stop)?;
        let found = if stopped && walk.state.is_alive() {
            finder
                .next(&walk.state, settings, prop)?
                .filter(|t| t.re <= t_stop)
                .filter(|_| walk.stage != Stage::Excursion || walk.reach >= settings.recollision_reach)
        } else {
            None
        };
        let Some(t_s) = found else {
            if !stopped {
                observations.push(Observation { t: t_stop, state: walk.state, loops: walk.loops, complete: walk.complete() });
            }
            continue;
        };
        while observations.last().is_some_and(|o| o.t > t_s.re) {
            observations.pop();
        }
        if walk.loops >= settings.max_loops {
            return Err(Error::RecipeInfeasible("loop budget exhausted"));
        }
        walk.excursion(t_s)?;
        finder.record(t_s);
        walk.loops += 1;
        walk.stage = match walk.stage {
            Stage::Bound if Some(walk.loops) == recipe.n_initial_loops => {
                if recipe.includes_recollision_loop {
                    Stage::Excursion
                } else {
                    Stage::Done
                }
            }
            Stage::Bound => Stage::Bound,
            _ => Stage::Done,
        };
    }

    Ok(RecipeRun {
        contour: TimeContour { segments: walk.segments, t_eval: recipe.t_eval },
        observations,
        final_state: walk.state,
        singularities: finder.looped,
    })
}
