//! Data-parallel trajectory runs over the initial manifold and FINCO sums.

use hhg_core::model::{FieldParams, ManifoldPoint, Mask};
use hhg_core::reconstruction::{classify, reconstruct, Contribution, FilterReport, FilterSettings, Rejection, WavefunctionGrid};
use hhg_core::trajectory::{run_recipe, ContourRecipe, ContourSettings, Propagator, Tolerances, TrajectoryState};
use rayon::prelude::*;

/// Surviving contributions of one process at each observation time.
#[derive(Clone, Debug, Default)]
pub struct ProcessRun {
    pub per_time: Vec<Vec<Contribution>>,
    pub reports: Vec<FilterReport>,
    /// Points whose propagation failed outright.
    pub failures: usize,
}

pub struct Engine<'a> {
    pub points: &'a [ManifoldPoint],
    pub gamma: f64,
    pub settings: ContourSettings,
    pub tol: Tolerances,
    pub field: Option<&'a FieldParams>,
    pub filter: FilterSettings,
}

impl Engine<'_> {
    /// Run `recipe` from every point in `mask` and classify the state seen at
    /// each of `times`, which must ascend and end at `recipe.t_eval`.
    /// Observations made before the recipe's loops were complete count as
    /// flagged.
    pub fn run(&self, recipe: &ContourRecipe, mask: Option<&Mask>, times: &[f64]) -> ProcessRun {
        let prop = Propagator::new(self.field, self.tol, self.gamma);
        let per_point: Vec<(Vec<Result<Contribution, Rejection>>, bool)> =
            self.points.par_iter().map(|pt| self.run_point(pt, recipe, mask, times, &prop)).collect();
        let mut out = ProcessRun {
            per_time: vec![Vec::new(); times.len()],
            reports: vec![FilterReport::default(); times.len()],
            failures: 0,
        };
        for (outcomes, failed) in per_point {
            out.failures += failed as usize;
            for (k, o) in outcomes.into_iter().enumerate() {
                out.reports[k].record(&o);
                if let Ok(c) = o {
                    out.per_time[k].push(c);
                }
            }
        }
        out
    }

    fn run_point(
        &self,
        pt: &ManifoldPoint,
        recipe: &ContourRecipe,
        mask: Option<&Mask>,
        times: &[f64],
        prop: &Propagator<'_>,
    ) -> (Vec<Result<Contribution, Rejection>>, bool) {
        if mask.is_some_and(|m| !m.contains(pt.q0)) {
            return (vec![Err(Rejection::Masked); times.len()], false);
        }
        let init = TrajectoryState::from_point(pt, 0.0, self.gamma);
        let run = match run_recipe(&init, recipe, &self.settings, prop, times) {
            Ok(r) => r,
            Err(_) => return (vec![Err(Rejection::Flagged); times.len()], true),
        };
        let outcomes = (0..times.len())
            .map(|k| match run.observations.get(k) {
                Some(o) if o.complete => classify(pt, Some(&o.state), None, self.gamma, &self.filter),
                _ => Err(Rejection::Flagged),
            })
            .collect();
        (outcomes, false)
    }
}

/// Sum one time slice of several processes on `x`, in the given order.
pub fn combine(runs: &[&ProcessRun], k: usize, x: &[f64]) -> WavefunctionGrid {
    let mut grid = WavefunctionGrid::zeros(x.to_vec());
    for r in runs {
        hhg_core::reconstruction::accumulate(&mut grid, &r.per_time[k]);
    }
    grid
}

/// Reconstruction of a single process at time index `k`.
pub fn single(run: &ProcessRun, k: usize, x: &[f64]) -> WavefunctionGrid {
    reconstruct(&run.per_time[k], x)
}
