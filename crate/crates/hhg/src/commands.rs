//! The pipelines behind the subcommands and the files they write.

use std::path::Path;

use hhg_core::model::{build_manifold, field_derived, psi0_real, FieldParams, ManifoldPoint};
use hhg_core::observables::{
    compare_spectra, dipole_acceleration, even_suppression, hhg_spectrum, linear_slope, plateau_cutoff, post_symmetrize, unwrap_phases,
    PeakComparison, SpectrumResult,
};
use hhg_core::reconstruction::{add_core_state, projection, relative_l2, FilterReport, WavefunctionGrid};
use hhg_core::trajectory::{loop_closure, run_recipe, run_trajectory, ClosureReport, ContourRecipe, PathPoint, Propagator, RecipeRun, TrajectoryState};
use hhg_core::Complex64;

use crate::config::{ConfigError, RunConfig};
use crate::finco::{combine, single, Engine, ProcessRun};
use crate::output::{num, write_contour, write_path, write_rows, write_series, write_summary, write_wavefunction};
use crate::quantum::SplitOperator;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("computation failed: {0}")]
    Compute(String),
    #[error("cannot write output: {0}")]
    Io(String),
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => 3,
            AppError::Compute(_) => 4,
            AppError::Io(_) => 5,
        }
    }
}

impl From<csv::Error> for AppError {
    fn from(e: csv::Error) -> Self {
        AppError::Io(e.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e.to_string())
    }
}

fn compute(e: impl std::fmt::Display) -> AppError {
    AppError::Compute(e.to_string())
}

/// Which solvers a command runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mode {
    pub quantum: bool,
    pub finco: bool,
}

impl Mode {
    pub const BOTH: Mode = Mode { quantum: true, finco: true };
    pub const QUANTUM_ONLY: Mode = Mode { quantum: true, finco: false };
    pub const FINCO_ONLY: Mode = Mode { quantum: false, finco: true };
}

fn points_for(spec: &crate::config::ManifoldConfig) -> Result<Vec<ManifoldPoint>, AppError> {
    build_manifold(&spec.to_manifold()?).map_err(compute)
}

fn engine<'a>(cfg: &RunConfig, points: &'a [ManifoldPoint], gamma: f64, field: Option<&'a FieldParams>) -> Engine<'a> {
    Engine {
        points,
        gamma,
        settings: cfg.contour.settings(),
        tol: cfg.integrator.tolerances(),
        field,
        filter: cfg.filter.settings(),
    }
}

fn quantum_solver(cfg: &RunConfig) -> Result<SplitOperator, AppError> {
    SplitOperator::new(cfg.quantum.grid()).map_err(compute)
}

/// Quantum nodes inside `range` and the matching amplitudes.
fn restrict(x: &[f64], psi: &[Complex64], range: [f64; 2]) -> (Vec<f64>, Vec<Complex64>) {
    x.iter().zip(psi).filter(|(x, _)| **x >= range[0] && **x <= range[1]).map(|(x, v)| (*x, *v)).unzip()
}

#[derive(Clone, Debug)]
pub struct GroundStateSnapshot {
    pub multiple: u32,
    pub t: f64,
    pub psi: Vec<Complex64>,
    /// `|| |Psi| - |Psi0| || / ||Psi0||`.
    pub rel_l2_abs: f64,
    /// Distance from `Psi0 e^{it/2}`.
    pub rel_l2_complex: f64,
    pub projection: Complex64,
    pub report: FilterReport,
}

#[derive(Clone, Debug, Default)]
pub struct GroundStateResult {
    pub x: Vec<f64>,
    pub snapshots: Vec<GroundStateSnapshot>,
    pub phase_t: Vec<f64>,
    pub phase: Vec<f64>,
    pub phase_slope: Option<f64>,
    pub failures: usize,
    /// `(multiple, t, x, Psi)` from the split-operator run.
    pub quantum: Vec<(u32, f64, Vec<f64>, Vec<Complex64>)>,
}

/// Field-free loop contours from the whole manifold, reconstructed at
/// multiples of `4 pi` and compared with `Psi0 e^{it/2}`.
pub fn ground_state(cfg: &RunConfig, mode: Mode) -> Result<GroundStateResult, AppError> {
    let gs = &cfg.ground_state;
    let mut out = GroundStateResult::default();
    if mode.finco {
        let points = points_for(&gs.manifold)?;
        let (times, snap_idx) = gs.times();
        let recipe = ContourRecipe::core(*times.last().expect("at least one time"));
        let run = engine(cfg, &points, gs.gamma, None).run(&recipe, None, &times);
        let x = WavefunctionGrid::uniform(gs.x_range[0], gs.x_range[1], gs.n_x).x;
        let exact: Vec<Complex64> = x.iter().map(|&v| Complex64::new(psi0_real(v), 0.0)).collect();
        let wrapped: Vec<f64> = (0..times.len()).map(|j| projection(&single(&run, j, &x).psi, &exact).arg()).collect();
        out.phase = unwrap_phases(&wrapped);
        out.phase_slope = linear_slope(&times, &out.phase);
        out.phase_t = times.clone();
        for (&k, &j) in gs.multiples_of_4pi.iter().zip(&snap_idx) {
            let t = times[j];
            let psi = single(&run, j, &x).psi;
            let abs: Vec<Complex64> = psi.iter().map(|v| Complex64::new(v.norm(), 0.0)).collect();
            let want: Vec<Complex64> = exact.iter().map(|v| v * Complex64::from_polar(1.0, 0.5 * t)).collect();
            out.snapshots.push(GroundStateSnapshot {
                multiple: k,
                t,
                rel_l2_abs: relative_l2(&abs, &exact),
                rel_l2_complex: relative_l2(&psi, &want),
                projection: projection(&psi, &exact),
                report: run.reports[j],
                psi,
            });
        }
        out.failures = run.failures;
        out.x = x;
    }
    if mode.quantum {
        let mut so = quantum_solver(cfg)?;
        let mut psi = so.ground_state();
        let dt = so.grid().dt;
        let mut order: Vec<u32> = gs.multiples_of_4pi.clone();
        order.sort_unstable();
        order.dedup();
        let mut step = 0usize;
        for k in order {
            let target = (4.0 * std::f64::consts::PI * k as f64 / dt).round() as usize;
            so.evolve(&mut psi, step as f64 * dt, target - step, None, usize::MAX, |_, _, _| {});
            step = target;
            let (x, v) = restrict(so.x(), &psi, gs.x_range);
            out.quantum.push((k, step as f64 * dt, x, v));
        }
    }
    Ok(out)
}

pub fn write_ground_state(res: &GroundStateResult, dir: &Path) -> Result<(), AppError> {
    for s in &res.snapshots {
        write_wavefunction(&dir.join(format!("ground_state_finco_k{}.csv", s.multiple)), &res.x, &s.psi)?;
    }
    if !res.snapshots.is_empty() {
        let exact: Vec<Complex64> = res.x.iter().map(|&v| Complex64::new(psi0_real(v), 0.0)).collect();
        write_wavefunction(&dir.join("ground_state_exact.csv"), &res.x, &exact)?;
        let rows = res.snapshots.iter().map(|s| {
            vec![
                s.multiple.to_string(),
                num(s.t),
                num(s.rel_l2_abs),
                num(s.rel_l2_complex),
                num(s.projection.norm()),
                num(s.projection.arg()),
                s.report.kept.to_string(),
                s.report.flagged.to_string(),
                s.report.caustic.to_string(),
                s.report.sigma_capped.to_string(),
                s.report.masked.to_string(),
            ]
        });
        write_rows(
            &dir.join("ground_state_summary.csv"),
            &["multiple_of_4pi", "t", "rel_l2_abs", "rel_l2_complex", "projection_abs", "projection_arg", "kept", "flagged", "caustic", "sigma_capped", "masked"],
            rows,
        )?;
        let rows = res.phase_t.iter().zip(&res.phase).map(|(t, p)| vec![num(*t), num(*p)]);
        write_rows(&dir.join("ground_state_phase.csv"), &["t", "phase"], rows)?;
        let mut summary = vec![
            ("phase_slope".to_string(), res.phase_slope.map_or("nan".into(), num)),
            ("failures".to_string(), res.failures.to_string()),
        ];
        for s in &res.snapshots {
            summary.push((format!("rel_l2_abs_k{}", s.multiple), num(s.rel_l2_abs)));
        }
        write_summary(&dir.join("ground_state_summary.txt"), &summary)?;
    }
    for (k, _, x, psi) in &res.quantum {
        write_wavefunction(&dir.join(format!("ground_state_quantum_k{k}.csv")), x, psi)?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct StrongFieldSnapshot {
    pub periods: f64,
    pub t: f64,
    /// Core state plus every process.
    pub finco: Option<Vec<Complex64>>,
    pub processes: Vec<(String, Vec<Complex64>, FilterReport)>,
    pub quantum: Option<(Vec<f64>, Vec<Complex64>)>,
}

#[derive(Clone, Debug, Default)]
pub struct StrongFieldResult {
    pub x: Vec<f64>,
    pub snapshots: Vec<StrongFieldSnapshot>,
    pub failures: Vec<(String, usize)>,
}

fn label(periods: f64) -> String {
    format!("{periods:.3}T")
}

fn run_processes(cfg: &RunConfig, points: &[ManifoldPoint], field: &FieldParams, times: &[f64]) -> Result<Vec<ProcessRun>, AppError> {
    let manifold = cfg.strong_field.manifold.to_manifold()?;
    let eng = engine(cfg, points, cfg.strong_field.gamma, Some(field));
    let t_eval = *times.last().expect("at least one time");
    Ok(cfg.processes.iter().map(|p| eng.run(&p.recipe(t_eval), p.mask.as_deref().and_then(|m| manifold.mask(m)), times)).collect())
}

/// Core state plus the configured processes at the snapshot times, and the
/// split-operator reference.
pub fn strong_field(cfg: &RunConfig, mode: Mode) -> Result<StrongFieldResult, AppError> {
    let sf = &cfg.strong_field;
    let field = cfg.field_params();
    let period = field.period();
    let mut order: Vec<usize> = (0..sf.snapshot_periods.len()).collect();
    order.sort_by(|&a, &b| sf.snapshot_periods[a].total_cmp(&sf.snapshot_periods[b]));
    let times: Vec<f64> = order.iter().map(|&i| sf.snapshot_periods[i] * period).collect();
    let x = WavefunctionGrid::uniform(sf.x_range[0], sf.x_range[1], sf.n_x).x;
    let mut out = StrongFieldResult { x: x.clone(), ..Default::default() };
    out.snapshots = order
        .iter()
        .zip(&times)
        .map(|(&i, &t)| StrongFieldSnapshot { periods: sf.snapshot_periods[i], t, finco: None, processes: Vec::new(), quantum: None })
        .collect();
    if times.is_empty() {
        return Ok(out);
    }
    if mode.finco {
        let points = points_for(&sf.manifold)?;
        let runs = run_processes(cfg, &points, &field, &times)?;
        for (k, snap) in out.snapshots.iter_mut().enumerate() {
            let refs: Vec<&ProcessRun> = runs.iter().collect();
            let mut total = combine(&refs, k, &x);
            add_core_state(&mut total, snap.t);
            snap.finco = Some(total.psi);
            snap.processes =
                cfg.processes.iter().zip(&runs).map(|(p, r)| (p.name.clone(), single(r, k, &x).psi, r.reports[k])).collect();
        }
        out.failures = cfg.processes.iter().zip(&runs).map(|(p, r)| (p.name.clone(), r.failures)).collect();
    }
    if mode.quantum {
        let mut so = quantum_solver(cfg)?;
        let mut psi = so.ground_state();
        let dt = so.grid().dt;
        let mut step = 0usize;
        for snap in out.snapshots.iter_mut() {
            let target = (snap.t / dt).round() as usize;
            so.evolve(&mut psi, step as f64 * dt, target - step, Some(&field), usize::MAX, |_, _, _| {});
            step = target;
            snap.quantum = Some(restrict(so.x(), &psi, sf.x_range));
        }
    }
    Ok(out)
}

pub fn write_strong_field(res: &StrongFieldResult, dir: &Path) -> Result<(), AppError> {
    let mut report_rows = Vec::new();
    for s in &res.snapshots {
        let l = label(s.periods);
        if let Some(psi) = &s.finco {
            write_wavefunction(&dir.join(format!("strong_field_finco_{l}.csv")), &res.x, psi)?;
        }
        for (name, psi, rep) in &s.processes {
            write_wavefunction(&dir.join(format!("strong_field_{name}_{l}.csv")), &res.x, psi)?;
            report_rows.push(vec![
                name.clone(),
                num(s.periods),
                rep.kept.to_string(),
                rep.flagged.to_string(),
                rep.caustic.to_string(),
                rep.sigma_capped.to_string(),
                rep.masked.to_string(),
            ]);
        }
        if let Some((x, psi)) = &s.quantum {
            write_wavefunction(&dir.join(format!("strong_field_quantum_{l}.csv")), x, psi)?;
        }
    }
    if !report_rows.is_empty() {
        write_rows(
            &dir.join("strong_field_processes.csv"),
            &["process", "periods", "kept", "flagged", "caustic", "sigma_capped", "masked"],
            report_rows,
        )?;
        let summary: Vec<(String, String)> = res.failures.iter().map(|(n, f)| (format!("failures_{n}"), f.to_string())).collect();
        write_summary(&dir.join("strong_field_summary.txt"), &summary)?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct DipoleSeries {
    pub t: Vec<f64>,
    pub a: Vec<f64>,
    pub dt: f64,
    /// Spectrum of the post-symmetrized series before normalization.
    pub spectrum: SpectrumResult,
}

#[derive(Clone, Debug)]
pub struct SpectrumRun {
    pub quantum: Option<DipoleSeries>,
    pub finco: Option<DipoleSeries>,
    /// dB value mapped to 0 in the written spectra.
    pub reference_db: f64,
    pub comparison: Vec<PeakComparison>,
    pub cutoff_marker: f64,
}

impl SpectrumRun {
    pub fn normalized_quantum(&self) -> Option<SpectrumResult> {
        self.quantum.as_ref().map(|s| s.spectrum.normalized(self.reference_db))
    }

    pub fn normalized_finco(&self) -> Option<SpectrumResult> {
        self.finco.as_ref().map(|s| s.spectrum.normalized(self.reference_db))
    }
}

fn spectrum_of(cfg: &RunConfig, a: &[f64], dt: f64, marker: f64) -> Result<SpectrumResult, AppError> {
    let omega = cfg.field.omega;
    let sym = post_symmetrize(a, dt, omega).map_err(compute)?;
    hhg_spectrum(&sym, dt, omega, marker, &cfg.spectrum.settings()).map_err(compute)
}

/// Split-operator `a(t)` on `n_periods + 1/2` periods, every step.
pub fn quantum_dipole(cfg: &RunConfig) -> Result<(Vec<f64>, Vec<f64>, f64), AppError> {
    let field = cfg.field_params();
    let mut so = quantum_solver(cfg)?;
    let dt = so.grid().dt;
    let n_half = (cfg.half_period() / dt).round() as usize;
    let n = (2 * cfg.field.n_periods as usize + 1) * n_half;
    let x = so.x().to_vec();
    let mut psi = so.ground_state();
    let (mut t, mut a) = (Vec::with_capacity(n), Vec::with_capacity(n));
    so.evolve(&mut psi, 0.0, n - 1, Some(&field), 1, |_, tk, p| {
        t.push(tk);
        a.push(dipole_acceleration(&x, p, tk, Some(&field)));
    });
    Ok((t, a, dt))
}

/// FINCO `a(t)` sampled `finco_samples_per_half_period` times per half
/// period over `n_periods + 1/2` periods.
pub fn finco_dipole(cfg: &RunConfig) -> Result<(Vec<f64>, Vec<f64>, f64), AppError> {
    let field = cfg.field_params();
    let spp = cfg.spectrum.finco_samples_per_half_period;
    let dt = cfg.half_period() / spp as f64;
    let n = (2 * cfg.field.n_periods as usize + 1) * spp;
    let times: Vec<f64> = (0..n).map(|j| j as f64 * dt).collect();
    let points = points_for(&cfg.strong_field.manifold)?;
    let runs = run_processes(cfg, &points, &field, &times)?;
    let refs: Vec<&ProcessRun> = runs.iter().collect();
    let sp = &cfg.spectrum;
    let x = WavefunctionGrid::uniform(sp.finco_x_range[0], sp.finco_x_range[1], sp.finco_n_x).x;
    let a = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut g = combine(&refs, k, &x);
            add_core_state(&mut g, t);
            dipole_acceleration(&g.x, &g.psi, t, Some(&field))
        })
        .collect();
    Ok((times, a, dt))
}

pub fn spectrum(cfg: &RunConfig, mode: Mode) -> Result<SpectrumRun, AppError> {
    let marker = field_derived(&cfg.field_params(), &cfg.physical_setup()).cutoff_harmonic(cfg.field.omega);
    let series = |(t, a, dt): (Vec<f64>, Vec<f64>, f64)| -> Result<DipoleSeries, AppError> {
        let spectrum = spectrum_of(cfg, &a, dt, marker)?;
        Ok(DipoleSeries { t, a, dt, spectrum })
    };
    let quantum = if mode.quantum { Some(series(quantum_dipole(cfg)?)?) } else { None };
    let finco = if mode.finco { Some(series(finco_dipole(cfg)?)?) } else { None };
    let reference_db = quantum.as_ref().or(finco.as_ref()).map_or(0.0, |s| s.spectrum.max_db());
    let comparison = match (&quantum, &finco) {
        (Some(q), Some(f)) => compare_spectra(&q.spectrum, &f.spectrum, cfg.spectrum.max_harmonic as u32),
        _ => Vec::new(),
    };
    Ok(SpectrumRun { quantum, finco, reference_db, comparison, cutoff_marker: marker })
}

/// Plateau level from harmonics 5 to 13; cutoff where peaks fall 10 dB
/// below it.
pub const PLATEAU: (u32, u32) = (5, 13);
pub const CUTOFF_DROP_DB: f64 = 10.0;

pub fn write_spectrum(res: &SpectrumRun, dir: &Path) -> Result<(), AppError> {
    let q = res.normalized_quantum();
    let f = res.normalized_finco();
    let axis = q.as_ref().or(f.as_ref()).map(|s| s.harmonic_order.clone()).unwrap_or_default();
    let cell = |s: &Option<SpectrumResult>, k: usize| s.as_ref().map_or(String::new(), |s| num(s.power_db[k]));
    let rows = axis.iter().enumerate().map(|(k, h)| vec![num(*h), cell(&q, k), cell(&f, k), num(res.cutoff_marker)]);
    write_rows(&dir.join("spectrum.csv"), &["harmonic_order", "power_db_quantum", "power_db_finco", "cutoff_marker"], rows)?;
    if let Some(s) = &res.quantum {
        write_series(&dir.join("dipole_quantum.csv"), &s.t, &s.a)?;
    }
    if let Some(s) = &res.finco {
        write_series(&dir.join("dipole_finco.csv"), &s.t, &s.a)?;
    }
    let mut summary = vec![("cutoff_marker".to_string(), num(res.cutoff_marker)), ("reference_db".to_string(), num(res.reference_db))];
    for (name, s) in [("quantum", &q), ("finco", &f)] {
        if let Some(s) = s {
            let cut = plateau_cutoff(s, PLATEAU, CUTOFF_DROP_DB);
            summary.push((format!("plateau_cutoff_{name}"), cut.map_or("none".into(), |c| c.to_string())));
            let sup = even_suppression(s, cut.unwrap_or(1) + 1);
            summary.push((format!("even_suppression_db_{name}"), sup.map_or("none".into(), num)));
        }
    }
    write_summary(&dir.join("spectrum_summary.txt"), &summary)?;
    if !res.comparison.is_empty() {
        let rows = res.comparison.iter().map(|p| {
            vec![
                p.harmonic.to_string(),
                num(p.position_1),
                num(p.position_2),
                num(p.height_1 - res.reference_db),
                num(p.height_2 - res.reference_db),
                num(p.position_delta()),
                num(p.height_delta()),
            ]
        });
        write_rows(
            &dir.join("spectrum_peaks.csv"),
            &["harmonic", "position_quantum", "position_finco", "height_db_quantum", "height_db_finco", "position_delta", "height_delta_db"],
            rows,
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct DiagnosticsResult {
    pub q0: Complex64,
    pub run: RecipeRun,
    pub path: Vec<PathPoint>,
    pub closure: Result<ClosureReport, hhg_core::Error>,
}

/// Contour, dense path and loop-closure check for one initial point.
pub fn diagnostics(cfg: &RunConfig) -> Result<DiagnosticsResult, AppError> {
    let d = &cfg.diagnostics;
    let q0 = Complex64::new(d.q0[0], d.q0[1]);
    let field = cfg.field_params();
    let gamma = cfg.ground_state.gamma;
    let prop = Propagator::new(d.with_field.then_some(&field), cfg.integrator.tolerances(), gamma);
    let init = TrajectoryState::from_q0(q0, gamma).map_err(|e| AppError::Config(ConfigError::Invalid(format!("diagnostics q0: {e}"))))?;
    let settings = cfg.contour.settings();
    let run = run_recipe(&init, &ContourRecipe::core(d.t_eval), &settings, &prop, &[]).map_err(compute)?;
    let mut path = Vec::new();
    run_trajectory(&init, &run.contour, &prop, Some(&mut path)).map_err(compute)?;
    let closure = loop_closure(&init, &settings, &prop, d.max_turns);
    Ok(DiagnosticsResult { q0, run, path, closure })
}

pub fn write_diagnostics(res: &DiagnosticsResult, dir: &Path) -> Result<(), AppError> {
    write_path(&dir.join("diagnostics_path.csv"), &res.path)?;
    write_contour(&dir.join("diagnostics_contour.csv"), &res.run.contour.segments)?;
    let rows = res.run.singularities.iter().enumerate().map(|(k, t)| vec![k.to_string(), num(t.re), num(t.im)]);
    write_rows(&dir.join("diagnostics_singularities.csv"), &["index", "re_t", "im_t"], rows)?;
    let mut summary = vec![
        ("q0".to_string(), format!("{} {}", num(res.q0.re), num(res.q0.im))),
        ("loops".to_string(), res.run.contour.loop_count().to_string()),
        ("final_sheet".to_string(), res.run.final_state.sheet_index.to_string()),
        ("final_status".to_string(), format!("{:?}", res.run.final_state.status)),
    ];
    match &res.closure {
        Ok(c) => {
            let rows = c.distances.iter().enumerate().map(|(k, d)| vec![(k + 1).to_string(), num(*d)]);
            write_rows(&dir.join("diagnostics_closure.csv"), &["turns", "distance"], rows)?;
            summary.push(("closure_singularity".to_string(), format!("{} {}", num(c.t_s.re), num(c.t_s.im))));
        }
        Err(e) => {
            write_rows(&dir.join("diagnostics_closure.csv"), &["turns", "distance"], Vec::<Vec<String>>::new())?;
            summary.push(("closure_singularity".to_string(), format!("none ({e})")));
        }
    }
    write_summary(&dir.join("diagnostics_summary.txt"), &summary)?;
    Ok(())
}
