//! Run configuration: TOML sections with defaults, validation and
//! conversion into the core types.

use std::f64::consts::PI;
use std::path::Path;

use hhg_core::model::{FieldParams, InitialManifold, Mask, PhysicalSetup, Rect};
use hhg_core::observables::{SpectrumSettings, Window};
use hhg_core::reconstruction::FilterSettings;
use hhg_core::trajectory::{ContourRecipe, ContourSettings, Process, Tolerances};
use serde::{Deserialize, Serialize};

use crate::quantum::{Absorber, QuantumGrid};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: String,
    pub setup: SetupConfig,
    pub field: FieldConfig,
    pub contour: ContourConfig,
    pub integrator: IntegratorConfig,
    pub filter: FilterConfig,
    pub ground_state: GroundStateConfig,
    pub strong_field: StrongFieldConfig,
    pub processes: Vec<ProcessConfig>,
    pub quantum: QuantumConfig,
    pub spectrum: SpectrumConfig,
    pub diagnostics: DiagnosticsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: "out".into(),
            setup: SetupConfig::default(),
            field: FieldConfig::default(),
            contour: ContourConfig::default(),
            integrator: IntegratorConfig::default(),
            filter: FilterConfig::default(),
            ground_state: GroundStateConfig::default(),
            strong_field: StrongFieldConfig::default(),
            processes: default_processes(),
            quantum: QuantumConfig::default(),
            spectrum: SpectrumConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SetupConfig {
    pub ionization_potential: f64,
}

impl Default for SetupConfig {
    fn default() -> Self {
        Self { ionization_potential: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub f0: f64,
    pub omega: f64,
    pub n_periods: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self { f0: 0.0735, omega: 0.0735, n_periods: 4.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectConfig {
    pub re: [f64; 2],
    pub im: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskConfig {
    pub name: String,
    #[serde(default)]
    pub rects: Vec<RectConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManifoldConfig {
    pub re_range: [f64; 2],
    pub im_range: [f64; 2],
    pub n_re: usize,
    pub n_im: usize,
    pub masks: Vec<MaskConfig>,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        let m = InitialManifold::default();
        Self {
            re_range: [m.re_range.0, m.re_range.1],
            im_range: [m.im_range.0, m.im_range.1],
            n_re: m.n_re,
            n_im: m.n_im,
            masks: Vec::new(),
        }
    }
}

impl ManifoldConfig {
    pub fn to_manifold(&self) -> Result<InitialManifold, ConfigError> {
        let masks = self
            .masks
            .iter()
            .map(|m| Mask {
                name: m.name.clone(),
                rects: m.rects.iter().map(|r| Rect { re: (r.re[0], r.re[1]), im: (r.im[0], r.im[1]) }).collect(),
            })
            .collect();
        let spec = InitialManifold {
            re_range: (self.re_range[0], self.re_range[1]),
            im_range: (self.im_range[0], self.im_range[1]),
            n_re: self.n_re,
            n_im: self.n_im,
            masks,
        };
        spec.validate().map_err(|e| invalid(format!("manifold: {e}")))?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourConfig {
    pub loop_radius_factor: f64,
    pub loop_direction: i8,
    pub turns_per_loop: u32,
    pub probe_horizon: f64,
    pub probe_stride: f64,
    pub recollision_reach: f64,
    pub max_loops: u32,
}

impl Default for ContourConfig {
    fn default() -> Self {
        let s = ContourSettings::default();
        Self {
            loop_radius_factor: s.loop_radius_factor,
            loop_direction: s.loop_direction,
            turns_per_loop: s.turns_per_loop,
            probe_horizon: s.probe_horizon,
            probe_stride: s.probe_stride,
            recollision_reach: s.recollision_reach,
            max_loops: s.max_loops,
        }
    }
}

impl ContourConfig {
    pub fn settings(&self) -> ContourSettings {
        ContourSettings {
            loop_radius_factor: self.loop_radius_factor,
            loop_direction: self.loop_direction,
            turns_per_loop: self.turns_per_loop,
            probe_horizon: self.probe_horizon,
            probe_stride: self.probe_stride,
            recollision_reach: self.recollision_reach,
            max_loops: self.max_loops,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub q_min: f64,
    pub overflow: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        let t = Tolerances::default();
        Self { rtol: t.rtol, atol: t.atol, q_min: t.q_min, overflow: t.overflow, h_min: t.h_min, max_steps: t.max_steps }
    }
}

impl IntegratorConfig {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances { rtol: self.rtol, atol: self.atol, q_min: self.q_min, overflow: self.overflow, h_min: self.h_min, max_steps: self.max_steps }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub sigma_cap: f64,
    pub caustic_cutoff: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        let f = FilterSettings::default();
        Self { sigma_cap: f.sigma_cap, caustic_cutoff: f.caustic_cutoff }
    }
}

impl FilterConfig {
    pub fn settings(&self) -> FilterSettings {
        FilterSettings { sigma_cap: self.sigma_cap, caustic_cutoff: self.caustic_cutoff }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundStateConfig {
    pub gamma: f64,
    /// Evaluation times as multiples of `4 pi`.
    pub multiples_of_4pi: Vec<u32>,
    /// Extra samples per `4 pi` used to follow the global phase.
    pub phase_samples_per_4pi: u32,
    pub x_range: [f64; 2],
    pub n_x: usize,
    pub manifold: ManifoldConfig,
}

impl Default for GroundStateConfig {
    fn default() -> Self {
        Self { gamma: 0.5, multiples_of_4pi: vec![0, 1, 2, 3], phase_samples_per_4pi: 16, x_range: [0.5, 8.0], n_x: 300, manifold: ManifoldConfig::default() }
    }
}

impl GroundStateConfig {
    /// Observation times `4 pi j / s` up to the largest multiple, with
    /// `s = max(1, phase_samples_per_4pi)`, and the index of each requested
    /// multiple among them.
    pub fn times(&self) -> (Vec<f64>, Vec<usize>) {
        let s = self.phase_samples_per_4pi.max(1) as usize;
        let k_max = self.multiples_of_4pi.iter().copied().max().unwrap_or(0) as usize;
        let times = (0..=k_max * s).map(|j| 4.0 * PI * j as f64 / s as f64).collect();
        (times, self.multiples_of_4pi.iter().map(|&k| k as usize * s).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrongFieldConfig {
    pub gamma: f64,
    /// Snapshot times in field periods.
    pub snapshot_periods: Vec<f64>,
    pub x_range: [f64; 2],
    pub n_x: usize,
    pub manifold: ManifoldConfig,
}

impl Default for StrongFieldConfig {
    fn default() -> Self {
        Self {
            gamma: 0.3,
            snapshot_periods: vec![1.5],
            x_range: [0.5, 100.0],
            n_x: 2000,
            manifold: ManifoldConfig { n_re: 60, n_im: 40, ..ManifoldConfig::default() },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessKind {
    Ionization,
    Recollision,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    pub name: String,
    pub kind: ProcessKind,
    pub n_initial_loops: u32,
    /// Name of a manifold mask; the full manifold when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
}

impl ProcessConfig {
    pub fn recipe(&self, t_eval: f64) -> ContourRecipe {
        let (process, recollides) = match self.kind {
            ProcessKind::Ionization => (Process::Ionization, false),
            ProcessKind::Recollision => (Process::Recollision, true),
        };
        ContourRecipe { process, n_initial_loops: Some(self.n_initial_loops), includes_recollision_loop: recollides, t_eval }
    }
}

fn default_processes() -> Vec<ProcessConfig> {
    let p = |name: &str, kind, n| ProcessConfig { name: name.into(), kind, n_initial_loops: n, mask: None };
    vec![
        p("ionization-1", ProcessKind::Ionization, 3),
        p("recollision-2", ProcessKind::Recollision, 3),
        p("ionization-3", ProcessKind::Ionization, 15),
        p("recollision-4", ProcessKind::Recollision, 15),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantumConfig {
    pub x_max: f64,
    pub n_intervals: usize,
    /// Requested step; resolved to the largest step that divides half a
    /// field period.
    pub dt: f64,
    pub absorber: bool,
    pub absorber_onset: f64,
    pub absorber_exponent: f64,
    pub v_cap: f64,
}

impl Default for QuantumConfig {
    fn default() -> Self {
        Self { x_max: 600.0, n_intervals: 1 << 14, dt: 0.0025, absorber: true, absorber_onset: 0.8, absorber_exponent: 0.125, v_cap: 1e3 }
    }
}

impl QuantumConfig {
    pub fn grid(&self) -> QuantumGrid {
        QuantumGrid {
            x_max: self.x_max,
            n_intervals: self.n_intervals,
            dt: self.dt,
            absorber: self.absorber.then_some(Absorber { onset: self.absorber_onset, exponent: self.absorber_exponent }),
            v_cap: self.v_cap,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowConfig {
    Hann,
    Rectangular,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub window: WindowConfig,
    pub max_harmonic: f64,
    pub oversample: usize,
    /// FINCO samples of `a(t)` per half field period.
    pub finco_samples_per_half_period: usize,
    pub finco_x_range: [f64; 2],
    pub finco_n_x: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            window: WindowConfig::Hann,
            max_harmonic: 40.0,
            oversample: 2,
            finco_samples_per_half_period: 32,
            finco_x_range: [0.05, 150.0],
            finco_n_x: 3000,
        }
    }
}

impl SpectrumConfig {
    pub fn settings(&self) -> SpectrumSettings {
        let window = match self.window {
            WindowConfig::Hann => Window::Hann,
            WindowConfig::Rectangular => Window::Rectangular,
        };
        SpectrumSettings { window, max_harmonic: self.max_harmonic, oversample: self.oversample }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub q0: [f64; 2],
    pub t_eval: f64,
    pub with_field: bool,
    pub max_turns: u32,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { q0: [1.2, -0.3], t_eval: 4.0 * PI, with_field: false, max_turns: 3 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn field_params(&self) -> FieldParams {
        FieldParams { f0: self.field.f0, omega: self.field.omega, n_periods: self.field.n_periods }
    }

    pub fn physical_setup(&self) -> PhysicalSetup {
        PhysicalSetup { ionization_potential: self.setup.ionization_potential }
    }

    pub fn half_period(&self) -> f64 {
        PI / self.field.omega
    }

    /// Validate every section and snap the quantum step so that it divides
    /// half a field period. Resolving twice is a no-op.
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        self.field_params().validate().map_err(|e| invalid(format!("field: {e}")))?;
        if self.field.n_periods.fract() != 0.0 || self.field.n_periods < 1.0 {
            return Err(invalid("field: n_periods must be a positive whole number"));
        }
        if !(self.setup.ionization_potential > 0.0) {
            return Err(invalid("setup: ionization_potential must be positive"));
        }
        self.contour.settings().validate().map_err(|e| invalid(format!("contour: {e}")))?;
        let tol = &self.integrator;
        if !(tol.rtol > 0.0 && tol.atol > 0.0 && tol.q_min > 0.0 && tol.overflow > 1.0 && tol.h_min > 0.0 && tol.max_steps > 0) {
            return Err(invalid("integrator: tolerances and guards must be positive"));
        }
        if !(self.filter.caustic_cutoff > 0.0) || self.filter.sigma_cap.is_nan() {
            return Err(invalid("filter: caustic_cutoff must be positive and sigma_cap a number"));
        }
        check_gamma("ground_state", self.ground_state.gamma)?;
        if self.ground_state.multiples_of_4pi.is_empty() {
            return Err(invalid("ground_state.multiples_of_4pi must not be empty"));
        }
        check_gamma("strong_field", self.strong_field.gamma)?;
        check_range("ground_state.x_range", self.ground_state.x_range, self.ground_state.n_x)?;
        check_range("strong_field.x_range", self.strong_field.x_range, self.strong_field.n_x)?;
        check_range("spectrum.finco_x_range", self.spectrum.finco_x_range, self.spectrum.finco_n_x)?;
        if self.spectrum.finco_x_range[0] <= 0.0 {
            return Err(invalid("spectrum.finco_x_range must start above 0"));
        }
        let gs_manifold = self.ground_state.manifold.to_manifold()?;
        let sf_manifold = self.strong_field.manifold.to_manifold()?;
        if gs_manifold.masks.iter().any(|m| m.name.is_empty()) || sf_manifold.masks.iter().any(|m| m.name.is_empty()) {
            return Err(invalid("masks need names"));
        }
        if self.strong_field.snapshot_periods.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(invalid("strong_field.snapshot_periods must be non-negative"));
        }
        for p in &self.processes {
            if let Some(m) = &p.mask {
                if sf_manifold.mask(m).is_none() {
                    return Err(invalid(format!("process {}: unknown mask {m}", p.name)));
                }
            }
            p.recipe(0.0).validate().map_err(|e| invalid(format!("process {}: {e}", p.name)))?;
        }
        let mut names: Vec<&str> = self.processes.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("process names must be unique"));
        }
        if self.spectrum.finco_samples_per_half_period == 0 || self.spectrum.oversample == 0 || !(self.spectrum.max_harmonic > 0.0) {
            return Err(invalid("spectrum: sampling and harmonic range must be positive"));
        }
        self.quantum.dt = QuantumGrid::snapped_dt(self.quantum.dt, self.half_period()).0;
        self.quantum.grid().validate().map_err(|e| invalid(format!("quantum: {e}")))?;
        if !(self.diagnostics.t_eval >= 0.0) || self.diagnostics.max_turns == 0 {
            return Err(invalid("diagnostics: t_eval must be non-negative and max_turns positive"));
        }
        if !(self.diagnostics.q0[0] > 0.0) {
            return Err(invalid("diagnostics: q0 must have a positive real part"));
        }
        Ok(self)
    }
}

fn check_gamma(section: &str, gamma: f64) -> Result<(), ConfigError> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{section}: gamma must be positive")))
    }
}

fn check_range(name: &str, r: [f64; 2], n: usize) -> Result<(), ConfigError> {
    if r[0] < r[1] && r[0].is_finite() && r[1].is_finite() && n >= 2 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be ascending with at least two points")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_and_round_trip() {
        let cfg = RunConfig::default().resolve().unwrap();
        let text = cfg.to_toml().unwrap();
        let again = RunConfig::parse(&text).unwrap().resolve().unwrap();
        assert_eq!(cfg, again);
        assert_eq!(again.to_toml().unwrap(), text);
    }

    #[test]
    fn resolved_step_divides_half_period() {
        let cfg = RunConfig::default().resolve().unwrap();
        let n = cfg.half_period() / cfg.quantum.dt;
        assert!((n - n.round()).abs() < 1e-9);
        assert!(cfg.quantum.dt <= 0.02);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = RunConfig { field: FieldConfig { f0: -1.0, ..FieldConfig::default() }, ..RunConfig::default() };
        assert!(matches!(bad.resolve(), Err(ConfigError::Invalid(_))));
        let mut bad = RunConfig::default();
        bad.processes[0].mask = Some("nowhere".into());
        assert!(matches!(bad.resolve(), Err(ConfigError::Invalid(_))));
        assert!(matches!(RunConfig::parse("[field]\nf1 = 2.0\n"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn partial_files_take_defaults() {
        let cfg = RunConfig::parse("[field]\nf0 = 0.05\n").unwrap();
        assert_eq!(cfg.field.f0, 0.05);
        assert_eq!(cfg.field.omega, 0.0735);
        assert_eq!(cfg.processes.len(), 4);
    }
}
