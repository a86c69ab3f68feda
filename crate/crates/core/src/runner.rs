//! Single trajectories and seeded ensembles.
//!
//! A run advances in windows of one osculating period. At the start of
//! every window the orbital elements are recomputed, the moving cutoff
//! (if any) is applied, and a field cache covering the window is built;
//! then the window is integrated and every step is recorded and fed to
//! the detectors. [`RunState`] holds everything the loop reads, so a
//! clone taken at a window boundary resumes bitwise-identically.

use alloc::vec::Vec;

use core::f64::consts::TAU;
use glam::DVec3;
use thiserror::Error;

use crate::config::{ConfigError, CutoffPolicy, FieldModel, Integrator, SimConfig};
use crate::diagnostics::{
    ks_distance, weighted_quantile, CollapseDetector, CriticalLMonitor, DetectorVerdict, DiagnosticsError,
    IonizationDetector, IonizationStep, Trace, TraceRow, VerdictKind, WeightedHistogram,
};
use crate::dynamics::{adaptive_step, rk4_step, DynamicsError, ForceModel, State, StepControl};
use crate::field::{
    apply_moving_cutoff, sample_modes, FieldCache, FieldError, FieldProvider, FieldSample, FieldSpec, ModeModel,
    ModeSet, NoField,
};
use crate::orbit::{elements_from_state, OrbitElements};
use crate::quantum::radial_cdf;
use crate::units::{from_scaled, scaled_report, Dimension};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("ensemble needs at least one run")]
    EmptyEnsemble,
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    TimeLimit,
    Collapse,
    Ionization,
    CriticalL,
    /// The adaptive step fell below `dt_min` at this scaled time.
    Stiffness { t: f64, dt: f64 },
    /// The field could not be evaluated (internal inconsistency).
    FieldFailure { t: f64 },
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::TimeLimit => "time_limit",
            Termination::Collapse => "collapse",
            Termination::Ionization => "ionization",
            Termination::CriticalL => "critical_L",
            Termination::Stiffness { .. } => "stiffness",
            Termination::FieldFailure { .. } => "field_failure",
        }
    }
}

/// Work counters. Deliberately free of wall-clock time so outputs stay
/// reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunMetrics {
    pub steps: u64,
    pub rejected_steps: u64,
    pub windows: u64,
    /// Windows in which the active band changed.
    pub band_changes: u64,
    pub cache_builds: u64,
}

/// Per-step bookkeeping: trace, histograms and detector states.
#[derive(Debug, Clone, PartialEq)]
pub struct Recorder {
    pub trace: Trace,
    pub hist_r: WeightedHistogram,
    pub hist_l: WeightedHistogram,
    /// Samples of an open ionization candidate, held back until it is
    /// either cleared or confirmed.
    pub pending_r: WeightedHistogram,
    pub pending_l: WeightedHistogram,
    pub collapse: CollapseDetector,
    pub ionization: IonizationDetector,
    pub critical: CriticalLMonitor,
    pub exclude_ionization: bool,
    pub stop_on_critical_l: bool,
}

impl Recorder {
    fn new(config: &SimConfig) -> Result<Self, RunError> {
        let h = &config.histograms;
        let bad = |_: DiagnosticsError| ConfigError::Other("histogram settings");
        let hist_r = WeightedHistogram::uniform(0.0, h.r_max, h.r_bins as usize).map_err(bad)?;
        let hist_l = WeightedHistogram::uniform(0.0, h.l_max, h.l_bins as usize).map_err(bad)?;
        let d = &config.detectors;
        Ok(Self {
            trace: Trace::new(config.trace_stride),
            pending_r: hist_r.clone(),
            pending_l: hist_l.clone(),
            hist_r,
            hist_l,
            collapse: CollapseDetector::new(d.collapse_radius),
            ionization: IonizationDetector::new(d.ionization_threshold, d.ionization_dwell),
            critical: CriticalLMonitor::new(d.l_crit, d.l_energy_band),
            exclude_ionization: d.exclude_ionization,
            stop_on_critical_l: d.stop_on_critical_l,
        })
    }

    fn flush_pending(&mut self, keep: bool) {
        if keep {
            // Edges are identical by construction.
            let _ = self.hist_r.merge(&self.pending_r);
            let _ = self.hist_l.merge(&self.pending_l);
        }
        self.pending_r.clear();
        self.pending_l.clear();
    }

    /// Records one scaled sample; returns the reason to stop, if any.
    fn observe(&mut self, row: TraceRow) -> Option<Termination> {
        // Rows are produced in strictly increasing time with positive weight.
        let _ = self.trace.record(row);
        self.critical.observe(row.t, row.dt_weight, row.l, row.energy);
        if self.collapse.observe(row.t, row.r) {
            self.hist_r.add(row.r, row.dt_weight);
            self.hist_l.add(row.l, row.dt_weight);
            return Some(Termination::Collapse);
        }
        match self.ionization.observe(row.t, row.dt_weight, row.energy) {
            IonizationStep::Idle => {
                self.hist_r.add(row.r, row.dt_weight);
                self.hist_l.add(row.l, row.dt_weight);
            }
            IonizationStep::Candidate { .. } => {
                self.pending_r.add(row.r, row.dt_weight);
                self.pending_l.add(row.l, row.dt_weight);
            }
            IonizationStep::Cleared => {
                self.flush_pending(true);
                self.hist_r.add(row.r, row.dt_weight);
                self.hist_l.add(row.l, row.dt_weight);
            }
            IonizationStep::Fired { .. } => {
                self.pending_r.add(row.r, row.dt_weight);
                self.pending_l.add(row.l, row.dt_weight);
                self.flush_pending(!self.exclude_ionization);
                return Some(Termination::Ionization);
            }
        }
        if self.stop_on_critical_l && self.critical.first_flag.is_some() {
            return Some(Termination::CriticalL);
        }
        None
    }
}

/// Complete, checkpointable state of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub config: SimConfig,
    pub state: State,
    pub modes: Option<ModeSet>,
    /// Length of the most recent window (a.u.), reused while unbound.
    pub period: f64,
    /// Step proposal carried between adaptive steps (a.u.).
    pub dt_next: f64,
    pub recorder: Recorder,
    pub metrics: RunMetrics,
    pub termination: Option<Termination>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub config: SimConfig,
    pub trace: Trace,
    pub hist_r: WeightedHistogram,
    pub hist_l: WeightedHistogram,
    /// Collapse, ionization and critical-L verdicts, in that order.
    pub verdicts: [DetectorVerdict; 3],
    pub termination: Termination,
    pub metrics: RunMetrics,
    /// Final state, a.u.
    pub final_state: State,
    /// Active band at the end of the run, `1/t₀`.
    pub final_band: Option<(f64, f64)>,
}

impl RunOutput {
    /// The verdict that ended the run, or the critical-L report if it fired.
    pub fn primary_verdict(&self) -> &DetectorVerdict {
        self.verdicts.iter().find(|v| v.fired()).unwrap_or(&self.verdicts[2])
    }

    pub fn collapsed(&self) -> bool {
        self.verdicts[0].kind == VerdictKind::Collapse
    }

    pub fn ionized(&self) -> bool {
        self.verdicts[1].kind == VerdictKind::Ionization
    }
}

/// `2π√(r³/Z)`: the circular period at the current radius, used while unbound.
fn circular_period(state: &State, z: f64) -> f64 {
    let d = state.r.length();
    TAU * libm::sqrt(d * d * d / z)
}

fn orbital_frequency(elements: &OrbitElements, state: &State, z: f64) -> f64 {
    elements.orbital_omega.unwrap_or_else(|| TAU / circular_period(state, z))
}

enum WindowField<'a> {
    Off(NoField),
    Cached(FieldCache),
    Direct(&'a ModeSet),
}

impl FieldProvider for WindowField<'_> {
    fn field_at(&self, t: f64, r: DVec3) -> Result<FieldSample, FieldError> {
        match self {
            WindowField::Off(f) => f.field_at(t, r),
            WindowField::Cached(c) => c.field_at(t, r),
            WindowField::Direct(m) => m.field_at(t, r),
        }
    }
}

impl RunState {
    pub fn new(config: SimConfig) -> Result<Self, RunError> {
        config.validate()?;
        let z = f64::from(config.z);
        let (r, v) = config.initial_phase_point();
        let state = State::new(0.0, r, v);
        let elements = elements_from_state(&state, z).map_err(|_| ConfigError::InitialState("position"))?;
        let scale = f64::from(config.z * config.z);
        let modes = if config.field_active() {
            let spec = FieldSpec::from_config(&config)?;
            let band = config.cutoff.rescaled(scale).initial_band(orbital_frequency(&elements, &state, z));
            Some(sample_modes(&spec, band)?)
        } else {
            None
        };
        let period = elements.period().unwrap_or_else(|| circular_period(&state, z));
        let dt_next = from_scaled(config.dt_init, config.z, Dimension::Time);
        Ok(Self {
            recorder: Recorder::new(&config)?,
            config,
            state,
            modes,
            period,
            dt_next,
            metrics: RunMetrics::default(),
            termination: None,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.termination.is_some()
    }

    /// Current time in `t₀`.
    pub fn time(&self) -> f64 {
        scaled_report(self.state.t, self.config.z, Dimension::Time)
    }

    fn force_model(&self) -> ForceModel {
        ForceModel::new(self.config.z, self.config.forces, self.config.singularity_radius)
    }

    fn finish_with(&mut self, reason: Termination) {
        self.termination = Some(reason);
    }

    fn handle_error(&mut self, pre: &State, err: DynamicsError) {
        let z = self.config.z;
        match err {
            DynamicsError::Singularity { state } => {
                let rec = &mut self.recorder;
                rec.collapse.observe(
                    scaled_report(pre.t, z, Dimension::Time),
                    scaled_report(pre.r.length(), z, Dimension::Length),
                );
                if rec.collapse.fired_at.is_none() {
                    rec.collapse.fired_at = Some(scaled_report(state.t, z, Dimension::Time));
                }
                self.finish_with(Termination::Collapse);
            }
            DynamicsError::Stiffness { state, dt } => self.finish_with(Termination::Stiffness {
                t: scaled_report(state.t, z, Dimension::Time),
                dt: scaled_report(dt, z, Dimension::Time),
            }),
            DynamicsError::Field(_) => {
                self.finish_with(Termination::FieldFailure { t: scaled_report(pre.t, z, Dimension::Time) })
            }
        }
    }

    /// Records the sample `pre` held for `dt`; sets the termination if a detector fires.
    fn record(&mut self, pre: &State, dt: f64) -> bool {
        let z = self.config.z;
        let elements = match elements_from_state(pre, f64::from(z)) {
            Ok(e) => e,
            Err(_) => {
                self.recorder.collapse.fired_at.get_or_insert(scaled_report(pre.t, z, Dimension::Time));
                self.finish_with(Termination::Collapse);
                return true;
            }
        };
        match self.recorder.observe(TraceRow::from_state(pre, &elements, dt, z)) {
            Some(reason) => {
                self.finish_with(reason);
                true
            }
            None => false,
        }
    }

    /// Integrates one window. No-op once finished.
    pub fn advance_window(&mut self) {
        if self.is_finished() {
            return;
        }
        let z = f64::from(self.config.z);
        let t_max = self.config.t_max_au();
        if self.state.t >= t_max {
            self.finish_with(Termination::TimeLimit);
            return;
        }
        let elements = match elements_from_state(&self.state, z) {
            Ok(e) => e,
            Err(_) => {
                let pre = self.state;
                self.handle_error(&pre, DynamicsError::Singularity { state: pre });
                return;
            }
        };
        if let Some(p) = elements.period() {
            self.period = p;
        } else {
            self.period = circular_period(&self.state, z);
        }
        self.metrics.windows += 1;

        // Moving cutoff, only while an orbital frequency is defined.
        if let (Some(modes), CutoffPolicy::Moving(policy), Some(omega)) =
            (self.modes.as_ref(), self.config.cutoff, elements.orbital_omega)
        {
            let policy = policy.rescaled(z * z);
            let updated = apply_moving_cutoff(modes, omega, &policy);
            if updated.band != modes.band {
                self.metrics.band_changes += 1;
                self.modes = Some(updated);
            }
        }

        let modes = self.modes.take();
        self.integrate_window(modes.as_ref(), t_max);
        self.modes = modes;
    }

    fn integrate_window(&mut self, modes: Option<&ModeSet>, t_max: f64) {
        let t_start = self.state.t;
        let t_end = (t_start + self.period).min(t_max);
        let field = match modes {
            None => WindowField::Off(NoField),
            Some(m) if m.model == ModeModel::Dipole1d && self.config.field.use_cache => {
                let updates = f64::from(self.config.field_updates_per_orbit);
                let knots = libm::ceil(updates * (t_end - t_start) / self.period).max(1.0) as usize + 1;
                match FieldCache::new(m, t_start, t_end, knots, DVec3::ZERO) {
                    Ok(c) => {
                        self.metrics.cache_builds += 1;
                        WindowField::Cached(c)
                    }
                    Err(_) => {
                        self.finish_with(Termination::FieldFailure { t: self.time() });
                        return;
                    }
                }
            }
            Some(m) => WindowField::Direct(m),
        };
        let model = self.force_model();
        let mut accel = |s: &State| model.total_accel(s, &field).map(|f| f.total);

        match self.config.integrator {
            Integrator::FixedRk4 => {
                let nominal = self.period / f64::from(self.config.steps_per_orbit);
                let n = libm::ceil((t_end - t_start) / nominal * (1.0 - 1e-12)).max(1.0) as u64;
                let h = (t_end - t_start) / n as f64;
                for k in 0..n {
                    let t_next = if k + 1 == n { t_end } else { t_start + h * (k + 1) as f64 };
                    let pre = self.state;
                    let dt = t_next - pre.t;
                    match rk4_step(&pre, dt, &mut accel) {
                        Ok(mut s) => {
                            s.t = t_next;
                            self.state = s;
                        }
                        Err(e) => {
                            self.handle_error(&pre, e);
                            return;
                        }
                    }
                    self.metrics.steps += 1;
                    if self.record(&pre, dt) {
                        return;
                    }
                }
            }
            Integrator::AdaptiveRk4 { tol, dt_min } => {
                let dt_min = from_scaled(dt_min, self.config.z, Dimension::Time);
                while self.state.t < t_end {
                    let pre = self.state;
                    let remaining = t_end - pre.t;
                    let control = StepControl { tol, dt_min: dt_min.min(remaining), dt_max: remaining };
                    match adaptive_step(&pre, self.dt_next, &control, &mut accel) {
                        Ok(step) => {
                            let mut s = step.state;
                            let clamped = step.dt_used >= remaining;
                            if clamped {
                                s.t = t_end;
                            }
                            if !clamped || step.dt_next > self.dt_next {
                                self.dt_next = step.dt_next;
                            }
                            self.state = s;
                            self.metrics.steps += 1;
                            self.metrics.rejected_steps += u64::from(step.rejected);
                            if self.record(&pre, s.t - pre.t) {
                                return;
                            }
                        }
                        Err(e) => {
                            self.handle_error(&pre, e);
                            return;
                        }
                    }
                }
            }
        }
        if self.state.t >= t_max {
            self.finish_with(Termination::TimeLimit);
        }
    }

    /// Runs whole windows until the scaled time reaches `t_stop` (or the run ends).
    pub fn run_until(&mut self, t_stop: f64) {
        while !self.is_finished() && self.time() < t_stop {
            self.advance_window();
        }
    }

    pub fn run_to_end(&mut self) {
        while !self.is_finished() {
            self.advance_window();
        }
    }

    pub fn into_output(mut self) -> RunOutput {
        if self.recorder.ionization.fired_at.is_none() {
            self.recorder.flush_pending(true);
        }
        let scale = f64::from(self.config.z * self.config.z);
        RunOutput {
            final_band: self.modes.as_ref().map(|m| (m.band.0 / scale, m.band.1 / scale)),
            verdicts: [
                self.recorder.collapse.verdict(),
                self.recorder.ionization.verdict(),
                self.recorder.critical.verdict(),
            ],
            termination: self.termination.unwrap_or(Termination::TimeLimit),
            config: self.config,
            trace: self.recorder.trace,
            hist_r: self.recorder.hist_r,
            hist_l: self.recorder.hist_l,
            metrics: self.metrics,
            final_state: self.state,
        }
    }
}

pub fn run_trajectory(config: SimConfig) -> Result<RunOutput, RunError> {
    let mut run = RunState::new(config)?;
    run.run_to_end();
    Ok(run.into_output())
}

/// Weighted 5th, 50th and 95th percentiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Percentiles {
    pub p05: f64,
    pub p50: f64,
    pub p95: f64,
}

impl Percentiles {
    fn of(mut samples: Vec<(f64, f64)>) -> Option<Self> {
        Some(Self {
            p05: weighted_quantile(&mut samples, 0.05)?,
            p50: weighted_quantile(&mut samples, 0.50)?,
            p95: weighted_quantile(&mut samples, 0.95)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub result: Result<RunOutput, RunError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub runs: Vec<RunRecord>,
    pub pooled_r: WeightedHistogram,
    pub pooled_l: WeightedHistogram,
    /// KS distance of the pooled radial histogram to the ground-state CDF (scaled).
    pub ks_qm: Option<f64>,
    pub energy: Option<Percentiles>,
    pub eccentricity: Option<Percentiles>,
    pub radius: Option<Percentiles>,
}

impl EnsembleSummary {
    pub fn completed(&self) -> impl Iterator<Item = &RunOutput> {
        self.runs.iter().filter_map(|r| r.result.as_ref().ok())
    }
}

/// Seeds `seed_base + i` for `i < n_runs`.
pub fn ensemble_seeds(seed_base: u64, n_runs: u32) -> impl Iterator<Item = u64> {
    (0..u64::from(n_runs)).map(move |i| seed_base.wrapping_add(i))
}

pub fn config_for_seed(config: &SimConfig, seed: u64) -> SimConfig {
    SimConfig { seed, ..*config }
}

/// Pools run results in the given order (callers pass them seed-ordered).
pub fn summarize(config: &SimConfig, runs: Vec<RunRecord>) -> Result<EnsembleSummary, RunError> {
    if runs.is_empty() {
        return Err(RunError::EmptyEnsemble);
    }
    let template = Recorder::new(config)?;
    let mut pooled_r = template.hist_r;
    let mut pooled_l = template.hist_l;
    let mut energy = Vec::new();
    let mut ecc = Vec::new();
    let mut radius = Vec::new();
    for out in runs.iter().filter_map(|r| r.result.as_ref().ok()) {
        pooled_r.merge(&out.hist_r).map_err(|_| ConfigError::Other("histogram settings"))?;
        pooled_l.merge(&out.hist_l).map_err(|_| ConfigError::Other("histogram settings"))?;
        for row in &out.trace.rows {
            energy.push((row.energy, row.dt_weight));
            ecc.push((row.eccentricity, row.dt_weight));
            radius.push((row.r, row.dt_weight));
        }
    }
    let ks_qm = ks_distance(&pooled_r, |r| radial_cdf(r, 1.0)).ok();
    Ok(EnsembleSummary {
        runs,
        pooled_r,
        pooled_l,
        ks_qm,
        energy: Percentiles::of(energy),
        eccentricity: Percentiles::of(ecc),
        radius: Percentiles::of(radius),
    })
}

/// Sequential ensemble; the `sed-sim` crate runs the same seeds in parallel.
pub fn run_ensemble(config: &SimConfig, n_runs: u32, seed_base: u64) -> Result<EnsembleSummary, RunError> {
    if n_runs == 0 {
        return Err(RunError::EmptyEnsemble);
    }
    let runs = ensemble_seeds(seed_base, n_runs)
        .map(|seed| RunRecord { seed, result: run_trajectory(config_for_seed(config, seed)) })
        .collect();
    summarize(config, runs)
}

/// Whether the field model needs a mode set at all.
pub fn uses_modes(config: &SimConfig) -> bool {
    config.field_active() && config.field_model != FieldModel::None
}
