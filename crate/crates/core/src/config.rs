//! Simulation configuration.
//!
//! Lengths and explicit initial states are in atomic units. Durations are
//! in Bohr times `t₀ = 1/Z²` and frequencies in units of `1/t₀`, so a
//! configuration written for one `Z` describes the same scaled experiment
//! for any other.

use glam::DVec3;
use thiserror::Error;

use crate::units::{from_scaled, Dimension, C_AU};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForceFlags {
    pub coulomb: bool,
    pub radiation_reaction: bool,
    pub field_electric: bool,
    pub field_magnetic: bool,
}

impl ForceFlags {
    pub const NONE: ForceFlags = ForceFlags {
        coulomb: false,
        radiation_reaction: false,
        field_electric: false,
        field_magnetic: false,
    };

    pub const KEPLER: ForceFlags = ForceFlags { coulomb: true, ..Self::NONE };

    pub const RADIATING: ForceFlags = ForceFlags { radiation_reaction: true, ..Self::KEPLER };

    pub const SED: ForceFlags = ForceFlags { field_electric: true, ..Self::RADIATING };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldModel {
    None,
    /// Field evaluated at the nucleus only, three (or two, planar)
    /// independent Cartesian processes, no magnetic field.
    Dipole1d,
    /// Plane waves travelling along `±z` polarized in the orbital plane,
    /// with magnetic field and spatial phase.
    AxialPlaneWave,
}

/// Fixed field band, frequencies in `1/t₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedCutoff {
    pub omega_min: f64,
    pub omega_max: f64,
}

/// Band `[floor, clamp(multiple × ω_orbit, floor, ceiling)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovingCutoff {
    pub multiple: f64,
    pub floor: f64,
    pub ceiling: f64,
}

impl MovingCutoff {
    pub fn upper_edge(&self, orbital_freq: f64) -> f64 {
        (self.multiple * orbital_freq).clamp(self.floor, self.ceiling)
    }

    /// Same policy with frequencies multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> Self {
        Self { multiple: self.multiple, floor: self.floor * factor, ceiling: self.ceiling * factor }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutoffPolicy {
    Fixed(FixedCutoff),
    Moving(MovingCutoff),
}

impl CutoffPolicy {
    /// Band the field starts with, given the initial orbital frequency.
    pub fn initial_band(&self, orbital_freq: f64) -> (f64, f64) {
        match self {
            CutoffPolicy::Fixed(c) => (c.omega_min, c.omega_max),
            CutoffPolicy::Moving(m) => (m.floor, m.upper_edge(orbital_freq)),
        }
    }

    pub fn rescaled(&self, factor: f64) -> Self {
        match self {
            CutoffPolicy::Fixed(c) => CutoffPolicy::Fixed(FixedCutoff {
                omega_min: c.omega_min * factor,
                omega_max: c.omega_max * factor,
            }),
            CutoffPolicy::Moving(m) => CutoffPolicy::Moving(m.rescaled(factor)),
        }
    }

    /// Fixed band corresponding to wavelengths `lambda_min..lambda_max`
    /// (meters), expressed in `1/t₀` for charge `z`.
    pub fn wavelength_window(lambda_min_m: f64, lambda_max_m: f64, z: u32) -> Self {
        let a0 = crate::units::Constants::CODATA_2018.au_length_si;
        let omega = |lambda_m: f64| core::f64::consts::TAU * C_AU / (lambda_m / a0);
        let to_scaled = 1.0 / f64::from(z * z);
        CutoffPolicy::Fixed(FixedCutoff {
            omega_min: omega(lambda_max_m) * to_scaled,
            omega_max: omega(lambda_min_m) * to_scaled,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    /// `steps_per_orbit` equal steps per osculating period.
    FixedRk4,
    /// Step-doubling RK4 with local extrapolation.
    AdaptiveRk4 { tol: f64, dt_min: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    /// `r = (r0, 0, 0)`, `v = (0, √(Z/r0), 0)`, `r0` in a.u.
    Circular { r0: f64 },
    /// Position and velocity in a.u.
    Explicit { r: DVec3, v: DVec3 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSettings {
    /// Mode budget: number of frequency slots in the initial band.
    pub n_modes: u32,
    /// Drop the `z` component of the dipole field.
    pub planar: bool,
    /// Optional convergence factor `exp(-ω/ω_damp)` on mode amplitudes, `1/t₀`.
    pub damping: Option<f64>,
    /// Axial-model box length along `z`, a.u.
    pub box_lz: f64,
    /// Use the interpolated field cache (dipole model only).
    pub use_cache: bool,
}

impl Default for FieldSettings {
    fn default() -> Self {
        Self {
            n_modes: 1000,
            planar: true,
            damping: None,
            box_lz: from_scaled_length_si(0.41e-2),
            use_cache: true,
        }
    }
}

fn from_scaled_length_si(meters: f64) -> f64 {
    crate::units::from_si(meters, Dimension::Length)
}

/// Detector thresholds, all in Z-scaled Bohr units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSettings {
    pub collapse_radius: f64,
    pub ionization_threshold: f64,
    /// in `t₀`
    pub ionization_dwell: f64,
    pub l_crit: f64,
    /// Energies above this count as "near zero" for the critical-L monitor.
    pub l_energy_band: f64,
    pub stop_on_critical_l: bool,
    /// Discard histogram mass accumulated during a confirmed ionization.
    pub exclude_ionization: bool,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        Self {
            collapse_radius: 0.05,
            ionization_threshold: -0.05,
            ionization_dwell: 1.0e4,
            l_crit: 0.588,
            l_energy_band: -0.1,
            stop_on_critical_l: false,
            exclude_ionization: true,
        }
    }
}

/// Histogram ranges in Z-scaled units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramSettings {
    pub r_max: f64,
    pub r_bins: u32,
    pub l_max: f64,
    pub l_bins: u32,
}

impl Default for HistogramSettings {
    fn default() -> Self {
        Self { r_max: 10.0, r_bins: 200, l_max: 3.0, l_bins: 150 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub z: u32,
    pub forces: ForceFlags,
    pub field_model: FieldModel,
    pub cutoff: CutoffPolicy,
    pub field: FieldSettings,
    pub integrator: Integrator,
    pub steps_per_orbit: u32,
    pub field_updates_per_orbit: u32,
    /// Initial adaptive step, `t₀`.
    pub dt_init: f64,
    /// Duration, `t₀`.
    pub t_max: f64,
    pub seed: u64,
    pub initial_state: InitialState,
    /// a.u.
    pub singularity_radius: f64,
    /// Keep one trace row per this many integration steps.
    pub trace_stride: u32,
    pub detectors: DetectorSettings,
    pub histograms: HistogramSettings,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            z: 1,
            forces: ForceFlags::SED,
            field_model: FieldModel::Dipole1d,
            cutoff: CutoffPolicy::Moving(MovingCutoff { multiple: 2.5, floor: 0.05, ceiling: 20.0 }),
            field: FieldSettings::default(),
            integrator: Integrator::FixedRk4,
            steps_per_orbit: 4000,
            field_updates_per_orbit: 10,
            dt_init: 1e-3,
            t_max: 2.0 * core::f64::consts::PI * 1000.0,
            seed: 0,
            initial_state: InitialState::Circular { r0: 1.0 },
            singularity_radius: 1e-3,
            trace_stride: 400,
            detectors: DetectorSettings::default(),
            histograms: HistogramSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("nuclear charge Z must be at least 1")]
    InvalidCharge,
    #[error("steps_per_orbit ({steps}) must be at least twice field_updates_per_orbit ({updates})")]
    StepsPerOrbit { steps: u32, updates: u32 },
    #[error("field_updates_per_orbit must be positive")]
    FieldUpdates,
    #[error("t_max must be positive and finite")]
    Duration,
    #[error("field forces are enabled but field model is `none`")]
    FieldForcesWithoutField,
    #[error("invalid cutoff: {0}")]
    Cutoff(&'static str),
    #[error("mode budget must be at least 2")]
    ModeBudget,
    #[error("invalid integrator settings: {0}")]
    Integrator(&'static str),
    #[error("invalid initial state: {0}")]
    InitialState(&'static str),
    #[error("invalid {0}")]
    Other(&'static str),
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.z < 1 {
            return Err(ConfigError::InvalidCharge);
        }
        if self.field_updates_per_orbit == 0 {
            return Err(ConfigError::FieldUpdates);
        }
        if self.steps_per_orbit < 2 * self.field_updates_per_orbit {
            return Err(ConfigError::StepsPerOrbit {
                steps: self.steps_per_orbit,
                updates: self.field_updates_per_orbit,
            });
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(ConfigError::Duration);
        }
        if self.field_model == FieldModel::None
            && (self.forces.field_electric || self.forces.field_magnetic)
        {
            return Err(ConfigError::FieldForcesWithoutField);
        }
        match self.cutoff {
            CutoffPolicy::Fixed(c) => {
                if !(c.omega_min >= 0.0 && c.omega_min < c.omega_max && c.omega_max.is_finite()) {
                    return Err(ConfigError::Cutoff("need 0 <= omega_min < omega_max"));
                }
            }
            CutoffPolicy::Moving(m) => {
                if !(m.multiple > 1.0) {
                    return Err(ConfigError::Cutoff("multiple must exceed 1"));
                }
                if !(m.floor >= 0.0 && m.floor < m.ceiling && m.ceiling.is_finite()) {
                    return Err(ConfigError::Cutoff("need 0 <= floor < ceiling"));
                }
            }
        }
        if self.field_model != FieldModel::None && self.field.n_modes < 2 {
            return Err(ConfigError::ModeBudget);
        }
        if let Some(d) = self.field.damping {
            if !(d > 0.0) {
                return Err(ConfigError::Other("damping frequency"));
            }
        }
        if !(self.field.box_lz > 0.0) {
            return Err(ConfigError::Other("box_lz"));
        }
        if let Integrator::AdaptiveRk4 { tol, dt_min } = self.integrator {
            if !(tol > 0.0) {
                return Err(ConfigError::Integrator("tolerance must be positive"));
            }
            if !(dt_min > 0.0) {
                return Err(ConfigError::Integrator("dt_min must be positive"));
            }
            if !(self.dt_init > dt_min) {
                return Err(ConfigError::Integrator("dt_init must exceed dt_min"));
            }
        }
        match self.initial_state {
            InitialState::Circular { r0 } => {
                if !(r0 > self.singularity_radius && r0.is_finite()) {
                    return Err(ConfigError::InitialState("circular radius"));
                }
            }
            InitialState::Explicit { r, v } => {
                if !(r.length() > self.singularity_radius) || !r.is_finite() || !v.is_finite() {
                    return Err(ConfigError::InitialState("position at the singularity"));
                }
            }
        }
        if !(self.singularity_radius > 0.0) {
            return Err(ConfigError::Other("singularity_radius"));
        }
        if self.trace_stride == 0 {
            return Err(ConfigError::Other("trace_stride"));
        }
        let d = &self.detectors;
        if !(d.collapse_radius >= 0.0) || !(d.ionization_dwell > 0.0) || !(d.l_crit >= 0.0) {
            return Err(ConfigError::Other("detector thresholds"));
        }
        let h = &self.histograms;
        if !(h.r_max > 0.0 && h.l_max > 0.0) || h.r_bins == 0 || h.l_bins == 0 {
            return Err(ConfigError::Other("histogram settings"));
        }
        Ok(())
    }

    /// Whether any force term reads the stochastic field.
    pub fn field_active(&self) -> bool {
        self.field_model != FieldModel::None && (self.forces.field_electric || self.forces.field_magnetic)
    }

    pub fn bohr_time(&self) -> f64 {
        crate::units::bohr_time(self.z)
    }

    pub fn t_max_au(&self) -> f64 {
        from_scaled(self.t_max, self.z, Dimension::Time)
    }

    /// Initial position and velocity in a.u.
    pub fn initial_phase_point(&self) -> (DVec3, DVec3) {
        match self.initial_state {
            InitialState::Circular { r0 } => {
                let speed = libm::sqrt(f64::from(self.z) / r0);
                (DVec3::new(r0, 0.0, 0.0), DVec3::new(0.0, speed, 0.0))
            }
            InitialState::Explicit { r, v } => (r, v),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn invariants_enforced() {
        let mut c = SimConfig { z: 0, ..Default::default() };
        assert_eq!(c.validate(), Err(ConfigError::InvalidCharge));

        c = SimConfig { steps_per_orbit: 19, field_updates_per_orbit: 10, ..Default::default() };
        assert!(matches!(c.validate(), Err(ConfigError::StepsPerOrbit { .. })));

        c = SimConfig { t_max: 0.0, ..Default::default() };
        assert_eq!(c.validate(), Err(ConfigError::Duration));

        c = SimConfig { field_model: FieldModel::None, ..Default::default() };
        assert_eq!(c.validate(), Err(ConfigError::FieldForcesWithoutField));
        c.forces = ForceFlags::RADIATING;
        c.validate().unwrap();

        c = SimConfig {
            cutoff: CutoffPolicy::Fixed(FixedCutoff { omega_min: 2.0, omega_max: 1.0 }),
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(ConfigError::Cutoff(_))));
        c.cutoff = CutoffPolicy::Moving(MovingCutoff { multiple: 1.0, floor: 0.1, ceiling: 1.0 });
        assert!(matches!(c.validate(), Err(ConfigError::Cutoff(_))));
    }

    #[test]
    fn moving_cutoff_tracks_orbit_within_clamps() {
        let m = MovingCutoff { multiple: 2.5, floor: 0.05, ceiling: 20.0 };
        assert_eq!(m.upper_edge(1.0), 2.5);
        assert_eq!(m.upper_edge(100.0), 20.0);
        assert_eq!(m.upper_edge(0.001), 0.05);
    }

    #[test]
    fn circular_initial_state() {
        let c = SimConfig { z: 3, initial_state: InitialState::Circular { r0: 1.0 / 3.0 }, ..Default::default() };
        let (r, v) = c.initial_phase_point();
        assert_eq!(r.y, 0.0);
        assert!((v.y - 3.0).abs() < 1e-14);
    }

    #[test]
    fn wavelength_window_orders_band() {
        let CutoffPolicy::Fixed(c) = CutoffPolicy::wavelength_window(0.1e-10, 900e-10, 1) else {
            panic!()
        };
        assert!(c.omega_min < c.omega_max);
        // λ = 900 Å → ω = 2πc/λ ≈ 0.5065 a.u.
        assert!((c.omega_min - 0.5065).abs() < 1e-3);
        assert!((c.omega_max / c.omega_min - 9000.0).abs() < 1e-6);
    }
}
