//! Stochastic zero-point field as a finite sum of Gaussian-amplitude modes.
//!
//! Each mode contributes `scale · (A cos(k·r − ωt) − B sin(k·r − ωt)) ê`
//! with `A`, `B` independent standard normals. Frequencies sit on a
//! uniform midpoint mesh; slot `j` of the mesh has the fixed frequency
//! `origin + (j + ½)Δω` and reads its amplitudes from RNG stream `j`, so
//! moving the band edges adds or drops slots without touching survivors.
//!
//! Two geometries:
//!
//! - dipole: three (or two, planar) independent Cartesian processes with
//!   `k = 0` and no magnetic field, `scale² = (4π/3)ρ(ω)Δω` so the summed
//!   per-component variance is `(4π/3)∫ρ dω`;
//! - axial: waves along `±z` on the box lattice `k = 2πn/L_z`, each
//!   polarized along `x` or `y`, with `B = k̂ × E` per wave; each
//!   direction carries half of the per-component variance.

mod cache;
mod spectrum;
pub mod stats;

use alloc::vec::Vec;

use glam::DVec3;
use thiserror::Error;

use crate::config::{FieldModel, MovingCutoff, SimConfig};
use crate::rng::{GaussianStream, RngSpec};
use crate::units::{from_scaled, Dimension, C_AU};

pub use cache::FieldCache;
pub use spectrum::{
    analytic_band_energy, autocorrelation_oracle, spectral_density, COMPONENT_VARIANCE_FACTOR,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("negative frequency {0}")]
    NegativeFrequency(f64),
    #[error("invalid band [{lo}, {hi}]")]
    InvertedBand { lo: f64, hi: f64 },
    #[error("band has zero width")]
    EmptyBand,
    #[error("mode budget {0} is below 2")]
    ModeBudget(u32),
    #[error("frequency mesh spacing {spacing} is finer than the box lattice {lattice}")]
    MeshFinerThanBox { spacing: f64, lattice: f64 },
    #[error("field model `none` has no modes")]
    NoModel,
    #[error("time {t} is outside the field cache [{start}, {end}]")]
    OutsideCache { t: f64, start: f64, end: f64 },
    #[error("a field cache needs at least 2 knots")]
    TooFewKnots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeModel {
    Dipole1d,
    AxialPlaneWave,
}

/// One polarized component of a mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub amp_cos: f64,
    pub amp_sin: f64,
    pub polarization: DVec3,
    /// Zero in the dipole model.
    pub k_vec: DVec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub slot: u64,
    pub omega: f64,
    /// Field amplitude per unit variate.
    pub scale: f64,
    pub waves: Vec<Wave>,
}

/// Uniform frequency mesh; slot `j` is centered at `origin + (j + ½)·spacing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshGrid {
    pub origin: f64,
    pub spacing: f64,
}

impl MeshGrid {
    pub fn center(&self, slot: u64) -> f64 {
        self.origin + (slot as f64 + 0.5) * self.spacing
    }

    /// Slots whose centers lie in `[lo, hi]`.
    pub fn slots_in(&self, lo: f64, hi: f64) -> core::ops::Range<u64> {
        let first = libm::ceil((lo - self.origin) / self.spacing - 0.5).max(0.0);
        let last = libm::floor((hi - self.origin) / self.spacing - 0.5);
        if last < first {
            return 0..0;
        }
        let (mut first, mut last) = (first as u64, last as u64);
        // Floor/ceil can land one slot off when a center sits on an edge.
        while first > 0 && self.center(first - 1) >= lo {
            first -= 1;
        }
        while self.center(first) < lo {
            first += 1;
        }
        while self.center(last + 1) <= hi {
            last += 1;
        }
        if self.center(last) > hi {
            if last == 0 {
                return 0..0;
            }
            last -= 1;
        }
        if last < first {
            return 0..0;
        }
        first..last + 1
    }
}

/// Mode-synthesis parameters in atomic units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSpec {
    pub model: ModeModel,
    pub n_modes: u32,
    pub seed: u64,
    pub planar: bool,
    pub damping: Option<f64>,
    pub box_lz: f64,
}

impl FieldSpec {
    pub fn from_config(config: &SimConfig) -> Result<Self, FieldError> {
        let model = match config.field_model {
            FieldModel::None => return Err(FieldError::NoModel),
            FieldModel::Dipole1d => ModeModel::Dipole1d,
            FieldModel::AxialPlaneWave => ModeModel::AxialPlaneWave,
        };
        let to_au = 1.0 / from_scaled(1.0, config.z, Dimension::Time);
        Ok(Self {
            model,
            n_modes: config.field.n_modes,
            seed: config.seed,
            planar: config.field.planar,
            damping: config.field.damping.map(|w| w * to_au),
            box_lz: config.field.box_lz,
        })
    }
}

/// A frozen realization of the field over an active band.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub model: ModeModel,
    pub grid: MeshGrid,
    pub band: (f64, f64),
    /// Base RNG spec; slot `j` reads stream `j`.
    pub rng: RngSpec,
    pub planar: bool,
    pub damping: Option<f64>,
    pub box_lz: f64,
    pub modes: Vec<Mode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldSample {
    pub e: DVec3,
    pub b: DVec3,
    pub t: f64,
}

/// Anything that can supply the field at `(t, r)`.
pub trait FieldProvider {
    fn field_at(&self, t: f64, r: DVec3) -> Result<FieldSample, FieldError>;
}

/// Zero field everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoField;

impl FieldProvider for NoField {
    fn field_at(&self, t: f64, _r: DVec3) -> Result<FieldSample, FieldError> {
        Ok(FieldSample { t, ..Default::default() })
    }
}

impl FieldProvider for ModeSet {
    fn field_at(&self, t: f64, r: DVec3) -> Result<FieldSample, FieldError> {
        Ok(eval_field(self, t, r))
    }
}

/// Draws a mode set with `spec.n_modes` slots uniformly meshed over `band` (a.u.).
pub fn sample_modes(spec: &FieldSpec, band: (f64, f64)) -> Result<ModeSet, FieldError> {
    let (lo, hi) = band;
    spectrum::check_band(lo, hi)?;
    if hi == lo {
        return Err(FieldError::EmptyBand);
    }
    if spec.n_modes < 2 {
        return Err(FieldError::ModeBudget(spec.n_modes));
    }
    let grid = MeshGrid { origin: lo, spacing: (hi - lo) / f64::from(spec.n_modes) };
    if spec.model == ModeModel::AxialPlaneWave {
        let lattice = box_lattice(spec.box_lz);
        if grid.spacing < lattice {
            return Err(FieldError::MeshFinerThanBox { spacing: grid.spacing, lattice });
        }
    }
    let mut set = ModeSet {
        model: spec.model,
        grid,
        band,
        rng: RngSpec::new(spec.seed, 0),
        planar: spec.planar,
        damping: spec.damping,
        box_lz: spec.box_lz,
        modes: Vec::new(),
    };
    set.modes = (0..u64::from(spec.n_modes)).map(|j| set.draw_mode(j)).collect();
    Ok(set)
}

/// Angular-frequency spacing of the `±z` box lattice, `c·2π/L_z`.
pub fn box_lattice(box_lz: f64) -> f64 {
    C_AU * core::f64::consts::TAU / box_lz
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn slot_frequency(&self, slot: u64) -> f64 {
        let center = self.grid.center(slot);
        match self.model {
            ModeModel::Dipole1d => center,
            ModeModel::AxialPlaneWave => {
                let lattice = box_lattice(self.box_lz);
                libm::round(center / lattice).max(1.0) * lattice
            }
        }
    }

    fn draw_mode(&self, slot: u64) -> Mode {
        let omega = self.slot_frequency(slot);
        let density = spectrum::density(omega);
        let mut variance = COMPONENT_VARIANCE_FACTOR * density * self.grid.spacing;
        if self.model == ModeModel::AxialPlaneWave {
            variance *= 0.5;
        }
        let damping = self.damping.map_or(1.0, |w| libm::exp(-omega / w));
        let scale = libm::sqrt(variance) * damping;

        let mut variates = GaussianStream::new(self.rng.with_stream(slot));
        let mut next_pair = || (variates.next_gaussian(), variates.next_gaussian());
        let mut waves = Vec::with_capacity(4);
        match self.model {
            ModeModel::Dipole1d => {
                for polarization in [DVec3::X, DVec3::Y, DVec3::Z] {
                    let (a, b) = next_pair();
                    if self.planar && polarization == DVec3::Z {
                        continue;
                    }
                    waves.push(Wave { amp_cos: a, amp_sin: b, polarization, k_vec: DVec3::ZERO });
                }
            }
            ModeModel::AxialPlaneWave => {
                let k = omega / C_AU;
                for direction in [1.0, -1.0] {
                    for polarization in [DVec3::X, DVec3::Y] {
                        let (a, b) = next_pair();
                        waves.push(Wave {
                            amp_cos: a,
                            amp_sin: b,
                            polarization,
                            k_vec: DVec3::new(0.0, 0.0, direction * k),
                        });
                    }
                }
            }
        }
        Mode { slot, omega, scale, waves }
    }

    /// Same realization restricted (or extended) to `band`.
    pub fn with_band(&self, band: (f64, f64)) -> ModeSet {
        let slots = self.grid.slots_in(band.0, band.1);
        let mut existing = self.modes.iter().peekable();
        let mut modes = Vec::with_capacity((slots.end - slots.start) as usize);
        for slot in slots {
            while existing.peek().is_some_and(|m| m.slot < slot) {
                existing.next();
            }
            match existing.peek() {
                Some(m) if m.slot == slot => modes.push((*m).clone()),
                _ => modes.push(self.draw_mode(slot)),
            }
        }
        ModeSet { band, modes, ..self.clone_empty() }
    }

    fn clone_empty(&self) -> ModeSet {
        ModeSet {
            model: self.model,
            grid: self.grid,
            band: self.band,
            rng: self.rng,
            planar: self.planar,
            damping: self.damping,
            box_lz: self.box_lz,
            modes: Vec::new(),
        }
    }

    /// Sum of `scale²` over modes: the per-component variance the set realizes.
    pub fn component_variance(&self) -> f64 {
        let per_direction = match self.model {
            ModeModel::Dipole1d => 1.0,
            ModeModel::AxialPlaneWave => 2.0,
        };
        per_direction * self.modes.iter().map(|m| m.scale * m.scale).sum::<f64>()
    }
}

/// Moves the upper band edge to `clamp(multiple × orbital_freq, floor, ceiling)`.
///
/// Surviving slots are kept bitwise; newly exposed slots are drawn from
/// their own streams. Policy frequencies must be in the same units as the
/// mode set (a.u.).
pub fn apply_moving_cutoff(modes: &ModeSet, orbital_freq: f64, policy: &MovingCutoff) -> ModeSet {
    let band = (policy.floor, policy.upper_edge(orbital_freq));
    if band == modes.band {
        return modes.clone();
    }
    modes.with_band(band)
}

/// Direct summation over all modes.
pub fn eval_field(modes: &ModeSet, t: f64, r: DVec3) -> FieldSample {
    let mut e = DVec3::ZERO;
    let mut b = DVec3::ZERO;
    match modes.model {
        ModeModel::Dipole1d => {
            for mode in &modes.modes {
                let (s, c) = libm::sincos(-mode.omega * t);
                for w in &mode.waves {
                    e += (mode.scale * (w.amp_cos * c - w.amp_sin * s)) * w.polarization;
                }
            }
        }
        ModeModel::AxialPlaneWave => {
            for mode in &modes.modes {
                for w in &mode.waves {
                    let (s, c) = libm::sincos(w.k_vec.dot(r) - mode.omega * t);
                    let ew = (mode.scale * (w.amp_cos * c - w.amp_sin * s)) * w.polarization;
                    e += ew;
                    b += w.k_vec.normalize().cross(ew);
                }
            }
        }
    }
    FieldSample { e, b, t }
}
