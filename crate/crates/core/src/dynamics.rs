//! Forces of the order-reduced Abraham-Lorentz equation and the RK4
//! integrators.
//!
//! In atomic units the equation of motion is
//!
//! ```text
//! d²r/dt² = −Z r/r³ + (2α³/3) d/dt(−Z r/r³) − (E + v × B)
//! ```
//!
//! where the third derivative of the radiation-reaction term has been
//! replaced by the time derivative of the Coulomb acceleration evaluated
//! along the current velocity.

use glam::DVec3;
use thiserror::Error;

use crate::config::ForceFlags;
use crate::field::{FieldError, FieldProvider, FieldSample};
use crate::units::ALPHA;

/// Electron phase-space point in atomic units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    pub t: f64,
    pub r: DVec3,
    pub v: DVec3,
}

impl State {
    pub fn new(t: f64, r: DVec3, v: DVec3) -> Self {
        Self { t, r, v }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForceBreakdown {
    pub coulomb: DVec3,
    pub rad_reaction: DVec3,
    pub lorentz: DVec3,
    pub total: DVec3,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("electron reached the singularity radius at t = {}", state.t)]
    Singularity { state: State },
    #[error("adaptive step fell below dt_min ({dt:e}) at t = {}", state.t)]
    Stiffness { state: State, dt: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Radiation-reaction time `τ = 2e²/3mc³` in atomic units.
pub const RADIATION_TIME: f64 = 2.0 * ALPHA * ALPHA * ALPHA / 3.0;

fn check_radius(r: DVec3, singularity_radius: f64) -> Result<f64, f64> {
    let d = r.length();
    if d > singularity_radius {
        Ok(d)
    } else {
        Err(d)
    }
}

/// `−Z r/|r|³`.
pub fn coulomb_force(r: DVec3, z: f64) -> DVec3 {
    let d = r.length();
    -z * r / (d * d * d)
}

/// `−(2Zα³/3)·[v/r³ − 3(r·v) r/r⁵]`.
pub fn rr_force_approx(state: &State, z: f64) -> DVec3 {
    let d = state.r.length();
    let d2 = d * d;
    let d3 = d2 * d;
    let rv = state.r.dot(state.v);
    -RADIATION_TIME * z * (state.v / d3 - 3.0 * rv * state.r / (d3 * d2))
}

/// `−(E + v × B)`; the magnetic term only when `include_magnetic`.
pub fn lorentz_force(state: &State, field: &FieldSample, include_magnetic: bool) -> DVec3 {
    if include_magnetic {
        -(field.e + state.v.cross(field.b))
    } else {
        -field.e
    }
}

/// The right-hand side as configured: charge, enabled terms and the
/// radius below which the state counts as collapsed onto the nucleus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceModel {
    pub z: f64,
    pub flags: ForceFlags,
    pub singularity_radius: f64,
}

impl ForceModel {
    pub fn new(z: u32, flags: ForceFlags, singularity_radius: f64) -> Self {
        Self { z: f64::from(z), flags, singularity_radius }
    }

    pub fn total_accel<F: FieldProvider + ?Sized>(
        &self,
        state: &State,
        field: &F,
    ) -> Result<ForceBreakdown, DynamicsError> {
        let mut out = ForceBreakdown::default();
        if self.flags.coulomb || self.flags.radiation_reaction {
            check_radius(state.r, self.singularity_radius)
                .map_err(|_| DynamicsError::Singularity { state: *state })?;
        }
        if self.flags.coulomb {
            out.coulomb = coulomb_force(state.r, self.z);
        }
        if self.flags.radiation_reaction {
            out.rad_reaction = rr_force_approx(state, self.z);
        }
        if self.flags.field_electric || self.flags.field_magnetic {
            let mut sample = field.field_at(state.t, state.r)?;
            if !self.flags.field_electric {
                sample.e = DVec3::ZERO;
            }
            out.lorentz = lorentz_force(state, &sample, self.flags.field_magnetic);
        }
        out.total = out.coulomb + out.rad_reaction + out.lorentz;
        Ok(out)
    }

    /// Mechanical energy `v²/2 − Z/r`.
    pub fn energy(&self, state: &State) -> f64 {
        0.5 * state.v.length_squared() - self.z / state.r.length()
    }
}

/// Classical fourth-order Runge-Kutta on `(r, v)`.
pub fn rk4_step<A, E>(state: &State, dt: f64, mut accel: A) -> Result<State, E>
where
    A: FnMut(&State) -> Result<DVec3, E>,
{
    let half = 0.5 * dt;
    let s0 = *state;
    let a1 = accel(&s0)?;
    let s1 = State::new(s0.t + half, s0.r + half * s0.v, s0.v + half * a1);
    let a2 = accel(&s1)?;
    let s2 = State::new(s0.t + half, s0.r + half * s1.v, s0.v + half * a2);
    let a3 = accel(&s2)?;
    let s3 = State::new(s0.t + dt, s0.r + dt * s2.v, s0.v + dt * a3);
    let a4 = accel(&s3)?;
    let sixth = dt / 6.0;
    Ok(State::new(
        s0.t + dt,
        s0.r + sixth * (s0.v + 2.0 * s1.v + 2.0 * s2.v + s3.v),
        s0.v + sixth * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
    ))
}

/// Controller constants for [`adaptive_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub tol: f64,
    pub dt_min: f64,
    /// Upper limit for the step, e.g. the end of a field-cache window.
    pub dt_max: f64,
}

const SAFETY: f64 = 0.9;
const SHRINK_LIMIT: f64 = 0.2;
const GROWTH_LIMIT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveStep {
    pub state: State,
    pub dt_used: f64,
    pub dt_next: f64,
    /// Trial steps rejected before this one was accepted.
    pub rejected: u32,
    pub error: f64,
}

/// Step-doubling RK4: compares one full step with two half steps and
/// accepts when the difference `|Δr| + |Δv|` is at most `tol·(1 + |r|)`. The accepted
/// state is the Richardson-extrapolated two-half-step result.
pub fn adaptive_step<A>(
    state: &State,
    dt_try: f64,
    control: &StepControl,
    mut accel: A,
) -> Result<AdaptiveStep, DynamicsError>
where
    A: FnMut(&State) -> Result<DVec3, DynamicsError>,
{
    let mut dt = dt_try.min(control.dt_max);
    let mut rejected = 0;
    loop {
        if dt < control.dt_min {
            return Err(DynamicsError::Stiffness { state: *state, dt });
        }
        let full = rk4_step(state, dt, &mut accel)?;
        let mid = rk4_step(state, 0.5 * dt, &mut accel)?;
        let mut two = rk4_step(&mid, 0.5 * dt, &mut accel)?;
        two.t = state.t + dt;
        let dr = two.r - full.r;
        let dv = two.v - full.v;
        let error = dr.length() + dv.length();
        let allowed = control.tol * (1.0 + two.r.length());
        let ratio = if error > 0.0 { allowed / error } else { f64::INFINITY };
        let factor = SAFETY * libm::pow(ratio, 0.2);
        if error <= allowed {
            let accepted = State::new(two.t, two.r + dr / 15.0, two.v + dv / 15.0);
            let dt_next = dt * factor.clamp(SHRINK_LIMIT, GROWTH_LIMIT);
            return Ok(AdaptiveStep { state: accepted, dt_used: dt, dt_next, rejected, error });
        }
        rejected += 1;
        dt *= factor.clamp(SHRINK_LIMIT, 1.0);
    }
}
