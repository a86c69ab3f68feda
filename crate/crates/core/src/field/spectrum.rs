//! The zero-point spectral density and its band integrals.

use core::f64::consts::PI;

use crate::quad;
use crate::units::ALPHA;

use super::FieldError;

/// Per-component field variance per unit spectral energy density: `⟨E_i²⟩ = (4π/3)∫ρ dω`.
pub const COMPONENT_VARIANCE_FACTOR: f64 = 4.0 * PI / 3.0;

/// `ρ(ω) = ħω³/2π²c³` in atomic units.
pub fn spectral_density(omega: f64) -> Result<f64, FieldError> {
    if !(omega >= 0.0) {
        return Err(FieldError::NegativeFrequency(omega));
    }
    Ok(density(omega))
}

#[inline]
pub(crate) fn density(omega: f64) -> f64 {
    omega * omega * omega * ALPHA * ALPHA * ALPHA / (2.0 * PI * PI)
}

/// `∫ρ dω` over `[omega_lo, omega_hi]` in closed form.
pub fn analytic_band_energy(omega_lo: f64, omega_hi: f64) -> Result<f64, FieldError> {
    check_band(omega_lo, omega_hi)?;
    let quartic = |w: f64| {
        let w2 = w * w;
        w2 * w2
    };
    Ok(ALPHA * ALPHA * ALPHA * (quartic(omega_hi) - quartic(omega_lo)) / (8.0 * PI * PI))
}

/// Expected per-component autocorrelation `(4π/3)∫ρ(ω)cos(ωτ)dω` by adaptive quadrature.
pub fn autocorrelation_oracle(band: (f64, f64), tau: f64) -> Result<f64, FieldError> {
    let (lo, hi) = band;
    check_band(lo, hi)?;
    let scale = COMPONENT_VARIANCE_FACTOR * analytic_band_energy(lo, hi)?;
    let integral = quad::integrate(
        |w| density(w) * libm::cos(w * tau),
        lo,
        hi,
        1e-9,
        1e-12 * scale / COMPONENT_VARIANCE_FACTOR,
    );
    Ok(COMPONENT_VARIANCE_FACTOR * integral)
}

pub(crate) fn check_band(lo: f64, hi: f64) -> Result<(), FieldError> {
    if !(lo >= 0.0) {
        return Err(FieldError::NegativeFrequency(lo));
    }
    if !(hi >= lo) || !hi.is_finite() {
        return Err(FieldError::InvertedBand { lo, hi });
    }
    Ok(())
}
