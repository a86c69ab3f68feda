//! Atomic units and the Z-scaled "Bohr units" used for reporting.
//!
//! Internally every quantity is in atomic units. Results are reported in
//! units where the quantum ground state of charge `Z` has `E = -0.5`,
//! `r = 1` and an orbital period of `2π`, i.e. energies divided by `Z²`,
//! lengths multiplied by `Z` and times expressed in `t₀ = 1/Z²` a.u.

use core::fmt;
use core::str::FromStr;

use thiserror::Error;

/// Fine-structure constant (CODATA 2018).
pub const ALPHA: f64 = 7.297_352_569_3e-3;

/// Speed of light in atomic units.
pub const C_AU: f64 = 1.0 / ALPHA;

/// Fixed physical constants. `ħ`, `m` and `e` are 1 by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub alpha: f64,
    pub c_au: f64,
    /// Seconds per atomic unit of time, `ħ/(α²mc²)`.
    pub au_time_si: f64,
    /// Meters per Bohr radius.
    pub au_length_si: f64,
    /// Joules per Hartree.
    pub au_energy_si: f64,
}

impl Constants {
    pub const CODATA_2018: Constants = Constants {
        alpha: ALPHA,
        c_au: C_AU,
        au_time_si: 2.418_884_326_585_7e-17,
        au_length_si: 5.291_772_109_03e-11,
        au_energy_si: 4.359_744_722_207_1e-18,
    };

    fn factor(&self, dimension: Dimension) -> f64 {
        match dimension {
            Dimension::Length => self.au_length_si,
            Dimension::Time => self.au_time_si,
            Dimension::Energy => self.au_energy_si,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    Length,
    Time,
    Energy,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown dimension `{0}` (expected length, time or energy)")]
pub struct UnknownDimension(pub alloc::string::String);

impl FromStr for Dimension {
    type Err = UnknownDimension;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "length" => Ok(Dimension::Length),
            "time" => Ok(Dimension::Time),
            "energy" => Ok(Dimension::Energy),
            other => Err(UnknownDimension(other.into())),
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Energy => "energy",
        })
    }
}

/// Converts an atomic-unit value to SI.
pub fn to_si(value: f64, dimension: Dimension) -> f64 {
    value * Constants::CODATA_2018.factor(dimension)
}

pub fn from_si(value: f64, dimension: Dimension) -> f64 {
    value / Constants::CODATA_2018.factor(dimension)
}

/// Converts an atomic-unit value to Z-scaled Bohr units.
pub fn scaled_report(value: f64, z: u32, dimension: Dimension) -> f64 {
    let z = f64::from(z);
    match dimension {
        Dimension::Energy => value / (z * z),
        Dimension::Length => value * z,
        Dimension::Time => value * z * z,
    }
}

/// Inverse of [`scaled_report`].
pub fn from_scaled(value: f64, z: u32, dimension: Dimension) -> f64 {
    let z = f64::from(z);
    match dimension {
        Dimension::Energy => value * z * z,
        Dimension::Length => value / z,
        Dimension::Time => value / (z * z),
    }
}

/// The Bohr time `t₀ = 1/Z²` in atomic units.
pub fn bohr_time(z: u32) -> f64 {
    from_scaled(1.0, z, Dimension::Time)
}

#[cfg(test)]
mod tests {
    use super::*;

    // CODATA 2018 exact/recommended SI values, independent of the table above.
    const HBAR: f64 = 1.054_571_817e-34;
    const M_E: f64 = 9.109_383_701_5e-31;
    const C: f64 = 299_792_458.0;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn alpha_and_c_are_reciprocal() {
        let c = Constants::CODATA_2018;
        assert!((c.c_au * c.alpha - 1.0).abs() <= f64::EPSILON);
        assert!(c.au_time_si > 0.0 && c.au_length_si > 0.0);
    }

    #[test]
    fn atomic_time_and_length_from_codata() {
        let t = HBAR / (ALPHA * ALPHA * M_E * C * C);
        assert!(rel(to_si(1.0, Dimension::Time), t) < 1e-9);
        assert!(rel(to_si(1.0, Dimension::Time), 2.4189e-17) < 1e-4);

        let a0 = HBAR / (ALPHA * M_E * C);
        assert!(rel(to_si(1.0, Dimension::Length), a0) < 1e-9);
        assert!(rel(to_si(1.0, Dimension::Length), 5.29177e-11) < 1e-5);
        // 0.53 Å start radius is one Bohr radius to 0.2%.
        assert!(rel(from_si(0.53e-10, Dimension::Length), 1.0) < 2e-3);

        let hartree = M_E * C * C * ALPHA * ALPHA;
        assert!(rel(to_si(1.0, Dimension::Energy), hartree) < 1e-9);
        assert_eq!(to_si(0.0, Dimension::Energy), 0.0);
    }

    #[test]
    fn si_round_trip() {
        for d in [Dimension::Length, Dimension::Time, Dimension::Energy] {
            for v in [1e-3, 0.5, 1.0, 137.0, 1e7] {
                assert!(rel(from_si(to_si(v, d), d), v) < 1e-14);
            }
        }
    }

    #[test]
    fn unknown_dimension_rejected() {
        assert!("mass".parse::<Dimension>().is_err());
        assert_eq!("time".parse::<Dimension>().unwrap(), Dimension::Time);
    }

    #[test]
    fn ground_state_reports_identically_for_every_z() {
        assert_eq!(scaled_report(-4.5, 3, Dimension::Energy), -0.5);
        assert_eq!(scaled_report(-0.5, 1, Dimension::Energy), -0.5);
        assert!((scaled_report(1.0 / 3.0, 3, Dimension::Length) - 1.0).abs() < 1e-15);
        assert_eq!(scaled_report(bohr_time(3), 3, Dimension::Time), 1.0);
    }

    #[test]
    fn scaled_report_is_linear() {
        for d in [Dimension::Length, Dimension::Time, Dimension::Energy] {
            let a = scaled_report(2.0, 3, d);
            let b = scaled_report(5.0, 3, d);
            let ab = scaled_report(2.0 * 3.0 + 5.0, 3, d);
            assert!((ab - (3.0 * a + b)).abs() < 1e-12 * ab.abs());
            assert!(rel(from_scaled(scaled_report(0.7, 3, d), 3, d), 0.7) < 1e-15);
        }
    }
}
