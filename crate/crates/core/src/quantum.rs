//! Quantum-mechanical reference values for hydrogen-like charge `Z`.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum QuantumError {
    #[error("negative radius {0}")]
    NegativeRadius(f64),
    #[error("principal quantum number must be >= 1")]
    InvalidLevel,
}

/// 1s radial probability density `P(r) = 4Z³r²e^{−2Zr}`.
pub fn ground_state_radial_density(r: f64, z: f64) -> Result<f64, QuantumError> {
    if !(r >= 0.0) {
        return Err(QuantumError::NegativeRadius(r));
    }
    Ok(4.0 * z * z * z * r * r * libm::exp(-2.0 * z * r))
}

/// CDF of the 1s radial density, `1 − e^{−2Zr}(1 + 2Zr + 2Z²r²)`.
pub fn radial_cdf(r: f64, z: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let x = 2.0 * z * r;
    if x < 1.0 {
        // e^{−x} Σ_{k≥3} x^k/k!, which avoids the cancellation in 1 − (...).
        let mut term = x * x * x / 6.0;
        let mut sum = 0.0;
        let mut k = 3.0;
        while term > 1e-17 * sum {
            sum += term;
            k += 1.0;
            term *= x / k;
        }
        return libm::exp(-x) * sum;
    }
    1.0 - libm::exp(-x) * (1.0 + x + 0.5 * x * x)
}

/// `E_n = −Z²/2n²` Hartree.
pub fn energy_level(n: u32, z: f64) -> Result<f64, QuantumError> {
    if n < 1 {
        return Err(QuantumError::InvalidLevel);
    }
    let n = f64::from(n);
    Ok(-z * z / (2.0 * n * n))
}

pub fn degeneracy(n: u32) -> Result<u64, QuantumError> {
    if n < 1 {
        return Err(QuantumError::InvalidLevel);
    }
    Ok(u64::from(n) * u64::from(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;
    use crate::units::{scaled_report, Dimension};

    #[test]
    fn density_basics() {
        assert_eq!(ground_state_radial_density(0.0, 1.0).unwrap(), 0.0);
        assert!(ground_state_radial_density(-0.1, 1.0).is_err());
        for z in [1.0, 3.0] {
            let total = integrate(|r| ground_state_radial_density(r, z).unwrap(), 0.0, 40.0 / z, 1e-14, 0.0);
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn density_peaks_at_one_over_z() {
        for z in [1.0, 2.0, 3.0] {
            // Golden-section search for the maximum.
            let (mut a, mut b) = (0.0, 5.0);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..200 {
                let c = b - g * (b - a);
                let d = a + g * (b - a);
                if ground_state_radial_density(c, z).unwrap() > ground_state_radial_density(d, z).unwrap() {
                    b = d;
                } else {
                    a = c;
                }
            }
            assert!((0.5 * (a + b) - 1.0 / z).abs() < 1e-7);
        }
    }

    #[test]
    fn levels_and_degeneracy() {
        assert_eq!(energy_level(1, 1.0).unwrap(), -0.5);
        assert_eq!(energy_level(2, 1.0).unwrap(), -0.125);
        assert_eq!(energy_level(1, 3.0).unwrap(), -4.5);
        for z in [1u32, 3] {
            let e = energy_level(1, f64::from(z)).unwrap();
            assert_eq!(scaled_report(e, z, Dimension::Energy), -0.5);
        }
        assert_eq!(degeneracy(2).unwrap(), 4);
        assert!(energy_level(0, 1.0).is_err() && degeneracy(0).is_err());
    }

    #[test]
    fn cdf_limits_and_derivative() {
        assert_eq!(radial_cdf(0.0, 1.0), 0.0);
        assert!((radial_cdf(60.0, 1.0) - 1.0).abs() < 1e-15);
        for z in [1.0, 3.0] {
            let mut prev = 0.0;
            for i in 1..400 {
                let r = i as f64 * 0.02 / z;
                let h = 1e-5 / z;
                let fd = (radial_cdf(r + h, z) - radial_cdf(r - h, z)) / (2.0 * h);
                let p = ground_state_radial_density(r, z).unwrap();
                assert!((fd - p).abs() < 1e-8 * z, "r={r}");
                let c = radial_cdf(r, z);
                assert!(c >= prev);
                prev = c;
            }
        }
        // Series and closed form agree near the switch point.
        let closed = |x: f64| 1.0 - libm::exp(-x) * (1.0 + x + 0.5 * x * x);
        assert!((radial_cdf(0.4999999, 1.0) - closed(0.9999998)).abs() < 1e-15);
        assert!((radial_cdf(0.25, 1.0) - closed(0.5)).abs() < 1e-15);
    }
}
