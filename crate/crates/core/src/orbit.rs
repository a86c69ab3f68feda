//! Osculating Kepler elements and an exact two-body propagator.
//!
//! For a state `(r, v)` around charge `Z` (atomic units):
//!
//! - `E = v²/2 − Z/r`, `L = r × v`
//! - eccentricity vector `e = (v × L)/Z − r̂`
//! - effective momentum `a = √(−2E)` (bound only)
//! - Runge-Lenz vector in the quantum normalization `A = Z e / a`, so that
//!   `ε = |A| a / Z`, `L = a r_c cos ν`, `|A| = a r_c sin ν` and
//!   `L² + A² = a² r_c² = Z²/2|E|`
//! - semi-major axis `r_c = Z/2|E|` and `ω = √(Z/r_c³)`

use core::f64::consts::{PI, TAU};

use glam::DVec3;
use thiserror::Error;

use crate::dynamics::State;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum OrbitError {
    #[error("state is at the origin")]
    Singular,
    #[error("state is unbound (E >= 0)")]
    Unbound,
    #[error("Kepler equation did not converge")]
    NoConvergence,
    #[error("orbit does not reach this direction")]
    SingularDirection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitElements {
    pub z: f64,
    pub energy: f64,
    pub angular_momentum: DVec3,
    pub ecc_vector: DVec3,
    /// `|e|`.
    pub eccentricity: f64,
    /// Bound states only from here on.
    pub runge_lenz: Option<DVec3>,
    pub effective_momentum: Option<f64>,
    pub semi_major_axis: Option<f64>,
    /// `sin ν = ε`.
    pub nu: Option<f64>,
    pub orbital_omega: Option<f64>,
}

impl OrbitElements {
    pub fn is_bound(&self) -> bool {
        self.energy < 0.0
    }

    pub fn l(&self) -> f64 {
        self.angular_momentum.length()
    }

    /// `ε` from energy and angular momentum, `√(1 + 2EL²/Z²)`.
    pub fn eccentricity_from_energy(&self) -> f64 {
        let l = self.l();
        libm::sqrt((1.0 + 2.0 * self.energy * l * l / (self.z * self.z)).max(0.0))
    }

    pub fn period(&self) -> Option<f64> {
        self.orbital_omega.map(|w| TAU / w)
    }
}

pub fn elements_from_state(state: &State, z: f64) -> Result<OrbitElements, OrbitError> {
    let d = state.r.length();
    if !(d > 0.0) || !d.is_finite() {
        return Err(OrbitError::Singular);
    }
    let energy = 0.5 * state.v.length_squared() - z / d;
    let angular_momentum = state.r.cross(state.v);
    let ecc_vector = state.v.cross(angular_momentum) / z - state.r / d;
    let eccentricity = ecc_vector.length();
    let mut el = OrbitElements {
        z,
        energy,
        angular_momentum,
        ecc_vector,
        eccentricity,
        runge_lenz: None,
        effective_momentum: None,
        semi_major_axis: None,
        nu: None,
        orbital_omega: None,
    };
    if energy < 0.0 {
        let a = libm::sqrt(-2.0 * energy);
        let r_c = z / (2.0 * -energy);
        el.effective_momentum = Some(a);
        el.runge_lenz = Some(ecc_vector * (z / a));
        el.semi_major_axis = Some(r_c);
        el.nu = Some(libm::asin(eccentricity.min(1.0)));
        el.orbital_omega = Some(libm::sqrt(z / (r_c * r_c * r_c)));
    }
    Ok(el)
}

/// `r(φ) = (L²/Z)/(1 + ε cos φ)`, `φ` measured from perihelion.
pub fn orbit_radius(elements: &OrbitElements, phi_r: f64) -> Result<f64, OrbitError> {
    let l = elements.l();
    let denom = 1.0 + elements.eccentricity * libm::cos(phi_r);
    if !(denom > 0.0) {
        return Err(OrbitError::SingularDirection);
    }
    Ok(l * l / elements.z / denom)
}

const KEPLER_MAX_ITER: u32 = 100;

/// Solves `E − e sin E = M` for `M ∈ [−π, π]` by Newton iteration safeguarded
/// with bisection on the bracket `[M − e, M + e]`.
pub fn solve_kepler(mean_anomaly: f64, ecc: f64) -> Result<f64, OrbitError> {
    let m = mean_anomaly;
    let residual = |x: f64| x - ecc * libm::sin(x) - m;
    let (mut lo, mut hi) = (m - ecc, m + ecc);
    if residual(lo) >= 0.0 {
        return Ok(lo);
    }
    if residual(hi) <= 0.0 {
        return Ok(hi);
    }
    let mut x = (m + ecc * libm::sin(m)).clamp(lo, hi);
    for _ in 0..KEPLER_MAX_ITER {
        let f = residual(x);
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let df = 1.0 - ecc * libm::cos(x);
        let mut next = x - f / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) || hi - lo <= 1e-15 * x.abs().max(1.0) {
            return Ok(next);
        }
        x = next;
    }
    Err(OrbitError::NoConvergence)
}

/// Advances a bound state by `dt` along its Kepler ellipse.
pub fn kepler_propagate(state: &State, z: f64, dt: f64) -> Result<State, OrbitError> {
    let el = elements_from_state(state, z)?;
    let (Some(a), Some(n)) = (el.semi_major_axis, el.orbital_omega) else {
        return Err(OrbitError::Unbound);
    };
    let period = TAU / n;
    let turns = libm::floor(dt / period);
    let dt_red = dt - turns * period;

    let r0 = state.r.length();
    let sigma = state.r.dot(state.v) / libm::sqrt(z);
    let e_cos = 1.0 - r0 / a;
    let e_sin = sigma / libm::sqrt(a);
    let ecc = libm::hypot(e_cos, e_sin);
    let ecc_anomaly0 = libm::atan2(e_sin, e_cos);
    let mean0 = ecc_anomaly0 - e_sin;

    let mean = mean0 + n * dt_red;
    let wraps = libm::round(mean / TAU) * TAU;
    let mean_red = (mean - wraps).clamp(-PI, PI);
    let ecc_anomaly = solve_kepler(mean_red, ecc)?;
    let de = ecc_anomaly + wraps - ecc_anomaly0;

    let (s, c) = libm::sincos(de);
    let f = 1.0 - a / r0 * (1.0 - c);
    let g = dt_red - (de - s) / n;
    let r = f * state.r + g * state.v;
    let rn = r.length();
    let f_dot = -libm::sqrt(z * a) * s / (rn * r0);
    let g_dot = 1.0 - a / rn * (1.0 - c);
    Ok(State::new(state.t + dt, r, f_dot * state.r + g_dot * state.v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn circ() -> State {
        State::new(0.0, DVec3::X, DVec3::Y)
    }

    fn ecc075() -> State {
        State::new(0.0, DVec3::X, DVec3::new(0.0, 0.5, 0.0))
    }

    #[test]
    fn circular_elements() {
        let el = elements_from_state(&circ(), 1.0).unwrap();
        assert_eq!(el.energy, -0.5);
        assert_eq!(el.l(), 1.0);
        assert_eq!(el.eccentricity, 0.0);
        assert_eq!(el.semi_major_axis, Some(1.0));
        assert_eq!(el.orbital_omega, Some(1.0));
        assert_eq!(el.effective_momentum, Some(1.0));
    }

    #[test]
    fn eccentric_elements() {
        let el = elements_from_state(&ecc075(), 1.0).unwrap();
        assert_eq!(el.energy, -0.875);
        assert_eq!(el.l(), 0.5);
        assert!((el.eccentricity - 0.75).abs() < 1e-15);
        assert!((el.eccentricity_from_energy() - 0.75).abs() < 1e-15);
        assert!((el.ecc_vector - DVec3::new(-0.75, 0.0, 0.0)).length() < 1e-15);
        assert!((el.semi_major_axis.unwrap() - 4.0 / 7.0).abs() < 1e-15);
        let a = el.effective_momentum.unwrap();
        assert!((el.runge_lenz.unwrap().length() * a / el.z - 0.75).abs() < 1e-15);
    }

    #[test]
    fn unbound_elements_leave_shape_undefined() {
        let el = elements_from_state(&State::new(0.0, DVec3::X, DVec3::new(0.0, 2.0, 0.0)), 1.0).unwrap();
        assert!(!el.is_bound());
        assert!(el.semi_major_axis.is_none() && el.orbital_omega.is_none() && el.nu.is_none());
        assert!(el.eccentricity > 1.0);
        assert!(elements_from_state(&State::default(), 1.0).is_err());
    }

    #[test]
    fn orbit_radius_examples() {
        let c = elements_from_state(&circ(), 1.0).unwrap();
        for phi in [0.0, 1.0, 2.5] {
            assert!((orbit_radius(&c, phi).unwrap() - 1.0).abs() < 1e-15);
        }
        let e = elements_from_state(&ecc075(), 1.0).unwrap();
        assert!((orbit_radius(&e, 0.0).unwrap() - 1.0 / 7.0).abs() < 1e-15);
        assert!((orbit_radius(&e, PI).unwrap() - 1.0).abs() < 1e-14);
        let hyper = elements_from_state(&State::new(0.0, DVec3::X, DVec3::new(0.0, 2.0, 0.0)), 1.0).unwrap();
        assert_eq!(orbit_radius(&hyper, PI), Err(OrbitError::SingularDirection));
    }

    #[test]
    fn propagate_circular() {
        let full = kepler_propagate(&circ(), 1.0, TAU).unwrap();
        assert!((full.r - DVec3::X).length() < 1e-13 && (full.v - DVec3::Y).length() < 1e-13);
        let half = kepler_propagate(&circ(), 1.0, PI).unwrap();
        assert!((half.r + DVec3::X).length() < 1e-13 && (half.v + DVec3::Y).length() < 1e-13);
        assert_eq!(half.t, PI);
    }

    #[test]
    fn propagate_eccentric_period() {
        let s = ecc075();
        let rc: f64 = 4.0 / 7.0;
        let period = TAU * rc.powf(1.5);
        let back = kepler_propagate(&s, 1.0, period).unwrap();
        assert!((back.r - s.r).length() < 1e-12);
        assert!((back.v - s.v).length() < 1e-12);
        // Half a period from aphelion is perihelion at r_c(1−ε) = 1/7.
        let peri = kepler_propagate(&s, 1.0, 0.5 * period).unwrap();
        assert!((peri.r - DVec3::new(-1.0 / 7.0, 0.0, 0.0)).length() < 1e-12);
    }

    #[test]
    fn propagate_unbound_rejected() {
        let s = State::new(0.0, DVec3::X, DVec3::new(0.0, 2.0, 0.0));
        assert_eq!(kepler_propagate(&s, 1.0, 1.0), Err(OrbitError::Unbound));
    }

    #[test]
    fn kepler_solver_extremes() {
        for ecc in [0.0, 0.3, 0.9, 0.999] {
            for i in 0..=40 {
                let m = -PI + TAU * i as f64 / 40.0;
                let e = solve_kepler(m, ecc).unwrap();
                assert!((e - ecc * libm::sin(e) - m).abs() < 1e-14, "e={ecc} m={m}");
            }
        }
    }

    #[test]
    fn elements_survive_a_million_accumulated_periods() {
        let s0 = State::new(0.0, DVec3::new(0.8, 0.1, 0.0), DVec3::new(-0.2, 0.9, 0.1));
        let el0 = elements_from_state(&s0, 1.0).unwrap();
        let period = el0.period().unwrap();
        let mut s = s0;
        for _ in 0..1000 {
            s = kepler_propagate(&s, 1.0, 1000.0 * period + 0.37).unwrap();
        }
        let el = elements_from_state(&s, 1.0).unwrap();
        assert!((el.energy / el0.energy - 1.0).abs() < 1e-12);
        assert!((el.angular_momentum - el0.angular_momentum).length() < 1e-12);
        assert!((el.ecc_vector - el0.ecc_vector).length() < 1e-12);
    }

    fn bound_state() -> impl Strategy<Value = State> {
        (0.1f64..5.0, 0.0f64..TAU, 0.05f64..0.99, 0.0f64..TAU).prop_filter_map(
            "bound",
            |(r, theta, speed_frac, dir)| {
                let pos = DVec3::new(r * libm::cos(theta), r * libm::sin(theta), 0.3 * libm::sin(dir) * r);
                let escape = libm::sqrt(2.0 / pos.length());
                let v = speed_frac * escape * DVec3::new(libm::cos(dir), libm::sin(dir), 0.2).normalize();
                let s = State::new(0.0, pos, v);
                (0.5 * v.length_squared() - 1.0 / pos.length() < -1e-3).then_some(s)
            },
        )
    }

    proptest! {
        #[test]
        fn element_identities(s in bound_state()) {
            let el = elements_from_state(&s, 1.0).unwrap();
            let a = el.effective_momentum.unwrap();
            let rc = el.semi_major_axis.unwrap();
            let nu = el.nu.unwrap();
            let rl = el.runge_lenz.unwrap();
            let l = el.l();
            let scale = (l * rl.length()).max(1e-300);
            prop_assert!(el.angular_momentum.dot(rl).abs() <= 1e-10 * scale.max(l * l));
            prop_assert!((el.eccentricity - el.eccentricity_from_energy()).abs() < 1e-10);
            let mean_turning = 0.5 * (orbit_radius(&el, 0.0).unwrap() + orbit_radius(&el, PI).unwrap());
            prop_assert!((mean_turning - rc).abs() < 1e-12 * rc.max(1.0) * (1.0 / (1.0 - el.eccentricity * el.eccentricity)).max(1.0));
            prop_assert!((l - a * rc * libm::cos(nu)).abs() < 1e-10 * a * rc);
            prop_assert!((rl.length() - a * rc * libm::sin(nu)).abs() < 1e-10 * a * rc);
            prop_assert!(((l * l + rl.length_squared()) / (a * a * rc * rc) - 1.0).abs() < 1e-10);
            prop_assert!((a * a * rc * rc * 2.0 * el.energy.abs() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn propagation_conserves_elements(s in bound_state(), dt in 0.0f64..50.0) {
            let before = elements_from_state(&s, 1.0).unwrap();
            let after = elements_from_state(&kepler_propagate(&s, 1.0, dt).unwrap(), 1.0).unwrap();
            prop_assert!((after.energy / before.energy - 1.0).abs() < 1e-11);
            prop_assert!((after.angular_momentum - before.angular_momentum).length() < 1e-11 * before.l().max(1.0));
            prop_assert!((after.ecc_vector - before.ecc_vector).length() < 1e-10);
        }
    }
}
