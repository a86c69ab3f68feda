//! Empirical field statistics for checking synthesized realizations
//! against the spectral oracles.

use alloc::vec;
use alloc::vec::Vec;

use glam::DVec3;

use super::{eval_field, sample_modes, FieldError, FieldSpec, ModeModel, ModeSet};

/// Re-anchor the rotation recurrence with exact trig this often.
const REANCHOR: usize = 128;

/// `E(t0 + i·dt, r)` for `i in 0..n`, using a phase-rotation recurrence.
pub fn eval_series(modes: &ModeSet, t0: f64, dt: f64, n: usize, r: DVec3) -> Vec<DVec3> {
    let mut out = vec![DVec3::ZERO; n];
    for mode in &modes.modes {
        for w in &mode.waves {
            let k_dot_r = if modes.model == ModeModel::Dipole1d { 0.0 } else { w.k_vec.dot(r) };
            let (sd, cd) = libm::sincos(-mode.omega * dt);
            let mut s = 0.0;
            let mut c = 1.0;
            for (i, slot) in out.iter_mut().enumerate() {
                if i % REANCHOR == 0 {
                    (s, c) = libm::sincos(k_dot_r - mode.omega * (t0 + dt * i as f64));
                } else {
                    (s, c) = (s * cd + c * sd, c * cd - s * sd);
                }
                *slot += (mode.scale * (w.amp_cos * c - w.amp_sin * s)) * w.polarization;
            }
        }
    }
    out
}

/// Per-component time averages `⟨E_i(t)E_i(t + m·dt)⟩` for `m in 0..=max_lag`.
pub fn lagged_products(series: &[DVec3], max_lag: usize) -> Vec<DVec3> {
    (0..=max_lag)
        .map(|m| {
            let pairs = series.len().saturating_sub(m);
            if pairs == 0 {
                return DVec3::ZERO;
            }
            let sum: DVec3 = series.iter().zip(&series[m..]).map(|(a, b)| *a * *b).sum();
            sum / pairs as f64
        })
        .collect()
}

/// Sampling plan for one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPlan {
    pub t0: f64,
    pub dt: f64,
    pub n_samples: usize,
    pub max_lag: usize,
}

/// Statistics of one realization: per-component mean, mean square and lagged products.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationStats {
    pub mean: DVec3,
    pub mean_square: DVec3,
    pub lagged: Vec<DVec3>,
}

pub fn realization_stats(modes: &ModeSet, plan: &SeriesPlan) -> RealizationStats {
    let series = eval_series(modes, plan.t0, plan.dt, plan.n_samples, DVec3::ZERO);
    let n = series.len().max(1) as f64;
    let mean = series.iter().copied().sum::<DVec3>() / n;
    let lagged = lagged_products(&series, plan.max_lag);
    RealizationStats { mean, mean_square: lagged[0], lagged }
}

/// Draws the realization for `seed` and measures it.
pub fn seeded_realization(
    spec: &FieldSpec,
    band: (f64, f64),
    seed: u64,
    plan: &SeriesPlan,
) -> Result<RealizationStats, FieldError> {
    let modes = sample_modes(&FieldSpec { seed, ..*spec }, band)?;
    Ok(realization_stats(&modes, plan))
}

/// Averages realization statistics in slice order.
pub fn average(stats: &[RealizationStats]) -> Option<RealizationStats> {
    let first = stats.first()?;
    let n = stats.len() as f64;
    let mut acc = RealizationStats {
        mean: DVec3::ZERO,
        mean_square: DVec3::ZERO,
        lagged: vec![DVec3::ZERO; first.lagged.len()],
    };
    for s in stats {
        acc.mean += s.mean;
        acc.mean_square += s.mean_square;
        for (a, b) in acc.lagged.iter_mut().zip(&s.lagged) {
            *a += *b;
        }
    }
    acc.mean /= n;
    acc.mean_square /= n;
    for a in &mut acc.lagged {
        *a /= n;
    }
    Some(acc)
}

/// Ensemble value of `E_x` at a fixed time across seeds.
pub fn fixed_time_samples(spec: &FieldSpec, band: (f64, f64), seeds: core::ops::Range<u64>, t: f64) -> Result<Vec<DVec3>, FieldError> {
    seeds
        .map(|seed| sample_modes(&FieldSpec { seed, ..*spec }, band).map(|m| eval_field(&m, t, DVec3::ZERO).e))
        .collect()
}
