use alloc::vec::Vec;

use glam::DVec3;

use super::{eval_field, FieldError, FieldProvider, FieldSample, ModeSet};

/// Field sampled exactly at evenly spaced knots and linearly interpolated
/// in between. The field is taken at a fixed reference point, i.e. as a
/// function of time only.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldCache {
    knots: Vec<f64>,
    e: Vec<DVec3>,
    b: Vec<DVec3>,
    /// Accepted overshoot past either end, to absorb `t + dt` rounding.
    slack: f64,
}

impl FieldCache {
    pub fn new(
        modes: &ModeSet,
        t_start: f64,
        t_end: f64,
        n_knots: usize,
        reference: DVec3,
    ) -> Result<Self, FieldError> {
        if n_knots < 2 {
            return Err(FieldError::TooFewKnots);
        }
        if !(t_end > t_start) {
            return Err(FieldError::OutsideCache { t: t_end, start: t_start, end: t_end });
        }
        let h = (t_end - t_start) / (n_knots - 1) as f64;
        let knots: Vec<f64> = (0..n_knots)
            .map(|i| if i + 1 == n_knots { t_end } else { t_start + h * i as f64 })
            .collect();
        let (e, b) = knots
            .iter()
            .map(|&t| {
                let f = eval_field(modes, t, reference);
                (f.e, f.b)
            })
            .unzip();
        let slack = 8.0 * f64::EPSILON * t_start.abs().max(t_end.abs()).max(h);
        Ok(Self { knots, e, b, slack })
    }

    pub fn t_start(&self) -> f64 {
        self.knots[0]
    }

    pub fn t_end(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn eval(&self, t: f64) -> Result<FieldSample, FieldError> {
        let (start, end) = (self.t_start(), self.t_end());
        if !(t >= start - self.slack && t <= end + self.slack) {
            return Err(FieldError::OutsideCache { t, start, end });
        }
        let t_clamped = t.clamp(start, end);
        // Index of the last knot <= t.
        let i = match self.knots.binary_search_by(|k| k.total_cmp(&t_clamped)) {
            Ok(i) => return Ok(FieldSample { e: self.e[i], b: self.b[i], t }),
            Err(i) => i - 1,
        };
        let frac = (t_clamped - self.knots[i]) / (self.knots[i + 1] - self.knots[i]);
        Ok(FieldSample {
            e: self.e[i] + (self.e[i + 1] - self.e[i]) * frac,
            b: self.b[i] + (self.b[i + 1] - self.b[i]) * frac,
            t,
        })
    }
}

impl FieldProvider for FieldCache {
    fn field_at(&self, t: f64, _r: DVec3) -> Result<FieldSample, FieldError> {
        self.eval(t)
    }
}
