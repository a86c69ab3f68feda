//! Traces, time-weighted histograms, event detectors and the KS distance.
//!
//! All quantities here are in Z-scaled Bohr units (`t` in `t₀`, `r` in
//! `a₀/Z`, `E` in `Z²` Hartree, `L` in `ħ`). Every sample carries the time
//! it represents, so histograms are time averages even when the
//! integrator's steps are uneven.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::dynamics::State;
use crate::orbit::OrbitElements;
use crate::units::{scaled_report, Dimension};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("sample weight must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("time went backwards: {t} after {prev}")]
    NonMonotoneTime { prev: f64, t: f64 },
    #[error("no traces to pool")]
    EmptyInput,
    #[error("histogram has zero total weight")]
    ZeroWeight,
    #[error("histograms have different bin edges")]
    EdgeMismatch,
    #[error("bin edges must be strictly ascending and at least two")]
    InvalidEdges,
}

/// One recorded sample; `dt_weight` is the time it stands for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub r: f64,
    pub energy: f64,
    pub l: f64,
    pub eccentricity: f64,
    pub dt_weight: f64,
}

impl TraceRow {
    /// Scaled row for an atomic-unit state held for `dt` (a.u.).
    pub fn from_state(state: &State, elements: &OrbitElements, dt: f64, z: u32) -> Self {
        TraceRow {
            t: scaled_report(state.t, z, Dimension::Time),
            r: scaled_report(state.r.length(), z, Dimension::Length),
            energy: scaled_report(elements.energy, z, Dimension::Energy),
            l: elements.l(),
            eccentricity: elements.eccentricity,
            dt_weight: scaled_report(dt, z, Dimension::Time),
        }
    }
}

/// Time-ordered rows, optionally decimated: with stride `k` one row is
/// kept per `k` samples and carries their summed weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub stride: u32,
    /// Samples folded into the last row so far.
    pub open: u32,
    pub last_t: Option<f64>,
}

impl Default for Trace {
    fn default() -> Self {
        Self::new(1)
    }
}

impl Trace {
    pub fn new(stride: u32) -> Self {
        Self { rows: Vec::new(), stride: stride.max(1), open: 0, last_t: None }
    }

    pub fn from_rows(rows: Vec<TraceRow>) -> Result<Self, DiagnosticsError> {
        let mut trace = Trace::new(1);
        for row in rows {
            trace.record(row)?;
        }
        Ok(trace)
    }

    pub fn record(&mut self, row: TraceRow) -> Result<(), DiagnosticsError> {
        if !(row.dt_weight > 0.0) {
            return Err(DiagnosticsError::NonPositiveWeight(row.dt_weight));
        }
        if let Some(prev) = self.last_t {
            if !(row.t > prev) {
                return Err(DiagnosticsError::NonMonotoneTime { prev, t: row.t });
            }
        }
        self.last_t = Some(row.t);
        match self.rows.last_mut() {
            Some(last) if self.open < self.stride => {
                last.dt_weight += row.dt_weight;
                self.open += 1;
            }
            _ => {
                self.rows.push(row);
                self.open = 1;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.rows.iter().map(|r| r.dt_weight).sum()
    }
}

/// Histogram of accumulated time weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedHistogram {
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
    pub underflow: f64,
    pub overflow: f64,
}

impl WeightedHistogram {
    pub fn new(edges: Vec<f64>) -> Result<Self, DiagnosticsError> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(DiagnosticsError::InvalidEdges);
        }
        let bins = edges.len() - 1;
        Ok(Self { edges, mass: vec![0.0; bins], underflow: 0.0, overflow: 0.0 })
    }

    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self, DiagnosticsError> {
        if bins == 0 {
            return Err(DiagnosticsError::InvalidEdges);
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
        Self::new(edges)
    }

    pub fn bins(&self) -> usize {
        self.mass.len()
    }

    /// Bin containing `x` (lower edge inclusive), if any.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let last = *self.edges.last()?;
        if !(x >= self.edges[0]) || x > last {
            return None;
        }
        let i = self.edges.partition_point(|&e| e <= x);
        Some((i - 1).min(self.bins() - 1))
    }

    pub fn add(&mut self, x: f64, weight: f64) {
        match self.bin_of(x) {
            Some(i) => self.mass[i] += weight,
            None if x < self.edges[0] => self.underflow += weight,
            None => self.overflow += weight,
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.underflow + self.mass.iter().sum::<f64>() + self.overflow
    }

    pub fn merge(&mut self, other: &WeightedHistogram) -> Result<(), DiagnosticsError> {
        if self.edges != other.edges {
            return Err(DiagnosticsError::EdgeMismatch);
        }
        for (a, b) in self.mass.iter_mut().zip(&other.mass) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        Ok(())
    }

    pub fn clear(&mut self) {
        self.mass.iter_mut().for_each(|m| *m = 0.0);
        self.underflow = 0.0;
        self.overflow = 0.0;
    }

    /// Probability density per bin, normalized by the total weight
    /// (including out-of-range mass).
    pub fn density(&self) -> Vec<f64> {
        let total = self.total_weight();
        self.mass
            .iter()
            .zip(self.edges.windows(2))
            .map(|(m, e)| if total > 0.0 { m / (total * (e[1] - e[0])) } else { 0.0 })
            .collect()
    }

    /// Empirical CDF at each edge.
    pub fn cdf_at_edges(&self) -> Vec<f64> {
        let total = self.total_weight();
        let mut acc = self.underflow;
        let mut out = Vec::with_capacity(self.edges.len());
        out.push(acc / total);
        for m in &self.mass {
            acc += m;
            out.push(acc / total);
        }
        out
    }

    /// Empirical CDF, linear within bins.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let cdf = self.cdf_at_edges();
        if x <= self.edges[0] {
            return if x < self.edges[0] { 0.0 } else { cdf[0] };
        }
        match self.bin_of(x) {
            Some(i) => {
                let frac = (x - self.edges[i]) / (self.edges[i + 1] - self.edges[i]);
                cdf[i] + (cdf[i + 1] - cdf[i]) * frac
            }
            None => 1.0,
        }
    }
}

/// Pools a per-row quantity across traces into one time-weighted histogram.
pub fn pooled_histogram<F>(traces: &[&Trace], edges: &[f64], column: F) -> Result<WeightedHistogram, DiagnosticsError>
where
    F: Fn(&TraceRow) -> f64,
{
    if traces.is_empty() {
        return Err(DiagnosticsError::EmptyInput);
    }
    let mut hist = WeightedHistogram::new(edges.to_vec())?;
    for trace in traces {
        for row in &trace.rows {
            hist.add(column(row), row.dt_weight);
        }
    }
    Ok(hist)
}

pub fn radial_histogram(traces: &[&Trace], edges: &[f64]) -> Result<WeightedHistogram, DiagnosticsError> {
    pooled_histogram(traces, edges, |row| row.r)
}

/// Supremum distance between the histogram's CDF and `reference_cdf`,
/// both evaluated at the bin edges.
pub fn ks_distance<F: Fn(f64) -> f64>(hist: &WeightedHistogram, reference_cdf: F) -> Result<f64, DiagnosticsError> {
    if !(hist.total_weight() > 0.0) {
        return Err(DiagnosticsError::ZeroWeight);
    }
    Ok(hist
        .edges
        .iter()
        .zip(hist.cdf_at_edges())
        .map(|(&x, emp)| (emp - reference_cdf(x)).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictKind {
    Collapse,
    Ionization,
    CriticalL,
    None,
}

impl VerdictKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            VerdictKind::Collapse => "collapse",
            VerdictKind::Ionization => "ionization",
            VerdictKind::CriticalL => "critical_L",
            VerdictKind::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorVerdict {
    pub kind: VerdictKind,
    /// Present iff `kind != None`.
    pub t_event: Option<f64>,
    /// Thresholds used and any measured summary values.
    pub details: Vec<(&'static str, f64)>,
}

impl DetectorVerdict {
    fn new(kind: VerdictKind, t_event: Option<f64>, details: Vec<(&'static str, f64)>) -> Self {
        let kind = if t_event.is_some() { kind } else { VerdictKind::None };
        Self { kind, t_event, details }
    }

    pub fn fired(&self) -> bool {
        self.kind != VerdictKind::None
    }

    pub fn detail(&self, key: &str) -> Option<f64> {
        self.details.iter().find(|(k, _)| *k == key).map(|&(_, v)| v)
    }
}

/// What one observation did to the ionization detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IonizationStep {
    /// Below threshold, no candidate.
    Idle,
    /// Above threshold; a candidate run that began at `start` is open.
    Candidate { start: f64 },
    /// Fell back below threshold, cancelling the candidate.
    Cleared,
    /// The candidate lasted the full dwell.
    Fired { t_event: f64 },
}

/// Flags the first `T` with `E(t) > threshold` for all `t ∈ [T, T + dwell]`.
/// Each observation holds its energy over `[t, t + dt]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IonizationDetector {
    pub threshold: f64,
    pub dwell: f64,
    pub run_start: Option<f64>,
    pub fired_at: Option<f64>,
}

impl IonizationDetector {
    pub fn new(threshold: f64, dwell: f64) -> Self {
        Self { threshold, dwell, run_start: None, fired_at: None }
    }

    pub fn observe(&mut self, t: f64, dt: f64, energy: f64) -> IonizationStep {
        if let Some(t_event) = self.fired_at {
            return IonizationStep::Fired { t_event };
        }
        if energy > self.threshold {
            let start = *self.run_start.get_or_insert(t);
            if t + dt - start >= self.dwell {
                self.fired_at = Some(start);
                return IonizationStep::Fired { t_event: start };
            }
            IonizationStep::Candidate { start }
        } else if self.run_start.take().is_some() {
            IonizationStep::Cleared
        } else {
            IonizationStep::Idle
        }
    }

    pub fn verdict(&self) -> DetectorVerdict {
        DetectorVerdict::new(
            VerdictKind::Ionization,
            self.fired_at,
            vec![("threshold", self.threshold), ("dwell", self.dwell)],
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseDetector {
    pub r_min: f64,
    pub fired_at: Option<f64>,
}

impl CollapseDetector {
    pub fn new(r_min: f64) -> Self {
        Self { r_min, fired_at: None }
    }

    pub fn observe(&mut self, t: f64, r: f64) -> bool {
        if self.fired_at.is_none() && r < self.r_min {
            self.fired_at = Some(t);
        }
        self.fired_at.is_some()
    }

    pub fn verdict(&self) -> DetectorVerdict {
        DetectorVerdict::new(VerdictKind::Collapse, self.fired_at, vec![("r_min", self.r_min)])
    }
}

/// Tracks time spent with `L < l_crit`, and flags it when it happens at
/// near-zero energy (`E > energy_band`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalLMonitor {
    pub l_crit: f64,
    pub energy_band: f64,
    pub total_weight: f64,
    pub below_weight: f64,
    pub flagged_weight: f64,
    pub first_flag: Option<f64>,
}

impl CriticalLMonitor {
    pub fn new(l_crit: f64, energy_band: f64) -> Self {
        Self { l_crit, energy_band, total_weight: 0.0, below_weight: 0.0, flagged_weight: 0.0, first_flag: None }
    }

    /// Returns whether this observation is a flagged one.
    pub fn observe(&mut self, t: f64, dt: f64, l: f64, energy: f64) -> bool {
        self.total_weight += dt;
        if l >= self.l_crit {
            return false;
        }
        self.below_weight += dt;
        if energy > self.energy_band {
            self.flagged_weight += dt;
            self.first_flag.get_or_insert(t);
            return true;
        }
        false
    }

    pub fn fraction_below(&self) -> f64 {
        if self.total_weight > 0.0 {
            self.below_weight / self.total_weight
        } else {
            0.0
        }
    }

    pub fn verdict(&self) -> DetectorVerdict {
        let flagged = if self.total_weight > 0.0 { self.flagged_weight / self.total_weight } else { 0.0 };
        DetectorVerdict::new(
            VerdictKind::CriticalL,
            self.first_flag,
            vec![
                ("l_crit", self.l_crit),
                ("energy_band", self.energy_band),
                ("fraction_below", self.fraction_below()),
                ("flagged_fraction", flagged),
            ],
        )
    }
}

pub fn detect_ionization(trace: &Trace, threshold: f64, dwell: f64) -> DetectorVerdict {
    let mut det = IonizationDetector::new(threshold, dwell);
    for row in &trace.rows {
        if let IonizationStep::Fired { .. } = det.observe(row.t, row.dt_weight, row.energy) {
            break;
        }
    }
    det.verdict()
}

pub fn detect_collapse(trace: &Trace, r_min: f64) -> DetectorVerdict {
    let mut det = CollapseDetector::new(r_min);
    for row in &trace.rows {
        if det.observe(row.t, row.r) {
            break;
        }
    }
    det.verdict()
}

pub fn critical_l_monitor(trace: &Trace, l_crit: f64, energy_band: f64) -> DetectorVerdict {
    let mut mon = CriticalLMonitor::new(l_crit, energy_band);
    for row in &trace.rows {
        mon.observe(row.t, row.dt_weight, row.l, row.energy);
    }
    mon.verdict()
}

/// Weighted quantile (`q ∈ [0, 1]`) of `(value, weight)` pairs.
pub fn weighted_quantile(samples: &mut [(f64, f64)], q: f64) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = samples.iter().map(|s| s.1).sum();
    let target = q.clamp(0.0, 1.0) * total;
    let mut acc = 0.0;
    for &(v, w) in samples.iter() {
        acc += w;
        if acc >= target {
            return Some(v);
        }
    }
    samples.last().map(|s| s.0)
}
