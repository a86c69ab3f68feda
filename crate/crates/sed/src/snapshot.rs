//! Versioned binary checkpoints of a [`RunState`].
//!
//! Layout: 8-byte magic, `u32` version, little-endian payload, then the
//! SHA-256 of everything before it. The configuration travels as its
//! text echo; floats are stored as raw bits.

use sed_core::config::SimConfig;
use sed_core::diagnostics::{CollapseDetector, CriticalLMonitor, IonizationDetector, Trace, TraceRow, WeightedHistogram};
use sed_core::dynamics::State;
use sed_core::field::{Mode, ModeModel, ModeSet, MeshGrid, Wave};
use sed_core::rng::RngSpec;
use sed_core::runner::{Recorder, RunMetrics, RunState, Termination};
use sed_core::DVec3;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config_file;

pub const MAGIC: &[u8; 8] = b"SEDSNAP\0";
pub const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("not a snapshot file")]
    BadMagic,
    #[error("snapshot version {found}, this build reads version {expected}")]
    Version { found: u32, expected: u32 },
    #[error("snapshot is truncated")]
    Truncated,
    #[error("snapshot checksum mismatch (corrupted file)")]
    Checksum,
    #[error("snapshot is malformed: {0}")]
    Malformed(&'static str),
    #[error("snapshot configuration: {0}")]
    Config(#[from] config_file::ConfigFileError),
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, x: u8) {
        self.0.push(x);
    }
    fn u32(&mut self, x: u32) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.u64(x.to_bits());
    }
    fn bool(&mut self, x: bool) {
        self.u8(u8::from(x));
    }
    fn opt_f64(&mut self, x: Option<f64>) {
        self.bool(x.is_some());
        self.f64(x.unwrap_or(0.0));
    }
    fn vec3(&mut self, v: DVec3) {
        self.f64(v.x);
        self.f64(v.y);
        self.f64(v.z);
    }
    fn f64s(&mut self, xs: &[f64]) {
        self.u64(xs.len() as u64);
        xs.iter().for_each(|&x| self.f64(x));
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.0.extend_from_slice(b);
    }
    fn state(&mut self, s: &State) {
        self.f64(s.t);
        self.vec3(s.r);
        self.vec3(s.v);
    }
    fn hist(&mut self, h: &WeightedHistogram) {
        self.f64s(&h.edges);
        self.f64s(&h.mass);
        self.f64(h.underflow);
        self.f64(h.overflow);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SnapshotError> {
        let end = self.pos.checked_add(n).ok_or(SnapshotError::Truncated)?;
        let out = self.buf.get(self.pos..end).ok_or(SnapshotError::Truncated)?;
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8, SnapshotError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, SnapshotError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64, SnapshotError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64, SnapshotError> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn bool(&mut self) -> Result<bool, SnapshotError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(SnapshotError::Malformed("boolean")),
        }
    }
    fn opt_f64(&mut self) -> Result<Option<f64>, SnapshotError> {
        let some = self.bool()?;
        let x = self.f64()?;
        Ok(some.then_some(x))
    }
    fn vec3(&mut self) -> Result<DVec3, SnapshotError> {
        Ok(DVec3::new(self.f64()?, self.f64()?, self.f64()?))
    }
    fn len(&mut self, item_size: usize) -> Result<usize, SnapshotError> {
        let n = self.u64()?;
        let n = usize::try_from(n).map_err(|_| SnapshotError::Truncated)?;
        // A length that cannot fit in the remaining bytes means truncation or garbage.
        if n.saturating_mul(item_size) > self.buf.len() - self.pos {
            return Err(SnapshotError::Truncated);
        }
        Ok(n)
    }
    fn f64s(&mut self) -> Result<Vec<f64>, SnapshotError> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn bytes(&mut self) -> Result<&'a [u8], SnapshotError> {
        let n = self.len(1)?;
        self.take(n)
    }
    fn state(&mut self) -> Result<State, SnapshotError> {
        Ok(State::new(self.f64()?, self.vec3()?, self.vec3()?))
    }
    fn hist(&mut self) -> Result<WeightedHistogram, SnapshotError> {
        let edges = self.f64s()?;
        let mass = self.f64s()?;
        let underflow = self.f64()?;
        let overflow = self.f64()?;
        if edges.len() != mass.len() + 1 {
            return Err(SnapshotError::Malformed("histogram shape"));
        }
        Ok(WeightedHistogram { edges, mass, underflow, overflow })
    }
}

fn write_modes(w: &mut Writer, m: &ModeSet) {
    w.u8(match m.model {
        ModeModel::Dipole1d => 0,
        ModeModel::AxialPlaneWave => 1,
    });
    w.f64(m.grid.origin);
    w.f64(m.grid.spacing);
    w.f64(m.band.0);
    w.f64(m.band.1);
    w.u64(m.rng.seed);
    w.u64(m.rng.stream_id);
    w.bool(m.planar);
    w.opt_f64(m.damping);
    w.f64(m.box_lz);
    w.u64(m.modes.len() as u64);
    for mode in &m.modes {
        w.u64(mode.slot);
        w.f64(mode.omega);
        w.f64(mode.scale);
        w.u64(mode.waves.len() as u64);
        for wave in &mode.waves {
            w.f64(wave.amp_cos);
            w.f64(wave.amp_sin);
            w.vec3(wave.polarization);
            w.vec3(wave.k_vec);
        }
    }
}

fn read_modes(r: &mut Reader) -> Result<ModeSet, SnapshotError> {
    let model = match r.u8()? {
        0 => ModeModel::Dipole1d,
        1 => ModeModel::AxialPlaneWave,
        _ => return Err(SnapshotError::Malformed("field model")),
    };
    let grid = MeshGrid { origin: r.f64()?, spacing: r.f64()? };
    let band = (r.f64()?, r.f64()?);
    let rng = RngSpec::new(r.u64()?, r.u64()?);
    let planar = r.bool()?;
    let damping = r.opt_f64()?;
    let box_lz = r.f64()?;
    let n = r.len(32)?;
    let mut modes = Vec::with_capacity(n);
    for _ in 0..n {
        let slot = r.u64()?;
        let omega = r.f64()?;
        let scale = r.f64()?;
        let n_waves = r.len(64)?;
        let waves = (0..n_waves)
            .map(|_| {
                Ok(Wave { amp_cos: r.f64()?, amp_sin: r.f64()?, polarization: r.vec3()?, k_vec: r.vec3()? })
            })
            .collect::<Result<Vec<_>, SnapshotError>>()?;
        modes.push(Mode { slot, omega, scale, waves });
    }
    Ok(ModeSet { model, grid, band, rng, planar, damping, box_lz, modes })
}

fn write_termination(w: &mut Writer, t: Option<Termination>) {
    let (tag, a, b) = match t {
        None => (0, 0.0, 0.0),
        Some(Termination::TimeLimit) => (1, 0.0, 0.0),
        Some(Termination::Collapse) => (2, 0.0, 0.0),
        Some(Termination::Ionization) => (3, 0.0, 0.0),
        Some(Termination::CriticalL) => (4, 0.0, 0.0),
        Some(Termination::Stiffness { t, dt }) => (5, t, dt),
        Some(Termination::FieldFailure { t }) => (6, t, 0.0),
    };
    w.u8(tag);
    w.f64(a);
    w.f64(b);
}

fn read_termination(r: &mut Reader) -> Result<Option<Termination>, SnapshotError> {
    let tag = r.u8()?;
    let a = r.f64()?;
    let b = r.f64()?;
    Ok(match tag {
        0 => None,
        1 => Some(Termination::TimeLimit),
        2 => Some(Termination::Collapse),
        3 => Some(Termination::Ionization),
        4 => Some(Termination::CriticalL),
        5 => Some(Termination::Stiffness { t: a, dt: b }),
        6 => Some(Termination::FieldFailure { t: a }),
        _ => return Err(SnapshotError::Malformed("termination")),
    })
}

pub fn encode(run: &RunState) -> Vec<u8> {
    let mut w = Writer::default();
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.bytes(config_file::echo(&run.config).as_bytes());
    w.state(&run.state);
    w.bool(run.modes.is_some());
    if let Some(m) = &run.modes {
        write_modes(&mut w, m);
    }
    w.f64(run.period);
    w.f64(run.dt_next);

    let rec = &run.recorder;
    w.u32(rec.trace.stride);
    w.u32(rec.trace.open);
    w.opt_f64(rec.trace.last_t);
    w.u64(rec.trace.rows.len() as u64);
    for row in &rec.trace.rows {
        for x in [row.t, row.r, row.energy, row.l, row.eccentricity, row.dt_weight] {
            w.f64(x);
        }
    }
    for h in [&rec.hist_r, &rec.hist_l, &rec.pending_r, &rec.pending_l] {
        w.hist(h);
    }
    w.f64(rec.collapse.r_min);
    w.opt_f64(rec.collapse.fired_at);
    w.f64(rec.ionization.threshold);
    w.f64(rec.ionization.dwell);
    w.opt_f64(rec.ionization.run_start);
    w.opt_f64(rec.ionization.fired_at);
    let c = &rec.critical;
    for x in [c.l_crit, c.energy_band, c.total_weight, c.below_weight, c.flagged_weight] {
        w.f64(x);
    }
    w.opt_f64(c.first_flag);
    w.bool(rec.exclude_ionization);
    w.bool(rec.stop_on_critical_l);

    let m = &run.metrics;
    for x in [m.steps, m.rejected_steps, m.windows, m.band_changes, m.cache_builds] {
        w.u64(x);
    }
    write_termination(&mut w, run.termination);

    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(&digest);
    w.0
}

pub fn decode(bytes: &[u8]) -> Result<RunState, SnapshotError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(if MAGIC.starts_with(bytes) { SnapshotError::Truncated } else { SnapshotError::BadMagic });
    }
    let mut header = Reader { buf: bytes, pos: MAGIC.len() };
    let version = header.u32()?;
    if version != VERSION {
        return Err(SnapshotError::Version { found: version, expected: VERSION });
    }
    if bytes.len() < MAGIC.len() + 4 + DIGEST_LEN {
        return Err(SnapshotError::Truncated);
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(SnapshotError::Checksum);
    }
    let mut r = Reader { buf: body, pos: MAGIC.len() + 4 };

    let text = std::str::from_utf8(r.bytes()?).map_err(|_| SnapshotError::Malformed("config text"))?;
    let config: SimConfig = config_file::load(text, &[])?;
    let state = r.state()?;
    let modes = if r.bool()? { Some(read_modes(&mut r)?) } else { None };
    let period = r.f64()?;
    let dt_next = r.f64()?;

    let stride = r.u32()?;
    let open = r.u32()?;
    let last_t = r.opt_f64()?;
    let n_rows = r.len(48)?;
    let mut rows = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        rows.push(TraceRow {
            t: r.f64()?,
            r: r.f64()?,
            energy: r.f64()?,
            l: r.f64()?,
            eccentricity: r.f64()?,
            dt_weight: r.f64()?,
        });
    }
    let trace = Trace { rows, stride, open, last_t };
    let hist_r = r.hist()?;
    let hist_l = r.hist()?;
    let pending_r = r.hist()?;
    let pending_l = r.hist()?;
    let collapse = CollapseDetector { r_min: r.f64()?, fired_at: r.opt_f64()? };
    let ionization =
        IonizationDetector { threshold: r.f64()?, dwell: r.f64()?, run_start: r.opt_f64()?, fired_at: r.opt_f64()? };
    let critical = CriticalLMonitor {
        l_crit: r.f64()?,
        energy_band: r.f64()?,
        total_weight: r.f64()?,
        below_weight: r.f64()?,
        flagged_weight: r.f64()?,
        first_flag: r.opt_f64()?,
    };
    let exclude_ionization = r.bool()?;
    let stop_on_critical_l = r.bool()?;
    let metrics = RunMetrics {
        steps: r.u64()?,
        rejected_steps: r.u64()?,
        windows: r.u64()?,
        band_changes: r.u64()?,
        cache_builds: r.u64()?,
    };
    let termination = read_termination(&mut r)?;
    if r.pos != body.len() {
        return Err(SnapshotError::Malformed("trailing bytes"));
    }
    Ok(RunState {
        config,
        state,
        modes,
        period,
        dt_next,
        recorder: Recorder {
            trace,
            hist_r,
            hist_l,
            pending_r,
            pending_l,
            collapse,
            ionization,
            critical,
            exclude_ionization,
            stop_on_critical_l,
        },
        metrics,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_state() -> RunState {
        let config = SimConfig { t_max: 60.0, steps_per_orbit: 200, ..Default::default() };
        let mut run = RunState::new(config).unwrap();
        run.run_until(20.0);
        run
    }

    #[test]
    fn round_trip_is_exact() {
        let run = sample_state();
        let back = decode(&encode(&run)).unwrap();
        assert_eq!(back, run);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = encode(&sample_state());
        for cut in [0, 5, 8, 12, 100, bytes.len() - 1] {
            assert!(decode(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        let mid = flipped.len() / 2;
        flipped[mid] ^= 1;
        assert!(matches!(decode(&flipped), Err(SnapshotError::Checksum)));
        let mut versioned = bytes.clone();
        versioned[8] = 9;
        assert!(matches!(decode(&versioned), Err(SnapshotError::Version { found: 9, .. })));
        assert!(matches!(decode(b"PNG\x89 not a snapshot"), Err(SnapshotError::BadMagic)));
    }
}
