//! `[section] key = value` configuration files and `key=value` overrides.
//!
//! Keys are addressed as `section.key`. Comments start with `#` or `;`.
//! Every key is listed in [`CONFIG_KEYS`]; anything else is rejected with
//! the line it appeared on. [`echo`] writes a file that parses back to the
//! identical configuration.

use std::fmt::Write as _;

use sed_core::config::{
    CutoffPolicy, FieldModel, FixedCutoff, ForceFlags, InitialState, Integrator, MovingCutoff, SimConfig,
};
use sed_core::DVec3;
use thiserror::Error;

/// Where a key/value pair came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override,
}

impl std::fmt::Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Override => f.write_str("--set"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("{origin}: {message}")]
    Syntax { origin: Origin, message: String },
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { origin: Origin, key: String },
    #[error("{origin}: bad value `{value}` for `{key}`: expected {expected}")]
    BadValue { origin: Origin, key: String, value: String, expected: &'static str },
    #[error("invalid configuration: {0}")]
    Invalid(#[from] sed_core::config::ConfigError),
}

pub struct KeyDoc {
    pub key: &'static str,
    pub doc: &'static str,
}

const fn key(key: &'static str, doc: &'static str) -> KeyDoc {
    KeyDoc { key, doc }
}

pub const CONFIG_KEYS: &[KeyDoc] = &[
    key("run.z", "nuclear charge Z (integer >= 1) [1]"),
    key("run.seed", "64-bit seed of the field realization [0]"),
    key("run.t_max", "run length in t0 = 1/Z^2 a.u. [6283.185307179586, i.e. 1000 orbits]"),
    key("run.steps_per_orbit", "fixed RK4 steps per osculating period [4000]"),
    key("run.field_updates_per_orbit", "field cache knots per period, linear in between [10]"),
    key("run.dt_init", "first adaptive step, t0 [0.001]"),
    key("run.singularity_radius", "radius (a.u.) treated as reaching the nucleus [0.001]"),
    key("run.trace_stride", "steps merged into one trace row (weights add) [400]"),
    key("forces.coulomb", "Coulomb attraction [true]"),
    key("forces.radiation_reaction", "order-reduced radiation reaction [true]"),
    key("forces.field_electric", "electric force of the stochastic field [true]"),
    key("forces.field_magnetic", "magnetic force v x B (axial model only) [false]"),
    key("field.model", "none | dipole_1d | axial_plane_wave [dipole_1d]"),
    key("field.n_modes", "frequency slots in the initial band [1000]"),
    key("field.planar", "dipole model: drop the z component [true]"),
    key("field.damping", "none | frequency (1/t0) of the exp(-w/w_d) amplitude taper [none]"),
    key("field.box_lz", "axial model box length, a.u. [0.41 cm]"),
    key("field.use_cache", "dipole model: interpolate between knots (else exact) [true]"),
    key("cutoff.kind", "moving | fixed | wavelength [moving]"),
    key("cutoff.multiple", "moving: upper edge = multiple x orbital frequency [2.5]"),
    key("cutoff.floor", "moving: lower edge and minimum upper edge, 1/t0 [0.05]"),
    key("cutoff.ceiling", "moving: maximum upper edge, 1/t0 [20]"),
    key("cutoff.omega_min", "fixed: lower edge, 1/t0 [0.05]"),
    key("cutoff.omega_max", "fixed: upper edge, 1/t0 [20]"),
    key("cutoff.lambda_min_m", "wavelength: shortest wavelength, m [1e-11]"),
    key("cutoff.lambda_max_m", "wavelength: longest wavelength, m [9e-8]"),
    key("integrator.kind", "fixed_rk4 | adaptive_rk4 [fixed_rk4]"),
    key("integrator.tol", "adaptive: per-step tolerance on |dr|+|dv| relative to 1+|r| [1e-10]"),
    key("integrator.dt_min", "adaptive: smallest step before a stiffness stop, t0 [1e-12]"),
    key("initial.kind", "circular | explicit [circular]"),
    key("initial.r0", "circular: radius, a.u. [1]"),
    key("initial.r", "explicit: position x,y,z in a.u."),
    key("initial.v", "explicit: velocity x,y,z in a.u."),
    key("detectors.collapse_radius", "collapse when r < this, scaled Bohr radii [0.05]"),
    key("detectors.ionization_threshold", "ionization energy threshold, Z^2 Hartree [-0.05]"),
    key("detectors.ionization_dwell", "time above threshold for ionization, t0 [10000]"),
    key("detectors.l_crit", "critical angular momentum, hbar [0.588]"),
    key("detectors.l_energy_band", "near-zero energy band for the L monitor: E > this [-0.1]"),
    key("detectors.stop_on_critical_l", "stop the run when the L monitor flags [false]"),
    key("detectors.exclude_ionization", "leave the ionization window out of histograms [true]"),
    key("histograms.r_max", "radial histogram range [0, r_max], scaled Bohr radii [10]"),
    key("histograms.r_bins", "radial histogram bins [200]"),
    key("histograms.l_max", "angular momentum histogram range [0, l_max], hbar [3]"),
    key("histograms.l_bins", "angular momentum histogram bins [150]"),
];

/// Help text listing every key.
pub fn key_help() -> String {
    let mut s = String::from("Configuration keys (`[section]` then `key = value`, or `--set section.key=value`):\n");
    for k in CONFIG_KEYS {
        let _ = writeln!(s, "  {:<32} {}", k.key, k.doc);
    }
    s
}

/// Everything a file can say, including the settings of inactive variants.
#[derive(Debug, Clone, Copy)]
struct Draft {
    base: SimConfig,
    cutoff_kind: CutoffKind,
    fixed: FixedCutoff,
    moving: MovingCutoff,
    lambda: (f64, f64),
    adaptive: bool,
    tol: f64,
    dt_min: f64,
    explicit: bool,
    r0: f64,
    r: DVec3,
    v: DVec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CutoffKind {
    Fixed,
    Moving,
    Wavelength,
}

impl Draft {
    fn from_config(c: &SimConfig) -> Self {
        let mut d = Draft {
            base: *c,
            cutoff_kind: CutoffKind::Moving,
            fixed: FixedCutoff { omega_min: 0.05, omega_max: 20.0 },
            moving: MovingCutoff { multiple: 2.5, floor: 0.05, ceiling: 20.0 },
            lambda: (1e-11, 9e-8),
            adaptive: false,
            tol: 1e-10,
            dt_min: 1e-12,
            explicit: false,
            r0: 1.0,
            r: DVec3::X,
            v: DVec3::Y,
        };
        match c.cutoff {
            CutoffPolicy::Fixed(f) => {
                d.cutoff_kind = CutoffKind::Fixed;
                d.fixed = f;
            }
            CutoffPolicy::Moving(m) => d.moving = m,
        }
        if let Integrator::AdaptiveRk4 { tol, dt_min } = c.integrator {
            d.adaptive = true;
            d.tol = tol;
            d.dt_min = dt_min;
        }
        match c.initial_state {
            InitialState::Circular { r0 } => d.r0 = r0,
            InitialState::Explicit { r, v } => {
                d.explicit = true;
                d.r = r;
                d.v = v;
            }
        }
        d
    }

    fn build(&self) -> SimConfig {
        let cutoff = match self.cutoff_kind {
            CutoffKind::Fixed => CutoffPolicy::Fixed(self.fixed),
            CutoffKind::Moving => CutoffPolicy::Moving(self.moving),
            CutoffKind::Wavelength => CutoffPolicy::wavelength_window(self.lambda.0, self.lambda.1, self.base.z.max(1)),
        };
        let integrator = if self.adaptive {
            Integrator::AdaptiveRk4 { tol: self.tol, dt_min: self.dt_min }
        } else {
            Integrator::FixedRk4
        };
        let initial_state = if self.explicit {
            InitialState::Explicit { r: self.r, v: self.v }
        } else {
            InitialState::Circular { r0: self.r0 }
        };
        SimConfig { cutoff, integrator, initial_state, ..self.base }
    }

    fn set(&mut self, key: &str, value: &str, origin: &Origin) -> Result<(), ConfigFileError> {
        let bad = |expected: &'static str| ConfigFileError::BadValue {
            origin: origin.clone(),
            key: key.to_string(),
            value: value.to_string(),
            expected,
        };
        let f = || value.parse::<f64>().map_err(|_| bad("a number"));
        let u32_ = || value.parse::<u32>().map_err(|_| bad("a non-negative integer"));
        let b = || value.parse::<bool>().map_err(|_| bad("true or false"));
        let vec3 = || {
            let parts: Vec<&str> = value.split(',').map(str::trim).collect();
            match parts.as_slice() {
                [x, y, z] => match (x.parse(), y.parse(), z.parse()) {
                    (Ok(x), Ok(y), Ok(z)) => Ok(DVec3::new(x, y, z)),
                    _ => Err(bad("three comma-separated numbers")),
                },
                _ => Err(bad("three comma-separated numbers")),
            }
        };
        let c = &mut self.base;
        match key {
            "run.z" => c.z = u32_()?,
            "run.seed" => c.seed = value.parse().map_err(|_| bad("a 64-bit unsigned integer"))?,
            "run.t_max" => c.t_max = f()?,
            "run.steps_per_orbit" => c.steps_per_orbit = u32_()?,
            "run.field_updates_per_orbit" => c.field_updates_per_orbit = u32_()?,
            "run.dt_init" => c.dt_init = f()?,
            "run.singularity_radius" => c.singularity_radius = f()?,
            "run.trace_stride" => c.trace_stride = u32_()?,
            "forces.coulomb" => c.forces.coulomb = b()?,
            "forces.radiation_reaction" => c.forces.radiation_reaction = b()?,
            "forces.field_electric" => c.forces.field_electric = b()?,
            "forces.field_magnetic" => c.forces.field_magnetic = b()?,
            "field.model" => {
                c.field_model = match value {
                    "none" => FieldModel::None,
                    "dipole_1d" => FieldModel::Dipole1d,
                    "axial_plane_wave" => FieldModel::AxialPlaneWave,
                    _ => return Err(bad("none, dipole_1d or axial_plane_wave")),
                }
            }
            "field.n_modes" => c.field.n_modes = u32_()?,
            "field.planar" => c.field.planar = b()?,
            "field.damping" => c.field.damping = if value == "none" { None } else { Some(f()?) },
            "field.box_lz" => c.field.box_lz = f()?,
            "field.use_cache" => c.field.use_cache = b()?,
            "cutoff.kind" => {
                self.cutoff_kind = match value {
                    "fixed" => CutoffKind::Fixed,
                    "moving" => CutoffKind::Moving,
                    "wavelength" => CutoffKind::Wavelength,
                    _ => return Err(bad("fixed, moving or wavelength")),
                }
            }
            "cutoff.multiple" => self.moving.multiple = f()?,
            "cutoff.floor" => self.moving.floor = f()?,
            "cutoff.ceiling" => self.moving.ceiling = f()?,
            "cutoff.omega_min" => self.fixed.omega_min = f()?,
            "cutoff.omega_max" => self.fixed.omega_max = f()?,
            "cutoff.lambda_min_m" => self.lambda.0 = f()?,
            "cutoff.lambda_max_m" => self.lambda.1 = f()?,
            "integrator.kind" => {
                self.adaptive = match value {
                    "fixed_rk4" => false,
                    "adaptive_rk4" => true,
                    _ => return Err(bad("fixed_rk4 or adaptive_rk4")),
                }
            }
            "integrator.tol" => self.tol = f()?,
            "integrator.dt_min" => self.dt_min = f()?,
            "initial.kind" => {
                self.explicit = match value {
                    "circular" => false,
                    "explicit" => true,
                    _ => return Err(bad("circular or explicit")),
                }
            }
            "initial.r0" => self.r0 = f()?,
            "initial.r" => self.r = vec3()?,
            "initial.v" => self.v = vec3()?,
            "detectors.collapse_radius" => c.detectors.collapse_radius = f()?,
            "detectors.ionization_threshold" => c.detectors.ionization_threshold = f()?,
            "detectors.ionization_dwell" => c.detectors.ionization_dwell = f()?,
            "detectors.l_crit" => c.detectors.l_crit = f()?,
            "detectors.l_energy_band" => c.detectors.l_energy_band = f()?,
            "detectors.stop_on_critical_l" => c.detectors.stop_on_critical_l = b()?,
            "detectors.exclude_ionization" => c.detectors.exclude_ionization = b()?,
            "histograms.r_max" => c.histograms.r_max = f()?,
            "histograms.r_bins" => c.histograms.r_bins = u32_()?,
            "histograms.l_max" => c.histograms.l_max = f()?,
            "histograms.l_bins" => c.histograms.l_bins = u32_()?,
            _ => return Err(ConfigFileError::UnknownKey { origin: origin.clone(), key: key.to_string() }),
        }
        Ok(())
    }
}

fn parse_pairs(text: &str) -> Result<Vec<(String, String, Origin)>, ConfigFileError> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let origin = Origin::Line(i + 1);
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigFileError::Syntax {
                origin: origin.clone(),
                message: "unterminated section header".into(),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigFileError::Syntax {
            origin: origin.clone(),
            message: format!("expected `key = value`, found `{line}`"),
        })?;
        let k = k.trim();
        let full = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
        out.push((full, v.trim().to_string(), origin));
    }
    Ok(out)
}

/// Splits a `key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String), ConfigFileError> {
    let (k, v) = s.split_once('=').ok_or_else(|| ConfigFileError::Syntax {
        origin: Origin::Override,
        message: format!("expected key=value, found `{s}`"),
    })?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Parses file text on top of the defaults, then applies overrides, then validates.
pub fn load(text: &str, overrides: &[(String, String)]) -> Result<SimConfig, ConfigFileError> {
    let mut draft = Draft::from_config(&SimConfig::default());
    for (k, v, origin) in parse_pairs(text)? {
        draft.set(&k, &v, &origin)?;
    }
    for (k, v) in overrides {
        draft.set(k, v, &Origin::Override)?;
    }
    let config = draft.build();
    config.validate()?;
    Ok(config)
}

/// Applies overrides to an existing configuration.
pub fn with_overrides(config: &SimConfig, overrides: &[(String, String)]) -> Result<SimConfig, ConfigFileError> {
    let mut draft = Draft::from_config(config);
    for (k, v) in overrides {
        draft.set(k, v, &Origin::Override)?;
    }
    let config = draft.build();
    config.validate()?;
    Ok(config)
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Full configuration as file text, floats in round-trip precision.
pub fn echo(c: &SimConfig) -> String {
    let d = Draft::from_config(c);
    let mut s = String::new();
    let mut w = |line: String| {
        s.push_str(&line);
        s.push('\n');
    };
    w("[run]".into());
    w(format!("z = {}", c.z));
    w(format!("seed = {}", c.seed));
    w(format!("t_max = {}", num(c.t_max)));
    w(format!("steps_per_orbit = {}", c.steps_per_orbit));
    w(format!("field_updates_per_orbit = {}", c.field_updates_per_orbit));
    w(format!("dt_init = {}", num(c.dt_init)));
    w(format!("singularity_radius = {}", num(c.singularity_radius)));
    w(format!("trace_stride = {}", c.trace_stride));
    w(String::new());
    let ForceFlags { coulomb, radiation_reaction, field_electric, field_magnetic } = c.forces;
    w("[forces]".into());
    w(format!("coulomb = {coulomb}"));
    w(format!("radiation_reaction = {radiation_reaction}"));
    w(format!("field_electric = {field_electric}"));
    w(format!("field_magnetic = {field_magnetic}"));
    w(String::new());
    w("[field]".into());
    w(format!(
        "model = {}",
        match c.field_model {
            FieldModel::None => "none",
            FieldModel::Dipole1d => "dipole_1d",
            FieldModel::AxialPlaneWave => "axial_plane_wave",
        }
    ));
    w(format!("n_modes = {}", c.field.n_modes));
    w(format!("planar = {}", c.field.planar));
    w(format!("damping = {}", c.field.damping.map_or("none".to_string(), num)));
    w(format!("box_lz = {}", num(c.field.box_lz)));
    w(format!("use_cache = {}", c.field.use_cache));
    w(String::new());
    w("[cutoff]".into());
    match c.cutoff {
        CutoffPolicy::Fixed(f) => {
            w("kind = fixed".into());
            w(format!("omega_min = {}", num(f.omega_min)));
            w(format!("omega_max = {}", num(f.omega_max)));
        }
        CutoffPolicy::Moving(m) => {
            w("kind = moving".into());
            w(format!("multiple = {}", num(m.multiple)));
            w(format!("floor = {}", num(m.floor)));
            w(format!("ceiling = {}", num(m.ceiling)));
        }
    }
    w(String::new());
    w("[integrator]".into());
    if d.adaptive {
        w("kind = adaptive_rk4".into());
        w(format!("tol = {}", num(d.tol)));
        w(format!("dt_min = {}", num(d.dt_min)));
    } else {
        w("kind = fixed_rk4".into());
    }
    w(String::new());
    w("[initial]".into());
    if d.explicit {
        w("kind = explicit".into());
        w(format!("r = {}, {}, {}", num(d.r.x), num(d.r.y), num(d.r.z)));
        w(format!("v = {}, {}, {}", num(d.v.x), num(d.v.y), num(d.v.z)));
    } else {
        w("kind = circular".into());
        w(format!("r0 = {}", num(d.r0)));
    }
    w(String::new());
    let det = &c.detectors;
    w("[detectors]".into());
    w(format!("collapse_radius = {}", num(det.collapse_radius)));
    w(format!("ionization_threshold = {}", num(det.ionization_threshold)));
    w(format!("ionization_dwell = {}", num(det.ionization_dwell)));
    w(format!("l_crit = {}", num(det.l_crit)));
    w(format!("l_energy_band = {}", num(det.l_energy_band)));
    w(format!("stop_on_critical_l = {}", det.stop_on_critical_l));
    w(format!("exclude_ionization = {}", det.exclude_ionization));
    w(String::new());
    let h = &c.histograms;
    w("[histograms]".into());
    w(format!("r_max = {}", num(h.r_max)));
    w(format!("r_bins = {}", h.r_bins));
    w(format!("l_max = {}", num(h.l_max)));
    w(format!("l_bins = {}", h.l_bins));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(load("", &[]).unwrap(), SimConfig::default());
    }

    #[test]
    fn echo_round_trips() {
        let mut c = SimConfig::default();
        assert_eq!(load(&echo(&c), &[]).unwrap(), c);
        c.t_max = 0.1 + 0.2;
        c.seed = u64::MAX;
        c.field.damping = Some(1.0 / 3.0);
        c.cutoff = CutoffPolicy::Fixed(FixedCutoff { omega_min: 0.3, omega_max: 7.0 / 3.0 });
        c.integrator = Integrator::AdaptiveRk4 { tol: 1e-12, dt_min: 1e-15 };
        c.initial_state = InitialState::Explicit { r: DVec3::new(0.25, -1e-300, 0.0), v: DVec3::new(0.0, 2.0, 0.1) };
        assert_eq!(load(&echo(&c), &[]).unwrap(), c);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = load("[run]\nz = 1\n\n  bogus = 3\n", &[]).unwrap_err();
        match err {
            ConfigFileError::UnknownKey { origin, key } => {
                assert_eq!(origin, Origin::Line(4));
                assert_eq!(key, "run.bogus");
            }
            other => panic!("{other}"),
        }
        assert!(matches!(load("[run\n", &[]), Err(ConfigFileError::Syntax { origin: Origin::Line(1), .. })));
        assert!(matches!(load("[run]\nz = x\n", &[]), Err(ConfigFileError::BadValue { .. })));
    }

    #[test]
    fn overrides_win() {
        let ov = vec![parse_override("run.z=3").unwrap(), parse_override("initial.r0 = 0.333").unwrap()];
        let c = load("[run]\nz = 2 # comment\n", &ov).unwrap();
        assert_eq!(c.z, 3);
        assert_eq!(c.initial_state, InitialState::Circular { r0: 0.333 });
        assert!(matches!(load("", &[("nope".into(), "1".into())]), Err(ConfigFileError::UnknownKey { origin: Origin::Override, .. })));
    }

    #[test]
    fn validation_runs_after_parse() {
        assert!(matches!(load("[run]\nz = 0\n", &[]), Err(ConfigFileError::Invalid(_))));
    }

    #[test]
    fn every_key_is_documented_and_accepted() {
        let mut draft = Draft::from_config(&SimConfig::default());
        for k in CONFIG_KEYS {
            let value = match k.key {
                "field.model" => "dipole_1d",
                "cutoff.kind" => "moving",
                "integrator.kind" => "fixed_rk4",
                "initial.kind" => "circular",
                "initial.r" | "initial.v" => "1,0,0",
                "field.damping" => "none",
                key if key.starts_with("forces.") || key.ends_with("planar") || key.ends_with("use_cache") => "true",
                key if key.starts_with("detectors.stop") || key.starts_with("detectors.exclude") => "false",
                _ => "2",
            };
            draft.set(k.key, value, &Origin::Override).unwrap_or_else(|e| panic!("{}: {e}", k.key));
        }
        let help = key_help();
        for k in CONFIG_KEYS {
            assert!(help.contains(k.key));
        }
    }
}
