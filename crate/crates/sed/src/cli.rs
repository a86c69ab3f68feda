//! Command-line definitions and verb dispatch.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sed_core::config::{FieldModel, ForceFlags, InitialState, SimConfig};
use sed_core::diagnostics::{critical_l_monitor, detect_collapse, detect_ionization, ks_distance, pooled_histogram, radial_histogram};
use sed_core::field::stats::SeriesPlan;
use sed_core::field::FieldError;
use sed_core::quantum::{ground_state_radial_density, radial_cdf};
use sed_core::runner::{RunError, RunState};
use sed_core::units::{from_scaled, to_si, Dimension, ALPHA};
use serde_json::json;
use thiserror::Error;

use crate::config_file::{self, ConfigFileError};
use crate::ensemble::{field_stats, run_ensemble_parallel, FieldStatsPlan};
use crate::output::{self, OutputError};
use crate::snapshot::{self, SnapshotError};

#[derive(Debug, Parser)]
#[command(
    name = "sed",
    version,
    about = "Classical hydrogen-like atom in a stochastic zero-point field",
    after_help = config_file::key_help(),
)]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// Configuration file (`[section]` / `key = value`).
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override a key, e.g. `--set run.z=3`; repeatable, wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Run one trajectory and write its output directory.
    #[command(after_help = config_file::key_help())]
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory (new or empty).
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Write a snapshot here (at --stop-at, or at the end of the run).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Continue from a snapshot instead of a configuration.
        #[arg(long, conflicts_with = "config")]
        resume: Option<PathBuf>,
        /// Stop at the first window boundary at or after this time (t0) and write --checkpoint.
        #[arg(long, requires = "checkpoint")]
        stop_at: Option<f64>,
    },
    /// Run seeds seed_base..seed_base+runs and pool their histograms.
    #[command(after_help = config_file::key_help())]
    Ensemble {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 11)]
        runs: u32,
        /// First seed; defaults to run.seed.
        #[arg(long)]
        seed_base: Option<u64>,
        /// Worker threads; results do not depend on it.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Radiation-reaction-only decay from a circular orbit versus r0^3/(4 Z alpha^3).
    #[command(after_help = config_file::key_help())]
    Collapse {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
        /// Initial radius, a.u.
        #[arg(long, default_value_t = 0.25)]
        r0: f64,
        /// Start from 0.53 angstrom (r0 = 1.0018 a.u.) instead of --r0.
        #[arg(long)]
        full: bool,
    },
    /// Variance and autocorrelation of synthesized dipole fields versus the spectral oracles.
    FieldStats {
        #[arg(long, short)]
        out: PathBuf,
        /// Band edges, a.u.
        #[arg(long, default_value_t = 1.0)]
        omega_lo: f64,
        #[arg(long, default_value_t = 10.0)]
        omega_hi: f64,
        #[arg(long, default_value_t = 10_000)]
        modes: u32,
        #[arg(long, default_value_t = 1000)]
        realizations: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sample spacing, a.u.
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        /// Samples per realization.
        #[arg(long, default_value_t = 600)]
        samples: usize,
        /// Largest lag in samples; default covers tau up to 10/omega_lo.
        #[arg(long)]
        max_lag: Option<usize>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Histograms and detector verdicts from an existing trace.csv.
    #[command(after_help = config_file::key_help())]
    Analyze {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// KS distance and overlay of a trace's radial density against the ground state.
    #[command(after_help = config_file::key_help())]
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigFileError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Snapshot { path: PathBuf, source: SnapshotError },
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Run(_) | CliError::Field(_) => EXIT_CONFIG,
            CliError::Output(_) | CliError::Read { .. } | CliError::Snapshot { .. } => EXIT_IO,
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

pub fn load_config(args: &ConfigArgs) -> Result<SimConfig, CliError> {
    let text = match &args.config {
        Some(p) => String::from_utf8(read_file(p)?)
            .map_err(|_| CliError::Usage(format!("{}: not UTF-8 text", p.display())))?,
        None => String::new(),
    };
    let overrides = args.set.iter().map(|s| config_file::parse_override(s)).collect::<Result<Vec<_>, _>>()?;
    Ok(config_file::load(&text, &overrides)?)
}

fn write_snapshot(path: &Path, run: &RunState) -> Result<(), CliError> {
    fs::write(path, snapshot::encode(run))
        .map_err(|source| OutputError::Io { path: path.to_path_buf(), source }.into())
}

pub fn dispatch(verb: Verb) -> Result<(), CliError> {
    match verb {
        Verb::Simulate { config, out, checkpoint, resume, stop_at } => {
            let mut run = match &resume {
                Some(path) => {
                    if !config.set.is_empty() {
                        return Err(CliError::Usage("--set cannot change a resumed run".into()));
                    }
                    snapshot::decode(&read_file(path)?)
                        .map_err(|source| CliError::Snapshot { path: path.clone(), source })?
                }
                None => RunState::new(load_config(&config)?)?,
            };
            if let Some(t_stop) = stop_at {
                let path = checkpoint.expect("clap enforces --checkpoint with --stop-at");
                run.run_until(t_stop);
                log::info!("checkpoint at t = {} t0", run.time());
                return write_snapshot(&path, &run);
            }
            let out = out.ok_or_else(|| CliError::Usage("simulate needs --out".into()))?;
            output::prepare_dir(&out)?;
            run.run_to_end();
            if let Some(path) = &checkpoint {
                write_snapshot(path, &run)?;
            }
            let result = run.into_output();
            log::info!("finished: {} after {} steps", result.termination.as_str(), result.metrics.steps);
            output::write_run(&out, &result)?;
            Ok(())
        }
        Verb::Ensemble { config, out, runs, seed_base, workers } => {
            let config = load_config(&config)?;
            output::prepare_dir(&out)?;
            let summary = run_ensemble_parallel(&config, runs, seed_base.unwrap_or(config.seed), workers)?;
            output::write_ensemble(&out, &summary)?;
            Ok(())
        }
        Verb::Collapse { config, out, r0, full } => {
            let r0 = if full { FULL_SCALE_R0 } else { r0 };
            let config = collapse_config(load_config(&config)?, r0)?;
            output::prepare_dir(&out)?;
            let report = collapse_benchmark(&config)?;
            output::write_run(&out.join("run"), &report.output)?;
            output::write_json_file(&out.join("collapse.json"), &report.json())?;
            println!(
                "collapse: measured {:.6e} a.u., predicted {:.6e} a.u., ratio {:.4}",
                report.measured_au.unwrap_or(f64::NAN),
                report.predicted_au,
                report.ratio().unwrap_or(f64::NAN)
            );
            Ok(())
        }
        Verb::FieldStats { out, omega_lo, omega_hi, modes, realizations, seed, dt, samples, max_lag, workers } => {
            if !(dt > 0.0) || samples < 2 {
                return Err(CliError::Usage("need dt > 0 and at least 2 samples".into()));
            }
            let max_lag = max_lag.unwrap_or_else(|| (10.0 / omega_lo / dt).round() as usize).min(samples - 1);
            let plan = FieldStatsPlan {
                band: (omega_lo, omega_hi),
                n_modes: modes,
                realizations,
                seed_base: seed,
                series: SeriesPlan { t0: 0.0, dt, n_samples: samples, max_lag },
            };
            output::prepare_dir(&out)?;
            let report = field_stats(&plan, workers)?;
            output::write_table(
                &out.join("autocorrelation.csv"),
                &["tau", "empirical", "oracle"],
                report.autocorrelation.iter().map(|&(t, e, o)| vec![t, e, o]),
            )?;
            output::write_json_file(
                &out.join("variance.json"),
                &json!({
                    "band": [plan.band.0, plan.band.1],
                    "n_modes": modes,
                    "realizations": realizations,
                    "variance": report.variance,
                    "variance_oracle": report.variance_oracle,
                    "mean": report.mean,
                    "worst_variance_rel_error": report.worst_variance_error(),
                    "worst_autocorrelation_error_over_c0": report.worst_autocorrelation_error(),
                }),
            )?;
            println!(
                "variance error {:.3e}, autocorrelation error / C(0) {:.3e}",
                report.worst_variance_error(),
                report.worst_autocorrelation_error()
            );
            Ok(())
        }
        Verb::Analyze { config, trace, out } => {
            let config = load_config(&config)?;
            let trace = output::read_trace(&trace)?;
            output::prepare_dir(&out)?;
            let h = &config.histograms;
            let d = &config.detectors;
            let r_edges = uniform_edges(h.r_max, h.r_bins);
            let l_edges = uniform_edges(h.l_max, h.l_bins);
            let hist_r = radial_histogram(&[&trace], &r_edges).expect("one trace");
            let hist_l = pooled_histogram(&[&trace], &l_edges, |row| row.l).expect("one trace");
            output::write_histogram(&out.join("hist_r.csv"), &hist_r)?;
            output::write_histogram(&out.join("hist_L.csv"), &hist_l)?;
            let verdicts = [
                detect_collapse(&trace, d.collapse_radius),
                detect_ionization(&trace, d.ionization_threshold, d.ionization_dwell),
                critical_l_monitor(&trace, d.l_crit, d.l_energy_band),
            ];
            output::write_json_file(
                &out.join("verdicts.json"),
                &json!({ "verdicts": verdicts.iter().map(output::verdict_json).collect::<Vec<_>>() }),
            )?;
            Ok(())
        }
        Verb::Compare { config, trace, out } => {
            let config = load_config(&config)?;
            let trace = output::read_trace(&trace)?;
            output::prepare_dir(&out)?;
            let h = &config.histograms;
            let hist = radial_histogram(&[&trace], &uniform_edges(h.r_max, h.r_bins)).expect("one trace");
            let ks = ks_distance(&hist, |r| radial_cdf(r, 1.0))
                .map_err(|e| CliError::Usage(format!("trace has no weight: {e}")))?;
            let rows = hist.edges.windows(2).zip(hist.density()).map(|(e, d)| {
                let mid = 0.5 * (e[0] + e[1]);
                vec![mid, d, ground_state_radial_density(mid, 1.0).unwrap_or(0.0)]
            });
            output::write_table(&out.join("compare.csv"), &["r", "empirical_density", "qm_density"], rows)?;
            output::write_json_file(&out.join("compare.json"), &json!({ "ks_distance": ks }))?;
            println!("KS distance to the ground-state radial distribution: {ks:.6}");
            Ok(())
        }
    }
}

fn uniform_edges(max: f64, bins: u32) -> Vec<f64> {
    (0..=bins).map(|i| if i == bins { max } else { max * f64::from(i) / f64::from(bins) }).collect()
}

/// 0.53 angstrom in Bohr radii.
pub const FULL_SCALE_R0: f64 = 0.53e-10 / 5.29177210903e-11;

/// Radiation-only, field-free, circular start at `r0` (a.u.), long enough to collapse.
pub fn collapse_config(base: SimConfig, r0: f64) -> Result<SimConfig, CliError> {
    let mut c = SimConfig {
        forces: ForceFlags::RADIATING,
        field_model: FieldModel::None,
        initial_state: InitialState::Circular { r0 },
        ..base
    };
    let predicted_scaled = predicted_collapse_au(r0, c.z) * f64::from(c.z * c.z);
    c.t_max = c.t_max.max(4.0 * predicted_scaled);
    c.validate().map_err(ConfigFileError::from)?;
    Ok(c)
}

/// `r0³/(4Zα³)` in a.u.
pub fn predicted_collapse_au(r0: f64, z: u32) -> f64 {
    r0 * r0 * r0 / (4.0 * f64::from(z) * ALPHA * ALPHA * ALPHA)
}

pub struct CollapseReport {
    pub r0: f64,
    pub z: u32,
    pub measured_au: Option<f64>,
    pub predicted_au: f64,
    /// Prediction for reaching the collapse radius rather than the origin.
    pub predicted_to_rmin_au: f64,
    pub output: sed_core::runner::RunOutput,
}

impl CollapseReport {
    pub fn ratio(&self) -> Option<f64> {
        self.measured_au.map(|t| t / self.predicted_au)
    }

    pub fn json(&self) -> serde_json::Value {
        json!({
            "z": self.z,
            "r0_au": self.r0,
            "measured_au": self.measured_au,
            "measured_s": self.measured_au.map(|t| to_si(t, Dimension::Time)),
            "predicted_au": self.predicted_au,
            "predicted_s": to_si(self.predicted_au, Dimension::Time),
            "predicted_to_collapse_radius_au": self.predicted_to_rmin_au,
            "ratio": self.ratio(),
            "termination": self.output.termination.as_str(),
        })
    }
}

pub fn collapse_benchmark(config: &SimConfig) -> Result<CollapseReport, CliError> {
    let InitialState::Circular { r0 } = config.initial_state else {
        return Err(CliError::Usage("collapse needs a circular initial state".into()));
    };
    let output = sed_core::runner::run_trajectory(*config)?;
    let measured_au = output.verdicts[0].t_event.map(|t| from_scaled(t, config.z, Dimension::Time));
    let r_min = from_scaled(config.detectors.collapse_radius, config.z, Dimension::Length);
    Ok(CollapseReport {
        r0,
        z: config.z,
        measured_au,
        predicted_au: predicted_collapse_au(r0, config.z),
        predicted_to_rmin_au: predicted_collapse_au(r0, config.z) - predicted_collapse_au(r_min.min(r0), config.z),
        output,
    })
}
