//! Parallel work over independent seeds. Results are always collected
//! and reduced in seed order, so the worker count never changes a bit of
//! the output.

use rayon::prelude::*;
use sed_core::config::SimConfig;
use sed_core::field::stats::{average, seeded_realization, RealizationStats, SeriesPlan};
use sed_core::field::{analytic_band_energy, autocorrelation_oracle, FieldError, FieldSpec, ModeModel, COMPONENT_VARIANCE_FACTOR};
use sed_core::runner::{config_for_seed, ensemble_seeds, run_trajectory, summarize, EnsembleSummary, RunError, RunRecord};

pub fn thread_pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool with a fixed thread count")
}

pub fn run_ensemble_parallel(
    config: &SimConfig,
    n_runs: u32,
    seed_base: u64,
    workers: usize,
) -> Result<EnsembleSummary, RunError> {
    if n_runs == 0 {
        return Err(RunError::EmptyEnsemble);
    }
    let seeds: Vec<u64> = ensemble_seeds(seed_base, n_runs).collect();
    let runs: Vec<RunRecord> = thread_pool(workers).install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                log::info!("run seed={seed} starting");
                let result = run_trajectory(config_for_seed(config, seed));
                if let Ok(out) = &result {
                    log::info!("run seed={seed} finished: {}", out.termination.as_str());
                }
                RunRecord { seed, result }
            })
            .collect()
    });
    summarize(config, runs)
}

/// Field-statistics experiment: dipole field over a band, many seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldStatsPlan {
    pub band: (f64, f64),
    pub n_modes: u32,
    pub realizations: u32,
    pub seed_base: u64,
    pub series: SeriesPlan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldStatsReport {
    pub plan: FieldStatsPlan,
    /// Per-component variance, averaged over realizations and time.
    pub variance: [f64; 3],
    /// `(4π/3)∫ρ dω` over the band.
    pub variance_oracle: f64,
    /// Per-component mean field.
    pub mean: [f64; 3],
    /// `(τ, C_empirical averaged over components, C_oracle)`.
    pub autocorrelation: Vec<(f64, f64, f64)>,
}

impl FieldStatsReport {
    pub fn worst_variance_error(&self) -> f64 {
        self.variance.iter().map(|v| (v / self.variance_oracle - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Largest autocorrelation deviation relative to `C(0)`.
    pub fn worst_autocorrelation_error(&self) -> f64 {
        let c0 = self.autocorrelation.first().map_or(1.0, |r| r.2);
        self.autocorrelation.iter().map(|&(_, e, o)| (e - o).abs() / c0).fold(0.0, f64::max)
    }
}

pub fn field_stats(plan: &FieldStatsPlan, workers: usize) -> Result<FieldStatsReport, FieldError> {
    let spec = FieldSpec {
        model: ModeModel::Dipole1d,
        n_modes: plan.n_modes,
        seed: plan.seed_base,
        planar: false,
        damping: None,
        box_lz: 1.0,
    };
    let seeds: Vec<u64> = (0..u64::from(plan.realizations)).map(|i| plan.seed_base.wrapping_add(i)).collect();
    let stats: Vec<RealizationStats> = thread_pool(workers).install(|| {
        seeds
            .par_iter()
            .map(|&seed| seeded_realization(&spec, plan.band, seed, &plan.series))
            .collect::<Result<_, _>>()
    })?;
    let avg = average(&stats).ok_or(FieldError::EmptyBand)?;
    let variance_oracle = COMPONENT_VARIANCE_FACTOR * analytic_band_energy(plan.band.0, plan.band.1)?;
    let mut autocorrelation = Vec::with_capacity(avg.lagged.len());
    for (lag, c) in avg.lagged.iter().enumerate() {
        let tau = lag as f64 * plan.series.dt;
        autocorrelation.push((tau, (c.x + c.y + c.z) / 3.0, autocorrelation_oracle(plan.band, tau)?));
    }
    Ok(FieldStatsReport {
        plan: *plan,
        variance: avg.mean_square.to_array(),
        variance_oracle,
        mean: avg.mean.to_array(),
        autocorrelation,
    })
}
