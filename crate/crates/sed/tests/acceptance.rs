//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Every tolerance is pinned below.
//!
//! SED_SKIP_FULL_COLLAPSE=1 skips the 0.53 angstrom collapse run (a few minutes).

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;
use std::time::Instant;

use sed_core::config::{CutoffPolicy, FieldModel, ForceFlags, InitialState, Integrator, MovingCutoff, SimConfig};
use sed_core::diagnostics::{
    critical_l_monitor, detect_collapse, detect_ionization, Trace, TraceRow,
};
use sed_core::dynamics::{coulomb_force, rk4_step, rr_force_approx, State};
use sed_core::field::stats::SeriesPlan;
use sed_core::field::{sample_modes, FieldSpec, ModeModel};
use sed_core::orbit::{elements_from_state, kepler_propagate};
use sed_core::quad::integrate;
use sed_core::quantum::{degeneracy, energy_level, ground_state_radial_density};
use sed_core::rng::{GaussianStream, RngSpec};
use sed_core::runner::{run_trajectory, RunState};
use sed_core::units::{scaled_report, to_si, Dimension, ALPHA};
use sed_core::DVec3;
use sed_sim::cli::{collapse_benchmark, collapse_config, FULL_SCALE_R0};
use sed_sim::ensemble::{field_stats, run_ensemble_parallel, FieldStatsPlan};
use sed_sim::{output, snapshot};

// Criterion 1
const KEPLER_TOL: f64 = 1e-12;
const KEPLER_ORBITS: f64 = 1000.0;
const KEPLER_DRIFT: f64 = 1e-9;
// Criterion 2
const ORDER_RATIO: (f64, f64) = (12.0, 20.0);
// Criterion 3
const DESK_R0: f64 = 0.25;
const DESK_COLLAPSE_TOL: f64 = 0.05;
const PUBLISHED_COLLAPSE_S: f64 = 1.3e-11;
const FULL_COLLAPSE_TOL: f64 = 0.30;
// Criterion 4
const LARMOR_TOL: f64 = 1e-12;
// Criterion 5
const FIELD_BAND: (f64, f64) = (1.0, 10.0);
const FIELD_MODES: u32 = 10_000;
const FIELD_REALIZATIONS: u32 = 1000;
const FIELD_VARIANCE_TOL: f64 = 0.02;
const FIELD_AUTOCORR_TOL: f64 = 0.05;
// Criterion 6
const GAUSSIAN_DRAWS: usize = 100_000;
const GAUSSIAN_VARIANCE_TOL: f64 = 0.05;
// Criterion 7
const SED_SEEDS: u32 = 10;
const SED_MIN_SURVIVORS: usize = 7;
const SED_RADIUS_BAND: (f64, f64) = (0.1, 8.0);
const SED_MIN_IN_BAND: f64 = 0.99;
// Criterion 9
const QM_NORM_TOL: f64 = 1e-12;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn perihelion(ecc: f64) -> (DVec3, DVec3) {
    (DVec3::new(1.0 - ecc, 0.0, 0.0), DVec3::new(0.0, ((1.0 + ecc) / (1.0 - ecc)).sqrt(), 0.0))
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for ecc in [0.0, 0.5, 0.9] {
        let (r, v) = perihelion(ecc);
        let config = SimConfig {
            forces: ForceFlags::KEPLER,
            field_model: FieldModel::None,
            integrator: Integrator::AdaptiveRk4 { tol: KEPLER_TOL, dt_min: 1e-14 },
            initial_state: InitialState::Explicit { r, v },
            t_max: TAU * KEPLER_ORBITS,
            trace_stride: 1000,
            ..Default::default()
        };
        let out = run_trajectory(config).map_err(|e| e.to_string())?;
        let a = elements_from_state(&State::new(0.0, r, v), 1.0).unwrap();
        let b = elements_from_state(&out.final_state, 1.0).unwrap();
        let de = (b.energy / a.energy - 1.0).abs();
        let dl = (b.l() / a.l() - 1.0).abs();
        let dvec = (b.ecc_vector - a.ecc_vector).abs().max_element() / a.eccentricity.max(1.0);
        worst = worst.max(de).max(dl).max(dvec);
        parts.push(format!("e={ecc}: dE {de:.2e} dL {dl:.2e} de_vec {dvec:.2e}"));
    }
    check(worst < KEPLER_DRIFT, format!("{} (limit {KEPLER_DRIFT:e})", parts.join("; ")))
}

fn criterion_2() -> Outcome {
    let (r, v) = perihelion(0.5);
    let start = State::new(0.0, r, v);
    let exact = kepler_propagate(&start, 1.0, TAU).unwrap();
    let error = |n: usize| {
        let dt = TAU / n as f64;
        let mut s = start;
        for _ in 0..n {
            s = rk4_step(&s, dt, |s: &State| Ok::<_, ()>(coulomb_force(s.r, 1.0))).unwrap();
        }
        (s.r - exact.r).length() + (s.v - exact.v).length()
    };
    let errs: Vec<f64> = [250, 500, 1000].iter().map(|&n| error(n)).collect();
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    check(
        ratios.iter().all(|r| (ORDER_RATIO.0..=ORDER_RATIO.1).contains(r)),
        format!("errors {:.3e} {:.3e} {:.3e}, ratios {:.2} {:.2} in {ORDER_RATIO:?}", errs[0], errs[1], errs[2], ratios[0], ratios[1]),
    )
}

fn criterion_3() -> Outcome {
    let desk = collapse_benchmark(&collapse_config(SimConfig { trace_stride: 100_000, ..Default::default() }, DESK_R0).unwrap())
        .map_err(|e| e.to_string())?;
    let ratio = desk.ratio().ok_or("no collapse at r0 = 0.25")?;
    let mut detail = format!(
        "r0={DESK_R0}: measured {:.5e} a.u. vs r0^3/(4a^3) {:.5e}, ratio {ratio:.4}",
        desk.measured_au.unwrap(),
        desk.predicted_au
    );
    let mut ok = (ratio - 1.0).abs() <= DESK_COLLAPSE_TOL;
    if std::env::var_os("SED_SKIP_FULL_COLLAPSE").is_some() {
        detail.push_str("; full-scale run skipped");
    } else {
        let full = collapse_benchmark(
            &collapse_config(SimConfig { trace_stride: 100_000, ..Default::default() }, FULL_SCALE_R0).unwrap(),
        )
        .map_err(|e| e.to_string())?;
        let t_si = to_si(full.measured_au.ok_or("no collapse at 0.53 angstrom")?, Dimension::Time);
        let ratio_pub = t_si / PUBLISHED_COLLAPSE_S;
        let ratio_law = full.ratio().unwrap();
        ok &= (ratio_pub - 1.0).abs() <= FULL_COLLAPSE_TOL && (ratio_law - 1.0).abs() <= DESK_COLLAPSE_TOL;
        detail.push_str(&format!(
            "; r0={FULL_SCALE_R0:.4}: {t_si:.3e} s, {ratio_law:.4} x closed form, {ratio_pub:.3} x published 1.3e-11 s"
        ));
    }
    check(ok, detail)
}

fn criterion_4() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..=200 {
        let r = 0.1 * 100f64.powf(i as f64 / 200.0);
        for angle in [0.0, 1.0, 2.5] {
            let (s, c) = f64::sin_cos(angle);
            let pos = DVec3::new(r * c, r * s, 0.0);
            let vel = DVec3::new(-s, c, 0.0) * (1.0 / r).sqrt();
            let power = rr_force_approx(&State::new(0.0, pos, vel), 1.0).dot(vel);
            let larmor = -(2.0 * ALPHA.powi(3) / 3.0) / r.powi(4);
            worst = worst.max((power / larmor - 1.0).abs());
        }
    }
    check(worst <= LARMOR_TOL, format!("max relative deviation {worst:.2e} over r in [0.1, 10]"))
}

fn criterion_5() -> Outcome {
    let dt = 0.1;
    let plan = FieldStatsPlan {
        band: FIELD_BAND,
        n_modes: FIELD_MODES,
        realizations: FIELD_REALIZATIONS,
        seed_base: 1,
        series: SeriesPlan { t0: 0.0, dt, n_samples: 600, max_lag: (10.0 / FIELD_BAND.0 / dt).round() as usize },
    };
    let report = field_stats(&plan, 1).map_err(|e| e.to_string())?;
    let ve = report.worst_variance_error();
    let ae = report.worst_autocorrelation_error();
    check(
        ve <= FIELD_VARIANCE_TOL && ae <= FIELD_AUTOCORR_TOL,
        format!(
            "variance {:.5e} vs (4pi/3)∫rho {:.5e}: worst component error {ve:.2e}; autocorrelation worst |dC|/C(0) {ae:.2e} on tau in [0, {}]",
            report.variance.iter().sum::<f64>() / 3.0,
            report.variance_oracle,
            plan.series.max_lag as f64 * dt
        ),
    )
}

fn criterion_6() -> Outcome {
    // The amplitudes the field actually uses.
    let spec = FieldSpec { model: ModeModel::Dipole1d, n_modes: 20_000, seed: 11, planar: false, damping: None, box_lz: 1.0 };
    let modes = sample_modes(&spec, (1.0, 2.0)).map_err(|e| e.to_string())?;
    let draws: Vec<f64> = modes
        .modes
        .iter()
        .flat_map(|m| m.waves.iter().flat_map(|w| [w.amp_cos, w.amp_sin]))
        .take(GAUSSIAN_DRAWS)
        .collect();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let mean_limit = 4.0 / n.sqrt();
    check(
        draws.len() == GAUSSIAN_DRAWS && mean.abs() < mean_limit && (var - 1.0).abs() <= GAUSSIAN_VARIANCE_TOL,
        format!("N={} mean {mean:.2e} (limit {mean_limit:.2e}), variance {var:.4}", draws.len()),
    )
}

fn sed_config() -> SimConfig {
    SimConfig {
        z: 3,
        field_model: FieldModel::Dipole1d,
        cutoff: CutoffPolicy::Moving(MovingCutoff { multiple: 2.5, floor: 0.05, ceiling: 20.0 }),
        initial_state: InitialState::Circular { r0: 1.0 / 3.0 },
        t_max: TAU * 1000.0,
        ..Default::default()
    }
}

fn criterion_7() -> Outcome {
    let config = sed_config();
    assert_eq!(config.field.n_modes, 1000);
    let summary = run_ensemble_parallel(&config, SED_SEEDS, 1, 1).map_err(|e| e.to_string())?;
    let survivors = summary.completed().filter(|o| !o.collapsed() && !o.ionized()).count();
    let mut in_band = 0.0;
    let mut total = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for out in summary.completed() {
        for row in &out.trace.rows {
            total += row.dt_weight;
            if (SED_RADIUS_BAND.0..=SED_RADIUS_BAND.1).contains(&row.r) {
                in_band += row.dt_weight;
            }
            lo = lo.min(row.r);
            hi = hi.max(row.r);
        }
    }
    let frac = in_band / total;
    check(
        survivors >= SED_MIN_SURVIVORS && frac >= SED_MIN_IN_BAND,
        format!(
            "{survivors}/{SED_SEEDS} runs without collapse/ionization; time fraction in r in {SED_RADIUS_BAND:?}: {frac:.4}; sampled r in [{lo:.3}, {hi:.3}]; KS to ground state {:.3}",
            summary.ks_qm.unwrap_or(f64::NAN)
        ),
    )
}

// Brute-force references: literal scans over the definitions.
fn scan_ionization(rows: &[TraceRow], threshold: f64, dwell: f64) -> Option<f64> {
    (0..rows.len()).find_map(|i| {
        let t0 = rows[i].t;
        let mut covered = t0;
        for row in rows[i..].iter().take_while(|r| r.t < t0 + dwell) {
            if row.energy <= threshold {
                return None;
            }
            covered = row.t + row.dt_weight;
        }
        (covered - t0 >= dwell).then_some(t0)
    })
}

fn criterion_8() -> Outcome {
    let mut g = GaussianStream::new(RngSpec::new(2024, 8));
    let mut cases = 0;
    let mut ion_events = 0;
    let mut flags = 0;
    for case in 0..400 {
        let n = 50 + case % 250;
        let dt = 0.5;
        // E hovers around the threshold with persistent stretches; L and r wander.
        let mut e: f64 = -0.3;
        let mut l: f64 = 1.0;
        let mut r: f64 = 1.0;
        let rows: Vec<TraceRow> = (0..n)
            .map(|i| {
                e = (e + 0.03 * g.next_gaussian()).clamp(-0.6, 0.05);
                l = (l + 0.05 * g.next_gaussian()).clamp(0.0, 2.0);
                r = (r + 0.02 * g.next_gaussian()).clamp(0.0, 3.0);
                TraceRow { t: i as f64 * dt, r, energy: e, l, eccentricity: 0.0, dt_weight: dt }
            })
            .collect();
        let trace = Trace::from_rows(rows.clone()).unwrap();
        let dwell = dt * (1 + case % 30) as f64;
        let ion = detect_ionization(&trace, -0.05, dwell).t_event;
        if ion != scan_ionization(&rows, -0.05, dwell) {
            return Err(format!("ionization mismatch in case {case}"));
        }
        let col = detect_collapse(&trace, 0.05).t_event;
        if col != rows.iter().find(|x| x.r < 0.05).map(|x| x.t) {
            return Err(format!("collapse mismatch in case {case}"));
        }
        let v = critical_l_monitor(&trace, 0.588, -0.1);
        let below: f64 = rows.iter().filter(|x| x.l < 0.588).map(|x| x.dt_weight).sum::<f64>();
        let total: f64 = rows.iter().map(|x| x.dt_weight).sum();
        let first = rows.iter().find(|x| x.l < 0.588 && x.energy > -0.1).map(|x| x.t);
        if v.t_event != first || v.detail("fraction_below") != Some(below / total) {
            return Err(format!("critical-L mismatch in case {case}"));
        }
        ion_events += usize::from(ion.is_some());
        flags += usize::from(first.is_some());
        cases += 1;
    }
    check(
        ion_events > 20 && ion_events < cases && flags > 20,
        format!("{cases} synthetic series agree exactly ({ion_events} ionizations, {flags} critical-L flags)"),
    )
}

fn criterion_9() -> Outcome {
    let mut worst_norm: f64 = 0.0;
    for z in [1.0, 3.0] {
        let norm = integrate(|r| ground_state_radial_density(r, z).unwrap(), 0.0, 60.0 / z, 1e-14, 0.0);
        worst_norm = worst_norm.max((norm - 1.0).abs());
    }
    let e1: Vec<f64> = [1u32, 3].iter().map(|&z| scaled_report(energy_level(1, f64::from(z)).unwrap(), z, Dimension::Energy)).collect();
    let degen_ok = (1..=5u32).all(|n| degeneracy(n).unwrap() == u64::from(n * n));
    check(
        worst_norm <= QM_NORM_TOL && e1.iter().all(|&e| e == -0.5) && degen_ok,
        format!("|∫P dr − 1| = {worst_norm:.1e}; scaled E1 for Z=1,3: {e1:?}; degeneracy n^2 for n<=5: {degen_ok}"),
    )
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(dir).unwrap().display().to_string(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = SimConfig { t_max: TAU * 50.0, steps_per_orbit: 1000, ..sed_config() };
    let mut dirs = Vec::new();
    for workers in [1, 4] {
        let summary = run_ensemble_parallel(&config, 4, 100, workers).map_err(|e| e.to_string())?;
        let d = tmp.path().join(format!("workers_{workers}"));
        output::write_ensemble(&d, &summary).map_err(|e| e.to_string())?;
        dirs.push(dir_bytes(&d));
    }
    let workers_equal = dirs[0] == dirs[1] && !dirs[0].is_empty();

    let single = SimConfig { seed: 100, ..config };
    let straight = run_trajectory(single).map_err(|e| e.to_string())?;
    let mut run = RunState::new(single).map_err(|e| e.to_string())?;
    run.run_until(TAU * 21.0);
    let bytes = snapshot::encode(&run);
    let mut resumed = snapshot::decode(&bytes).map_err(|e| e.to_string())?;
    resumed.run_to_end();
    let resumed = resumed.into_output();
    let a = tmp.path().join("straight");
    let b = tmp.path().join("resumed");
    output::write_run(&a, &straight).map_err(|e| e.to_string())?;
    output::write_run(&b, &resumed).map_err(|e| e.to_string())?;
    let resume_equal = dir_bytes(&a) == dir_bytes(&b);
    check(
        workers_equal && resume_equal,
        format!(
            "ensemble dirs at 1 and 4 workers identical: {workers_equal} ({} files); checkpoint at t={:.1} and resume identical: {resume_equal}",
            dirs[0].len(),
            run.time()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Kepler conservation", criterion_1),
        ("integrator order", criterion_2),
        ("collapse benchmark", criterion_3),
        ("Larmor consistency", criterion_4),
        ("field statistics", criterion_5),
        ("Gaussian amplitudes", criterion_6),
        ("short-horizon SED stability", criterion_7),
        ("detector correctness", criterion_8),
        ("QM reference", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({secs:.1} s) {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({secs:.1} s) {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
