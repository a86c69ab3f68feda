//! Output directories: config echo, trace and histogram CSVs, verdict and
//! metric JSON.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use sed_core::diagnostics::{DetectorVerdict, Trace, TraceRow, WeightedHistogram};
use sed_core::runner::{EnsembleSummary, Percentiles, RunOutput, Termination};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::config_file;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("output directory {0} exists and is not empty")]
    NotEmpty(PathBuf),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> OutputError + '_ {
    move |source| OutputError::Csv { path: path.to_path_buf(), source }
}

/// Creates `dir`, or accepts it if it exists and is empty.
pub fn prepare_dir(dir: &Path) -> Result<(), OutputError> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(io_err(dir))?;
        if entries.next().is_some() {
            return Err(OutputError::NotEmpty(dir.to_path_buf()));
        }
        Ok(())
    } else {
        fs::create_dir_all(dir).map_err(io_err(dir))
    }
}

/// Round-trip float formatting.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn json_num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn write_text(path: &Path, text: &str) -> Result<(), OutputError> {
    fs::write(path, text).map_err(io_err(path))
}

fn write_json(path: &Path, value: &Value) -> Result<(), OutputError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    write_text(path, &text)
}

pub const TRACE_HEADER: [&str; 6] = ["t", "r", "E", "L", "ecc", "dt"];

pub fn write_trace(path: &Path, trace: &Trace, seed: Option<u64>) -> Result<(), OutputError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    if let Some(seed) = seed {
        writeln!(out, "# seed={seed}").map_err(io_err(path))?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER).map_err(csv_err(path))?;
    for row in &trace.rows {
        w.write_record([row.t, row.r, row.energy, row.l, row.eccentricity, row.dt_weight].map(num))
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_trace(path: &Path) -> Result<Trace, OutputError> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(csv_err(path))?;
    let headers = reader.headers().map_err(csv_err(path))?.clone();
    if headers.iter().collect::<Vec<_>>() != TRACE_HEADER {
        return Err(OutputError::Format { path: path.into(), message: format!("expected header {}", TRACE_HEADER.join(",")) });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let mut vals = [0.0; 6];
        for (j, v) in vals.iter_mut().enumerate() {
            *v = record.get(j).and_then(|s| s.trim().parse().ok()).ok_or_else(|| OutputError::Format {
                path: path.into(),
                message: format!("row {}: column {} is not a number", i + 2, TRACE_HEADER[j]),
            })?;
        }
        let [t, r, energy, l, eccentricity, dt_weight] = vals;
        rows.push(TraceRow { t, r, energy, l, eccentricity, dt_weight });
    }
    Trace::from_rows(rows).map_err(|e| OutputError::Format { path: path.into(), message: e.to_string() })
}

pub fn write_histogram(path: &Path, hist: &WeightedHistogram) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["edge_lo", "edge_hi", "density"]).map_err(csv_err(path))?;
    for (e, d) in hist.edges.windows(2).zip(hist.density()) {
        w.write_record([num(e[0]), num(e[1]), num(d)]).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn verdict_json(v: &DetectorVerdict) -> Value {
    let thresholds: Map<String, Value> = v.details.iter().map(|&(k, x)| (k.to_string(), json_num(x))).collect();
    json!({
        "kind": v.kind.as_str(),
        "t_event": v.t_event.map_or(Value::Null, json_num),
        "thresholds": thresholds,
    })
}

fn termination_json(t: &Termination) -> Value {
    let mut m = Map::new();
    m.insert("reason".into(), Value::from(t.as_str()));
    match *t {
        Termination::Stiffness { t, dt } => {
            m.insert("t".into(), json_num(t));
            m.insert("dt".into(), json_num(dt));
        }
        Termination::FieldFailure { t } => {
            m.insert("t".into(), json_num(t));
        }
        _ => {}
    }
    Value::Object(m)
}

pub fn verdicts_json(out: &RunOutput) -> Value {
    json!({
        "seed": out.config.seed,
        "verdicts": out.verdicts.iter().map(verdict_json).collect::<Vec<_>>(),
        "termination": termination_json(&out.termination),
    })
}

pub fn metrics_json(out: &RunOutput) -> Value {
    let m = &out.metrics;
    json!({
        "seed": out.config.seed,
        "steps": m.steps,
        "rejected_steps": m.rejected_steps,
        "windows": m.windows,
        "band_changes": m.band_changes,
        "cache_builds": m.cache_builds,
        "trace_rows": out.trace.len(),
        "t_final": json_num(sed_core::units::scaled_report(out.final_state.t, out.config.z, sed_core::units::Dimension::Time)),
        "final_band": out.final_band.map_or(Value::Null, |(lo, hi)| json!([json_num(lo), json_num(hi)])),
    })
}

/// Writes a complete run directory (which must be new or empty).
pub fn write_run(dir: &Path, out: &RunOutput) -> Result<(), OutputError> {
    prepare_dir(dir)?;
    write_text(&dir.join("config.txt"), &config_file::echo(&out.config))?;
    write_trace(&dir.join("trace.csv"), &out.trace, Some(out.config.seed))?;
    write_histogram(&dir.join("hist_r.csv"), &out.hist_r)?;
    write_histogram(&dir.join("hist_L.csv"), &out.hist_l)?;
    write_json(&dir.join("verdicts.json"), &verdicts_json(out))?;
    write_json(&dir.join("metrics.json"), &metrics_json(out))
}

fn percentiles_json(p: &Option<Percentiles>) -> Value {
    p.map_or(Value::Null, |p| json!({"p05": json_num(p.p05), "p50": json_num(p.p50), "p95": json_num(p.p95)}))
}

pub fn summary_json(summary: &EnsembleSummary) -> Value {
    let runs: Vec<Value> = summary
        .runs
        .iter()
        .map(|r| match &r.result {
            Ok(out) => json!({
                "seed": r.seed,
                "verdicts": out.verdicts.iter().map(verdict_json).collect::<Vec<_>>(),
                "termination": termination_json(&out.termination),
            }),
            Err(e) => json!({"seed": r.seed, "error": e.to_string()}),
        })
        .collect();
    json!({
        "runs": runs,
        "ks_qm_radial": summary.ks_qm.map_or(Value::Null, json_num),
        "energy": percentiles_json(&summary.energy),
        "eccentricity": percentiles_json(&summary.eccentricity),
        "radius": percentiles_json(&summary.radius),
    })
}

/// Per-run subdirectories `run_<seed>/` plus pooled histograms and `summary.json`.
pub fn write_ensemble(dir: &Path, summary: &EnsembleSummary) -> Result<(), OutputError> {
    prepare_dir(dir)?;
    for run in &summary.runs {
        if let Ok(out) = &run.result {
            write_run(&dir.join(format!("run_{}", run.seed)), out)?;
        }
    }
    write_histogram(&dir.join("hist_r.csv"), &summary.pooled_r)?;
    write_histogram(&dir.join("hist_L.csv"), &summary.pooled_l)?;
    write_json(&dir.join("summary.json"), &summary_json(summary))
}

pub fn write_json_file(path: &Path, value: &Value) -> Result<(), OutputError> {
    write_json(path, value)
}

pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row.into_iter().map(num)).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_round_trips_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            TraceRow { t: 0.0, r: 1.0 / 3.0, energy: -0.5, l: 1.0, eccentricity: 1e-17, dt_weight: 0.1 },
            TraceRow { t: 0.1, r: 2.0, energy: -1e-300, l: 0.7, eccentricity: 0.5, dt_weight: 0.2 },
        ];
        let trace = Trace::from_rows(rows).unwrap();
        let path = dir.path().join("trace.csv");
        write_trace(&path, &trace, Some(42)).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# seed=42\nt,r,E,L,ecc,dt\n"));
        assert_eq!(read_trace(&path).unwrap().rows, trace.rows);
    }

    #[test]
    fn non_empty_dir_rejected() {
        let dir = tempfile::tempdir().unwrap();
        prepare_dir(dir.path()).unwrap();
        fs::write(dir.path().join("x"), "1").unwrap();
        assert!(matches!(prepare_dir(dir.path()), Err(OutputError::NotEmpty(_))));
        prepare_dir(&dir.path().join("new/nested")).unwrap();
    }
}
