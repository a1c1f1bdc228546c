//! Output files: the per-step trace, run metrics and the run manifest.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{relative_error_channels, RunMetrics, RunOutput, ScenarioConfig, Seeds, TraceRecord};

pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const TRACE_HEADER: [&str; 31] = [
    "t", "u", "v", "r", "u_m", "v_m", "r_m", "u_hat", "v_hat", "r_hat", "x", "y", "psi", "tau_d1", "tau_d2",
    "tau_d3", "tau_hat1", "tau_hat2", "tau_hat3", "z1", "z2", "z3", "zr1", "zr2", "zr3", "zeta1", "zeta2",
    "zeta3", "p11", "p22", "p33",
];

/// Writes the trace as CSV. Floats use the shortest decimal form that parses
/// back to the same bits; an undefined relative error is written as `NaN`.
pub fn write_trace<W: Write>(out: W, trace: &[TraceRecord]) -> Result<()> {
    let zr = relative_error_channels(trace);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    let mut row: Vec<String> = Vec::with_capacity(TRACE_HEADER.len());
    for (k, r) in trace.iter().enumerate() {
        row.clear();
        let mut push = |xs: &[f64]| row.extend(xs.iter().map(|x| x.to_string()));
        push(&[r.t]);
        push(&r.nu.to_array());
        push(&r.nu_measured.to_array());
        push(&r.nu_filtered.to_array());
        push(&r.eta.to_array());
        push(&r.tau_d.to_array());
        push(&r.tau_hat.to_array());
        push(&r.z);
        push(&zr.clone().map(|c| c.map_or(f64::NAN, |s| s[k])));
        push(&r.zeta);
        push(&r.p_diag);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_field(rec: &csv::StringRecord, i: usize, line: usize) -> Result<f64> {
    let s = rec
        .get(i)
        .ok_or_else(|| Error::Trace(format!("row {line}: missing column {}", TRACE_HEADER[i])))?;
    s.parse().map_err(|_| {
        Error::Trace(format!(
            "row {line}: bad value {s:?} in column {}",
            TRACE_HEADER[i]
        ))
    })
}

/// Parses a trace written by [`write_trace`]. The relative-error columns are
/// derived data and are not read back.
pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::Trace(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let f = |i| parse_field(&rec, i, line + 1);
        let tri = |i: usize| -> Result<[f64; 3]> { Ok([f(i)?, f(i + 1)?, f(i + 2)?]) };
        out.push(TraceRecord {
            t: f(0)?,
            nu: tri(1)?.into(),
            nu_measured: tri(4)?.into(),
            nu_filtered: tri(7)?.into(),
            eta: tri(10)?.into(),
            tau_d: tri(13)?.into(),
            tau_hat: tri(16)?.into(),
            z: tri(19)?,
            zeta: tri(25)?,
            p_diag: tri(28)?,
        });
    }
    Ok(out)
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub config: ScenarioConfig,
    pub seeds: Seeds,
    pub version: String,
    pub runtime_seconds: f64,
    pub files: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(config: &ScenarioConfig, runtime_seconds: f64, files: Vec<PathBuf>) -> Self {
        Self {
            config: config.clone(),
            seeds: config.seeds,
            version: env!("CARGO_PKG_VERSION").to_string(),
            runtime_seconds,
            files,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn metrics_json(metrics: &RunMetrics) -> Result<String> {
    Ok(serde_json::to_string_pretty(metrics)?)
}

/// Writes trace, metrics and manifest into `dir`; returns the three paths.
pub fn emit(
    dir: &Path,
    cfg: &ScenarioConfig,
    output: &RunOutput,
    runtime_seconds: f64,
) -> Result<[PathBuf; 3]> {
    fs::create_dir_all(dir)?;
    let paths = [
        dir.join(TRACE_FILE),
        dir.join(METRICS_FILE),
        dir.join(MANIFEST_FILE),
    ];

    let mut csv_bytes = Vec::new();
    write_trace(&mut csv_bytes, &output.trace)?;
    write_atomic(&paths[0], &csv_bytes)?;
    write_atomic(&paths[1], metrics_json(&output.metrics)?.as_bytes())?;

    let files = [TRACE_FILE, METRICS_FILE].map(PathBuf::from).to_vec();
    let manifest = RunManifest::new(cfg, runtime_seconds, files);
    write_atomic(&paths[2], serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(paths)
}

/// Reads either a bare scenario document or a manifest written by [`emit`].
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("config").is_some() && value.get("version").is_some() {
        let m: RunManifest = serde_json::from_value(value)?;
        if m.seeds != m.config.seeds {
            return Err(Error::SeedMismatch(format!(
                "manifest seeds {:?} differ from its config {:?}",
                m.seeds, m.config.seeds
            )));
        }
        Ok(m.config)
    } else {
        ScenarioConfig::from_json(&text)
    }
}
