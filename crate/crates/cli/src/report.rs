//! Artifact writing: results CSV, run manifest, optional SVG plot.
//!
//! All file I/O funnels through `write_artifacts`, the single writer of
//! the process. The CSV is a pure function of the run output and config
//! digest, so reruns of the same config are byte-identical; the wall time
//! and timestamp live only in the manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::{Outputs, Resolved};
use crate::runner::RunOutput;
use crate::svg;

pub const CSV_HEADER: &str =
    "experiment,config_digest,level,param,param_kind,samples,p,error,stderr,slope,slope_stderr,pass";

/// 17 significant digits: enough to round-trip any f64 exactly.
fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn cell_f(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn cell_u(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn cell_b(x: Option<bool>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn render_csv(out: &RunOutput, digest: &str) -> String {
    let mut s = String::with_capacity(256 * (out.rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for row in &out.rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            out.experiment,
            digest,
            row.level,
            cell_f(row.param),
            row.param_kind,
            cell_u(row.samples),
            cell_f(row.p),
            cell_f(row.error),
            cell_f(row.stderr),
            cell_f(row.slope),
            cell_f(row.slope_stderr),
            cell_b(row.pass),
        ));
    }
    s
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: &'a str,
    config: &'a Resolved,
    outputs: &'a Outputs,
    config_digest: &'a str,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    slope_stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bias_change: Option<f64>,
    wall_time_s: f64,
    timestamp_unix_s: u64,
}

pub struct WrittenPaths {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub svg: Option<PathBuf>,
}

pub fn write_artifacts(
    resolved: &Resolved,
    outputs: &Outputs,
    out: &RunOutput,
    digest: &str,
    wall: Duration,
) -> std::io::Result<WrittenPaths> {
    let dir = Path::new(&outputs.out);
    fs::create_dir_all(dir)?;

    let csv_path = dir.join(&outputs.csv);
    fs::write(&csv_path, render_csv(out, digest))?;

    let manifest = Manifest {
        tool: "spdelab",
        version: env!("CARGO_PKG_VERSION"),
        experiment: &out.experiment,
        config: resolved,
        outputs,
        config_digest: digest,
        pass: out.pass,
        slope: out.slope,
        slope_stderr: out.slope_stderr,
        bias_change: out.bias_change,
        wall_time_s: wall.as_secs_f64(),
        timestamp_unix_s: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let manifest_path = dir.join(&outputs.manifest);
    let mut body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    body.push('\n');
    fs::write(&manifest_path, body)?;

    let svg_path = match &outputs.svg {
        Some(name) if !out.points.is_empty() => {
            let path = dir.join(name);
            fs::write(&path, svg::render(out))?;
            Some(path)
        }
        _ => None,
    };

    Ok(WrittenPaths { csv: csv_path, manifest: manifest_path, svg: svg_path })
}
