//! File formats the workbench emits: trajectory/particle/field CSV and
//! metrics/comparison JSON.
//!
//! Floats are written with the shortest representation that parses back to
//! the identical value, so emit/parse round trips are exact and output bytes
//! are reproducible across runs and thread counts.

use anyhow::{bail, Context, Result};
use cida_core::{ComparisonReport, ControlVec, RunMetrics, StateVec, TrajectoryRow};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Bumped whenever a JSON document layout changes incompatibly.
pub const SCHEMA_VERSION: u32 = 1;

pub const TRAJECTORY_HEADER: &str = "k,x,y,theta,xhat,yhat,thetahat,omega,violated";
pub const PARTICLES_HEADER: &str = "k,j,x,y,theta";
pub const FIELD_HEADER: &str = "x,y,theta_d,theta_star,note";

/// Envelope around one run's metrics.
#[derive(Serialize, Deserialize)]
pub struct MetricsDocument {
    pub schema_version: u32,
    pub run: RunMetrics,
}

/// Envelope around a paired comparison report.
#[derive(Serialize, Deserialize)]
pub struct CompareDocument {
    pub schema_version: u32,
    pub report: ComparisonReport,
}

/// One row of the guidance-field export. `theta_d` is the raw field heading
/// and `theta_star` the safety-filtered one; unavailable values are NaN with
/// the reason in `note` (`origin`, `inside_obstacle`, or a filter error).
#[derive(Clone, Debug)]
pub struct FieldRow {
    pub x: f64,
    pub y: f64,
    pub theta_d: f64,
    pub theta_star: f64,
    pub note: String,
}

pub fn trajectory_csv(metrics: &RunMetrics) -> Result<String> {
    let mut out = String::with_capacity(64 * (metrics.trajectory.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for row in &metrics.trajectory {
        if row.state.dim() != 3 || row.control.dim() != 1 {
            bail!("trajectory export expects planar states and a scalar turn rate");
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.k,
            row.state[0],
            row.state[1],
            row.state[2],
            row.estimate[0],
            row.estimate[1],
            row.estimate[2],
            row.control[0],
            u8::from(row.violated),
        )
        .expect("string writes are infallible");
    }
    Ok(out)
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TRAJECTORY_HEADER => {}
        other => bail!("bad trajectory header: {other:?}"),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            bail!("trajectory line {}: expected 9 fields, got {}", i + 2, fields.len());
        }
        let num = |j: usize| -> Result<f64> {
            fields[j]
                .parse::<f64>()
                .with_context(|| format!("trajectory line {}, field {}", i + 2, j + 1))
        };
        let violated = match fields[8] {
            "0" => false,
            "1" => true,
            other => bail!("trajectory line {}: bad violated flag {other:?}", i + 2),
        };
        rows.push(TrajectoryRow {
            k: fields[0].parse().with_context(|| format!("trajectory line {}", i + 2))?,
            state: StateVec::new(vec![num(1)?, num(2)?, num(3)?])?,
            estimate: StateVec::new(vec![num(4)?, num(5)?, num(6)?])?,
            control: ControlVec::new(vec![num(7)?])?,
            violated,
        });
    }
    Ok(rows)
}

pub fn particles_csv(clouds: &[Vec<StateVec>]) -> Result<String> {
    let total: usize = clouds.iter().map(Vec::len).sum();
    let mut out = String::with_capacity(32 * (total + 1));
    out.push_str(PARTICLES_HEADER);
    out.push('\n');
    for (k, cloud) in clouds.iter().enumerate() {
        for (j, p) in cloud.iter().enumerate() {
            if p.dim() != 3 {
                bail!("particle export expects planar states");
            }
            writeln!(out, "{},{},{},{},{}", k, j, p[0], p[1], p[2])
                .expect("string writes are infallible");
        }
    }
    Ok(out)
}

pub fn field_csv(rows: &[FieldRow]) -> String {
    let mut out = String::with_capacity(48 * (rows.len() + 1));
    out.push_str(FIELD_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.x, r.y, r.theta_d, r.theta_star, r.note)
            .expect("string writes are infallible");
    }
    out
}

pub fn metrics_json(metrics: &RunMetrics) -> Result<String> {
    let doc = MetricsDocument { schema_version: SCHEMA_VERSION, run: metrics.clone() };
    serde_json::to_string(&doc).context("cannot serialize metrics")
}

pub fn compare_json(report: &ComparisonReport) -> Result<String> {
    let doc = CompareDocument { schema_version: SCHEMA_VERSION, report: report.clone() };
    serde_json::to_string_pretty(&doc).context("cannot serialize comparison report")
}

/// Writes `contents` to `path`, creating parent directories as needed.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("cannot create directory {}", parent.display()))?;
        }
    }
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}
