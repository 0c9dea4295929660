//! File formats and structured output records.
//!
//! Two formats cross the tool boundary:
//!
//! * **Samples files** — CSV with a mandatory header naming the columns
//!   `R_1..R_N` (rates, Kbits) followed by `D_1..D_k` (distortions,
//!   percent). Rows are one measurement each.
//! * **Structured records** — JSON objects (surfaces, allocations, Pareto
//!   reports, weights) carrying a `schema_version`; readers reject any
//!   major version they do not understand.
//!
//! All numbers are written in round-trip-safe decimal text.

use crate::error::{CliError, CliResult};
use rdalloc_core::fit::MeasuredSample;
use rdalloc_core::model::{DistortionSurface, RateVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: &str = "1.0";

/// Rejects schema versions whose major component differs from ours.
pub fn check_schema(version: &str) -> CliResult<()> {
    let ours = SCHEMA_VERSION.split('.').next().unwrap();
    let theirs = version.split('.').next().unwrap_or("");
    if theirs != ours {
        return Err(CliError::validation(format!(
            "unsupported schema version {version} (expected major {ours})"
        )));
    }
    Ok(())
}

/// One fitted (or ground-truth) surface, with optional fit metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceRecord {
    pub gamma: f64,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_squared: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples_used: Option<usize>,
}

/// Per-task surface parameters of one system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceFile {
    pub schema_version: String,
    pub n_streams: usize,
    pub n_tasks: usize,
    pub surfaces: Vec<SurfaceRecord>,
}

impl SurfaceFile {
    pub fn from_surfaces(surfaces: &[DistortionSurface]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            n_streams: surfaces[0].n_streams(),
            n_tasks: surfaces.len(),
            surfaces: surfaces
                .iter()
                .map(|s| SurfaceRecord {
                    gamma: s.gamma(),
                    alphas: s.alphas().to_vec(),
                    betas: s.betas().to_vec(),
                    r_squared: None,
                    n_samples_used: None,
                })
                .collect(),
        }
    }

    /// Validates the records into domain surfaces.
    pub fn to_surfaces(&self) -> CliResult<Vec<DistortionSurface>> {
        check_schema(&self.schema_version)?;
        if self.surfaces.len() != self.n_tasks {
            return Err(CliError::validation(format!(
                "surface file declares {} tasks but carries {} records",
                self.n_tasks,
                self.surfaces.len()
            )));
        }
        let surfaces: Vec<DistortionSurface> = self
            .surfaces
            .iter()
            .map(|r| DistortionSurface::new(r.gamma, r.alphas.clone(), r.betas.clone()))
            .collect::<Result<_, _>>()?;
        for s in &surfaces {
            if s.n_streams() != self.n_streams {
                return Err(CliError::validation(format!(
                    "surface file declares {} streams but a record has {}",
                    self.n_streams,
                    s.n_streams()
                )));
            }
        }
        Ok(surfaces)
    }
}

pub fn read_surface_file(path: &Path) -> CliResult<SurfaceFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    let file: SurfaceFile = serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("malformed surface file: {e}")))?;
    Ok(file)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::validation(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// Reads a samples CSV; returns the samples plus `(n_streams, n_tasks)`.
pub fn read_samples(path: &Path) -> CliResult<(Vec<MeasuredSample>, usize, usize)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::validation(format!("malformed header: {e}")))?
        .clone();

    let names: Vec<&str> = headers.iter().collect();
    let n_streams = names.iter().take_while(|h| h.starts_with("R_")).count();
    let n_tasks = names.len() - n_streams;
    if n_streams == 0 || n_tasks == 0 {
        return Err(CliError::validation(
            "header must name columns R_1..R_N followed by D_1..D_k".to_string(),
        ));
    }
    for (i, name) in names.iter().enumerate() {
        let expected = if i < n_streams {
            format!("R_{}", i + 1)
        } else {
            format!("D_{}", i - n_streams + 1)
        };
        if *name != expected {
            return Err(CliError::validation(format!(
                "unexpected column {i}: got {name:?}, expected {expected:?}"
            )));
        }
    }

    let mut samples = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| CliError::validation(format!("malformed row {}: {e}", row_idx + 1)))?;
        if record.len() != names.len() {
            return Err(CliError::validation(format!(
                "row {} has {} fields, expected {}",
                row_idx + 1,
                record.len(),
                names.len()
            )));
        }
        let mut values = Vec::with_capacity(record.len());
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::validation(format!(
                    "row {} column {}: not a number: {field:?}",
                    row_idx + 1,
                    names[col]
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::validation(format!(
                    "row {} column {}: value must be finite",
                    row_idx + 1,
                    names[col]
                )));
            }
            values.push(v);
        }
        let rates = &values[..n_streams];
        if rates.iter().any(|&r| r < 0.0) {
            return Err(CliError::validation(format!("invalid rate in row {}", row_idx + 1)));
        }
        let distortions = &values[n_streams..];
        if distortions.iter().any(|&d| d < 0.0) {
            return Err(CliError::validation(format!(
                "invalid distortion in row {}",
                row_idx + 1
            )));
        }
        samples.push(MeasuredSample::new(
            RateVector::new(rates.to_vec())?,
            distortions.to_vec(),
        )?);
    }
    if samples.is_empty() {
        return Err(CliError::degenerate("samples file has no data rows".to_string()));
    }
    Ok((samples, n_streams, n_tasks))
}

pub fn write_samples(path: &Path, samples: &[MeasuredSample]) -> CliResult<()> {
    let n_streams = samples[0].rates().len();
    let n_tasks = samples[0].distortions().len();
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?;
    let mut header = Vec::new();
    for j in 0..n_streams {
        header.push(format!("R_{}", j + 1));
    }
    for i in 0..n_tasks {
        header.push(format!("D_{}", i + 1));
    }
    writer
        .write_record(&header)
        .map_err(|e| CliError::validation(format!("write failed: {e}")))?;
    for s in samples {
        let mut row: Vec<String> = s.rates().rates().iter().map(|v| v.to_string()).collect();
        row.extend(s.distortions().iter().map(|v| v.to_string()));
        writer
            .write_record(&row)
            .map_err(|e| CliError::validation(format!("write failed: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| CliError::validation(format!("write failed: {e}")))?;
    Ok(())
}

/// Result record of an `allocate` invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AllocationRecord {
    pub schema_version: String,
    pub method: String,
    pub total_rate: f64,
    pub weights: Vec<f64>,
    pub rates: Vec<f64>,
    /// Water level `log2(lambda)`; absent for baseline methods.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub water_level_log2: Option<f64>,
    /// Streams with positive rate; absent for baseline methods.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub active_set: Option<Vec<usize>>,
    pub per_task_distortions: Vec<f64>,
    pub scalarized_distortion: f64,
}

/// Result record of a `weights-inverse` invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightsRecord {
    pub schema_version: String,
    pub mean_distortions: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Segment section of a Pareto report (2-stream systems).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentReport {
    pub endpoint_low: Vec<f64>,
    pub endpoint_high: Vec<f64>,
    pub per_task_minimizers: Vec<Vec<f64>>,
    pub degenerate: bool,
}

/// Bound section of a Pareto report (3-stream 2-task systems).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub rate_mins: Vec<f64>,
    pub rate_maxs: Vec<f64>,
    pub polygon_vertex_count: usize,
    pub polygon_vertices: Vec<Vec<f64>>,
}

/// Top-level record of a `pareto` invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParetoReport {
    pub schema_version: String,
    pub shape: String,
    pub n_streams: usize,
    pub n_tasks: usize,
    pub total_rate: f64,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segment: Option<SegmentReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub rates_table: String,
    pub distortions_table: String,
}

/// Writes a labeled plot-data table: a `kind` column followed by numeric
/// columns.
pub fn write_plot_table(
    path: &Path,
    value_headers: &[String],
    rows: &[(String, Vec<f64>)],
) -> CliResult<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?;
    let mut header = vec!["kind".to_string()];
    header.extend(value_headers.iter().cloned());
    writer
        .write_record(&header)
        .map_err(|e| CliError::validation(format!("write failed: {e}")))?;
    for (kind, values) in rows {
        let mut row = vec![kind.clone()];
        row.extend(values.iter().map(|v| v.to_string()));
        writer
            .write_record(&row)
            .map_err(|e| CliError::validation(format!("write failed: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| CliError::validation(format!("write failed: {e}")))?;
    Ok(())
}
