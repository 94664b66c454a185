//! Manifest-driven dataset ingestion and synthetic generation.
//!
//! A dataset on disk is a directory of delimiter-separated numeric files
//! (one row per time step, one column per channel, optional header line)
//! plus a JSON manifest naming the classes, the sensor columns to keep and
//! the rule that assigns a class to each file. Nothing is bundled: loaders
//! and manifests only. [`generate_synthetic`] produces a desk-scale
//! stand-in dataset with the same shape guarantees.

mod loader;
mod manifest;
mod synthetic;
mod writer;

pub use loader::{load_dataset, load_manifest, parse_manifest_str};
pub use manifest::{DatasetManifest, Delimiter, LabelRule, PathPattern};
pub use synthetic::{generate_synthetic, SyntheticParams};
pub use writer::write_dataset;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("manifest field `{0}` is missing or empty")]
    MissingField(String),
    #[error("column `{0}` appears more than once across sensor_columns/ignored_columns")]
    DuplicateColumn(String),
    #[error("label rule references unknown class `{0}`")]
    UnknownClassInLabelRule(String),
    #[error("manifest field `{field}` is invalid: {reason}")]
    InvalidManifest { field: String, reason: String },
    #[error("cannot read `{path}`: {reason}")]
    FileUnreadable { path: PathBuf, reason: String },
    #[error("non-numeric cell in `{path}` at row {row}, column {col}: `{token}`")]
    NonNumericCell {
        path: PathBuf,
        /// 1-based data row (header excluded).
        row: usize,
        /// 1-based column within the file.
        col: usize,
        token: String,
    },
    #[error("`{path}` has {actual} data rows, manifest expects {expected}")]
    RowCountMismatch {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },
    #[error("class `{class}` has {count} measurement(s); at least 2 are required")]
    TooFewSamplesPerClass { class: String, count: usize },
    #[error("`{path}` keeps only {rows} rows after injection start; at least 10 are required")]
    TooShortMeasurement { path: PathBuf, rows: usize },
    #[error("column `{column}` named by the manifest is missing in `{path}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("no files match pattern `{pattern}` under `{root}`")]
    NoFilesMatched { pattern: String, root: PathBuf },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("i/o error on `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// One recorded gas exposure: `T` time steps (after injection start) by
/// `S` sensors, all finite, with its class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub values: Matrix,
    pub label: usize,
    pub source_id: String,
    pub sampling_rate_hz: f64,
}

/// A manifest plus the measurements it selected.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub measurements: Vec<Measurement>,
}

impl Dataset {
    /// Enforce the dataset invariants: labels in range, at least two
    /// classes present, at least two measurements per present class, and
    /// every measurement the right width with T >= 10 and finite values.
    pub fn validate(&self) -> Result<(), DataError> {
        let class_count = self.manifest.class_names.len();
        if self.measurements.is_empty() {
            return Err(DataError::InvalidDataset("no measurements".into()));
        }
        let mut counts = vec![0usize; class_count];
        for m in &self.measurements {
            if m.label >= class_count {
                return Err(DataError::InvalidDataset(format!(
                    "label {} out of range for {} classes (source `{}`)",
                    m.label, class_count, m.source_id
                )));
            }
            counts[m.label] += 1;
            if m.values.cols() != self.manifest.sensor_columns.len() {
                return Err(DataError::InvalidDataset(format!(
                    "`{}` has {} columns, manifest names {} sensors",
                    m.source_id,
                    m.values.cols(),
                    self.manifest.sensor_columns.len()
                )));
            }
            if m.values.rows() < 10 {
                return Err(DataError::TooShortMeasurement {
                    path: PathBuf::from(&m.source_id),
                    rows: m.values.rows(),
                });
            }
            if !m.values.all_finite() {
                return Err(DataError::InvalidDataset(format!(
                    "`{}` contains non-finite values",
                    m.source_id
                )));
            }
        }
        let present: Vec<usize> = (0..class_count).filter(|&c| counts[c] > 0).collect();
        if present.len() < 2 {
            return Err(DataError::InvalidDataset(format!(
                "only {} class(es) present; at least 2 required",
                present.len()
            )));
        }
        for &c in &present {
            if counts[c] < 2 {
                return Err(DataError::TooFewSamplesPerClass {
                    class: self.manifest.class_names[c].clone(),
                    count: counts[c],
                });
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<usize> {
        self.measurements.iter().map(|m| m.label).collect()
    }

    /// Rows of the first measurement, or an error naming the offender if
    /// measurements disagree. Windowed runs require equal lengths.
    pub fn uniform_rows(&self) -> Result<usize, DataError> {
        let t = self.measurements[0].values.rows();
        for m in &self.measurements {
            if m.values.rows() != t {
                return Err(DataError::InvalidDataset(format!(
                    "measurements differ in length: `{}` has {} rows, `{}` has {}",
                    self.measurements[0].source_id,
                    t,
                    m.source_id,
                    m.values.rows()
                )));
            }
        }
        Ok(t)
    }
}

/// Per-class counts and shape facts, printable as a table or JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub classes: usize,
    pub per_class: BTreeMap<String, usize>,
    pub measurements: usize,
    pub t_min: usize,
    pub t_max: usize,
    pub sensors: usize,
    pub sampling_rate_hz: f64,
}

/// Summarize a valid dataset. Pure; errors only on invariant violations.
pub fn dataset_summary(ds: &Dataset) -> Result<DatasetSummary, DataError> {
    ds.validate()?;
    let mut per_class = BTreeMap::new();
    for name in &ds.manifest.class_names {
        per_class.insert(name.clone(), 0usize);
    }
    let mut t_min = usize::MAX;
    let mut t_max = 0usize;
    for m in &ds.measurements {
        *per_class
            .get_mut(&ds.manifest.class_names[m.label])
            .expect("validated label") += 1;
        t_min = t_min.min(m.values.rows());
        t_max = t_max.max(m.values.rows());
    }
    Ok(DatasetSummary {
        name: ds.manifest.name.clone(),
        classes: ds.manifest.class_names.len(),
        per_class,
        measurements: ds.measurements.len(),
        t_min,
        t_max,
        sensors: ds.manifest.sensor_columns.len(),
        sampling_rate_hz: ds.manifest.sampling_rate_hz,
    })
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dataset       {}", self.name)?;
        writeln!(f, "measurements  {}", self.measurements)?;
        let t = if self.t_min == self.t_max {
            self.t_min.to_string()
        } else {
            format!("{}..{}", self.t_min, self.t_max)
        };
        writeln!(f, "rows (T)      {t}")?;
        writeln!(f, "sensors (S)   {}", self.sensors)?;
        writeln!(f, "sampling      {} Hz", self.sampling_rate_hz)?;
        writeln!(f, "classes       {}", self.classes)?;
        let width = self
            .per_class
            .keys()
            .map(|k| k.len())
            .max()
            .unwrap_or(0)
            .max(5);
        for (name, count) in &self.per_class {
            writeln!(f, "  {name:<width$}  {count}")?;
        }
        Ok(())
    }
}
