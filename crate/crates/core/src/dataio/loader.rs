//! Manifest parsing and measurement-file loading.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::manifest::{glob_match, DatasetManifest, Delimiter, LabelRule};
use super::{DataError, Dataset, Measurement};
use crate::matrix::Matrix;

/// Parse and validate a manifest file.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, DataError> {
    let text = fs::read_to_string(path).map_err(|e| DataError::FileUnreadable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_manifest_str(&text)
}

/// Parse a manifest from JSON text. Missing or empty required keys are
/// reported as [`DataError::MissingField`] naming the key.
pub fn parse_manifest_str(text: &str) -> Result<DatasetManifest, DataError> {
    let value: Value = serde_json::from_str(text).map_err(|e| DataError::InvalidManifest {
        field: "<document>".into(),
        reason: e.to_string(),
    })?;
    let obj = value.as_object().ok_or_else(|| DataError::InvalidManifest {
        field: "<document>".into(),
        reason: "manifest must be a JSON object".into(),
    })?;
    for key in [
        "name",
        "class_names",
        "sensor_columns",
        "sampling_rate_hz",
        "file_pattern",
        "label_rule",
    ] {
        match obj.get(key) {
            None | Some(Value::Null) => return Err(DataError::MissingField(key.into())),
            Some(Value::Array(a)) if a.is_empty() => {
                return Err(DataError::MissingField(key.into()))
            }
            Some(Value::String(s)) if s.is_empty() => {
                return Err(DataError::MissingField(key.into()))
            }
            _ => {}
        }
    }
    let manifest: DatasetManifest =
        serde_json::from_value(value).map_err(|e| DataError::InvalidManifest {
            field: "<document>".into(),
            reason: e.to_string(),
        })?;
    manifest.validate()?;
    Ok(manifest)
}

/// Load every measurement selected by the manifest under `root`.
///
/// Files are visited in sorted relative-path order; rows before
/// `injection_start_index` are dropped; columns are reordered to the
/// manifest's `sensor_columns` order. The returned dataset satisfies all
/// dataset invariants or an error is raised.
pub fn load_dataset(manifest: &DatasetManifest, root: &Path) -> Result<Dataset, DataError> {
    manifest.validate()?;
    let files = matching_files(root, &manifest.file_pattern)?;
    let mut measurements = Vec::new();
    for rel in &files {
        let path = root.join(rel);
        match &manifest.label_rule {
            LabelRule::PathPatterns(patterns) => {
                let Some(label) = patterns.iter().find_map(|p| {
                    glob_match(&p.pattern, rel).then(|| manifest.class_index(&p.class))
                }) else {
                    continue; // not covered by this manifest's classes
                };
                let label = label.expect("validated label rule");
                let table = read_table(&path, manifest, None)?;
                measurements.push(table_to_measurement(
                    table.sensor_rows,
                    label,
                    rel.clone(),
                    &path,
                    manifest,
                )?);
            }
            LabelRule::LabelColumn { column } => {
                let table = read_table(&path, manifest, Some(column))?;
                let labels = table.labels.expect("label column requested");
                for (g, (label, rows)) in group_runs(&labels, table.sensor_rows).enumerate() {
                    measurements.push(table_to_measurement(
                        rows,
                        label,
                        format!("{rel}#g{g}"),
                        &path,
                        manifest,
                    )?);
                }
            }
        }
    }
    let dataset = Dataset {
        manifest: manifest.clone(),
        measurements,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Relative paths under `root` matching `pattern`, sorted.
fn matching_files(root: &Path, pattern: &str) -> Result<Vec<String>, DataError> {
    let mut all = Vec::new();
    walk(root, root, &mut all)?;
    let mut matched: Vec<String> = all
        .into_iter()
        .filter(|rel| glob_match(pattern, rel))
        .collect();
    matched.sort();
    if matched.is_empty() {
        return Err(DataError::NoFilesMatched {
            pattern: pattern.to_string(),
            root: root.to_path_buf(),
        });
    }
    Ok(matched)
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<(), DataError> {
    let entries = fs::read_dir(dir).map_err(|e| DataError::FileUnreadable {
        path: dir.to_path_buf(),
        reason: e.to_string(),
    })?;
    for entry in entries {
        let entry = entry.map_err(|e| DataError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let path = entry.path();
        if path.is_dir() {
            walk(root, &path, out)?;
        } else {
            let rel = path
                .strip_prefix(root)
                .expect("walk stays under root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            out.push(rel);
        }
    }
    Ok(())
}

struct Table {
    /// One entry per data row, each in manifest sensor order.
    sensor_rows: Vec<Vec<f64>>,
    /// Class index per row, when a label column was requested.
    labels: Option<Vec<usize>>,
}

/// Read one delimiter-separated file: detect the delimiter, detect an
/// optional header line, resolve manifest column names to file positions
/// (positional names `c0..cN` when there is no header), and parse cells.
fn read_table(
    path: &Path,
    manifest: &DatasetManifest,
    label_column: Option<&str>,
) -> Result<Table, DataError> {
    let text = fs::read_to_string(path).map_err(|e| DataError::FileUnreadable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut lines = text
        .lines()
        .map(str::trim_end)
        .filter(|l| !l.trim().is_empty());
    let Some(first) = lines.next() else {
        return Err(DataError::FileUnreadable {
            path: path.to_path_buf(),
            reason: "file is empty".into(),
        });
    };
    let delimiter = manifest.delimiter.unwrap_or_else(|| Delimiter::detect(first));
    let first_tokens = delimiter.split(first);
    let has_header = first_tokens
        .iter()
        .any(|t| t.parse::<f64>().is_err());
    let column_names: Vec<String> = if has_header {
        first_tokens.iter().map(|t| t.to_string()).collect()
    } else {
        (0..first_tokens.len()).map(|i| format!("c{i}")).collect()
    };

    let find = |name: &str| -> Result<usize, DataError> {
        column_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| DataError::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let sensor_idx: Vec<usize> = manifest
        .sensor_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<_, _>>()?;
    let label_idx = label_column.map(|c| find(c)).transpose()?;

    let data_lines: Vec<&str> = if has_header {
        lines.collect()
    } else {
        std::iter::once(first).chain(lines).collect()
    };

    let mut sensor_rows = Vec::with_capacity(data_lines.len());
    let mut labels = label_idx.map(|_| Vec::with_capacity(data_lines.len()));
    for (row_no, line) in data_lines.iter().enumerate() {
        let tokens = delimiter.split(line);
        let mut row = Vec::with_capacity(sensor_idx.len());
        for &col in &sensor_idx {
            let token = tokens.get(col).copied().unwrap_or("");
            let v: f64 = token.parse().map_err(|_| DataError::NonNumericCell {
                path: path.to_path_buf(),
                row: row_no + 1,
                col: col + 1,
                token: token.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonNumericCell {
                    path: path.to_path_buf(),
                    row: row_no + 1,
                    col: col + 1,
                    token: token.to_string(),
                });
            }
            row.push(v);
        }
        sensor_rows.push(row);
        if let (Some(labels), Some(col)) = (labels.as_mut(), label_idx) {
            let token = tokens.get(col).copied().unwrap_or("");
            let label = manifest
                .class_index(token)
                .or_else(|| {
                    token
                        .parse::<usize>()
                        .ok()
                        .filter(|i| *i < manifest.class_names.len())
                })
                .ok_or_else(|| DataError::UnknownClassInLabelRule(token.to_string()))?;
            labels.push(label);
        }
    }
    Ok(Table {
        sensor_rows,
        labels,
    })
}

/// Contiguous runs of equal labels, yielded with their rows.
fn group_runs(
    labels: &[usize],
    rows: Vec<Vec<f64>>,
) -> impl Iterator<Item = (usize, Vec<Vec<f64>>)> + '_ {
    let mut rows = rows.into_iter();
    let mut boundaries: Vec<(usize, usize)> = Vec::new(); // (label, len)
    for &l in labels {
        match boundaries.last_mut() {
            Some((prev, len)) if *prev == l => *len += 1,
            _ => boundaries.push((l, 1)),
        }
    }
    boundaries.into_iter().map(move |(label, len)| {
        let chunk: Vec<Vec<f64>> = rows.by_ref().take(len).collect();
        (label, chunk)
    })
}

fn table_to_measurement(
    raw_rows: Vec<Vec<f64>>,
    label: usize,
    source_id: String,
    path: &Path,
    manifest: &DatasetManifest,
) -> Result<Measurement, DataError> {
    if let Some(expected) = manifest.expected_rows {
        if raw_rows.len() != expected {
            return Err(DataError::RowCountMismatch {
                path: path.to_path_buf(),
                expected,
                actual: raw_rows.len(),
            });
        }
    }
    let kept: Vec<Vec<f64>> = raw_rows
        .into_iter()
        .skip(manifest.injection_start_index)
        .collect();
    if kept.len() < 10 {
        return Err(DataError::TooShortMeasurement {
            path: path.to_path_buf(),
            rows: kept.len(),
        });
    }
    let cols = manifest.sensor_columns.len();
    let mut data = Vec::with_capacity(kept.len() * cols);
    for row in &kept {
        data.extend_from_slice(row);
    }
    Ok(Measurement {
        values: Matrix::from_vec(kept.len(), cols, data),
        label,
        source_id,
        sampling_rate_hz: manifest.sampling_rate_hz,
    })
}
