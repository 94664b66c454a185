//! Write a dataset back to the manifest + CSV format.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{DataError, Dataset};

/// Write `manifest.json` plus one CSV per measurement into `dir`.
///
/// Values are written with 9 significant digits, so reloading reproduces
/// them within 1e-7 absolute for the magnitudes this toolkit produces.
/// File names come from each measurement's `source_id`, which the label
/// rule of the manifest must cover.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<(), DataError> {
    ds.validate()?;
    fs::create_dir_all(dir).map_err(|e| DataError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let manifest_path = dir.join("manifest.json");
    let manifest_json =
        serde_json::to_string_pretty(&ds.manifest).expect("manifest serializes");
    fs::write(&manifest_path, manifest_json + "\n").map_err(|e| DataError::Io {
        path: manifest_path.clone(),
        source: e,
    })?;
    let header = ds.manifest.sensor_columns.join(",");
    for m in &ds.measurements {
        let path = dir.join(&m.source_id);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| DataError::Io {
                path: parent.to_path_buf(),
                source: e,
            })?;
        }
        let mut out = String::with_capacity(m.values.rows() * m.values.cols() * 18);
        out.push_str(&header);
        out.push('\n');
        for r in 0..m.values.rows() {
            for (c, v) in m.values.row(r).iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                // 9 significant digits
                out.push_str(&format!("{v:.8e}"));
            }
            out.push('\n');
        }
        let mut f = fs::File::create(&path).map_err(|e| DataError::Io {
            path: path.clone(),
            source: e,
        })?;
        f.write_all(out.as_bytes()).map_err(|e| DataError::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    Ok(())
}
