//! Manifest schema: one JSON document per dataset.

use serde::{Deserialize, Serialize};

use super::DataError;

/// How cells are separated in the measurement files. When absent from the
/// manifest, the delimiter is auto-detected on the first line of each file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delimiter {
    Comma,
    Semicolon,
    Tab,
    Whitespace,
}

impl Delimiter {
    pub fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            Delimiter::Comma => line.split(',').map(str::trim).collect(),
            Delimiter::Semicolon => line.split(';').map(str::trim).collect(),
            Delimiter::Tab => line.split('\t').map(str::trim).collect(),
            Delimiter::Whitespace => line.split_whitespace().collect(),
        }
    }

    /// Pick the delimiter from a sample line: first of `;`, `,`, tab that
    /// occurs, falling back to whitespace.
    pub fn detect(line: &str) -> Delimiter {
        if line.contains(';') {
            Delimiter::Semicolon
        } else if line.contains(',') {
            Delimiter::Comma
        } else if line.contains('\t') {
            Delimiter::Tab
        } else {
            Delimiter::Whitespace
        }
    }
}

/// One `pattern -> class` entry. Patterns are matched against the file path
/// relative to the dataset root; `*` matches any run of characters
/// (including `/`), `?` matches one character. First match wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPattern {
    pub pattern: String,
    pub class: String,
}

/// How files (or rows) get their class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// Match the relative file path against patterns; the whole file is one
    /// measurement. Files matching `file_pattern` but no label pattern are
    /// skipped, so one directory can back manifests with different class
    /// subsets.
    PathPatterns(Vec<PathPattern>),
    /// The named column holds a class name (or class index) per row;
    /// contiguous runs of equal labels form one measurement each.
    LabelColumn { column: String },
}

/// Declarative description of one dataset on disk.
///
/// `injection_start_index` rows are discarded from the head of every
/// measurement before T is counted; the databases themselves never state
/// it, so it defaults to 0 and is documented per-dataset in the example
/// manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub class_names: Vec<String>,
    pub sensor_columns: Vec<String>,
    #[serde(default)]
    pub ignored_columns: Vec<String>,
    pub sampling_rate_hz: f64,
    #[serde(default)]
    pub injection_start_index: usize,
    pub file_pattern: String,
    pub label_rule: LabelRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delimiter: Option<Delimiter>,
}

impl DatasetManifest {
    /// Check every manifest invariant, naming the offending key.
    pub fn validate(&self) -> Result<(), DataError> {
        if self.name.is_empty() {
            return Err(DataError::MissingField("name".into()));
        }
        if self.class_names.is_empty() {
            return Err(DataError::MissingField("class_names".into()));
        }
        if self.sensor_columns.is_empty() {
            return Err(DataError::MissingField("sensor_columns".into()));
        }
        if self.file_pattern.is_empty() {
            return Err(DataError::MissingField("file_pattern".into()));
        }
        for (i, a) in self.class_names.iter().enumerate() {
            if self.class_names[i + 1..].contains(a) {
                return Err(DataError::InvalidManifest {
                    field: "class_names".into(),
                    reason: format!("class `{a}` listed twice"),
                });
            }
        }
        for (i, a) in self.sensor_columns.iter().enumerate() {
            if self.sensor_columns[i + 1..].contains(a) {
                return Err(DataError::DuplicateColumn(a.clone()));
            }
        }
        for col in &self.ignored_columns {
            if self.sensor_columns.contains(col) {
                return Err(DataError::DuplicateColumn(col.clone()));
            }
        }
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return Err(DataError::InvalidManifest {
                field: "sampling_rate_hz".into(),
                reason: format!("must be a positive real, got {}", self.sampling_rate_hz),
            });
        }
        if let Some(rows) = self.expected_rows {
            if rows == 0 {
                return Err(DataError::InvalidManifest {
                    field: "expected_rows".into(),
                    reason: "must be positive when present".into(),
                });
            }
        }
        match &self.label_rule {
            LabelRule::PathPatterns(patterns) => {
                if patterns.is_empty() {
                    return Err(DataError::MissingField("label_rule".into()));
                }
                for p in patterns {
                    if !self.class_names.contains(&p.class) {
                        return Err(DataError::UnknownClassInLabelRule(p.class.clone()));
                    }
                }
            }
            LabelRule::LabelColumn { column } => {
                if column.is_empty() {
                    return Err(DataError::MissingField("label_rule.column".into()));
                }
                if self.sensor_columns.contains(column) {
                    return Err(DataError::DuplicateColumn(column.clone()));
                }
            }
        }
        Ok(())
    }

    /// Resolve a class name to its index.
    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    /// Manifest used by the synthetic generator and its writer: classes
    /// `class0..`, sensors `s0..`, files labeled by name prefix.
    pub fn for_synthetic(name: &str, classes: usize, sensors: usize, rate_hz: f64) -> Self {
        let class_names: Vec<String> = (0..classes).map(|c| format!("class{c}")).collect();
        let patterns = class_names
            .iter()
            .map(|c| PathPattern {
                pattern: format!("{c}_*"),
                class: c.clone(),
            })
            .collect();
        DatasetManifest {
            name: name.to_string(),
            class_names,
            sensor_columns: (0..sensors).map(|s| format!("s{s}")).collect(),
            ignored_columns: Vec::new(),
            sampling_rate_hz: rate_hz,
            injection_start_index: 0,
            file_pattern: "*.csv".into(),
            label_rule: LabelRule::PathPatterns(patterns),
            expected_rows: None,
            delimiter: Some(Delimiter::Comma),
        }
    }
}

/// Glob-lite matcher: `*` matches any run (including `/`), `?` one char.
pub(crate) fn glob_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    // iterative matcher with single backtrack point per '*'
    let (mut pi, mut ti) = (0usize, 0usize);
    let (mut star, mut mark) = (None::<usize>, 0usize);
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == t[ti]) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some(pi);
            mark = ti;
            pi += 1;
        } else if let Some(s) = star {
            pi = s + 1;
            mark += 1;
            ti = mark;
        } else {
            return false;
        }
    }
    while pi < p.len() && p[pi] == '*' {
        pi += 1;
    }
    pi == p.len()
}
