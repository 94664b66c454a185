//! Rising-window protocol: cut the first `k * 10%` of a measurement and
//! shape it as the classifiers' feature matrix.
//!
//! Window `w1` is the first 10% of rows counted from injection start, `w2`
//! the first 20%, up to `w10` which is the whole measurement. Row counts
//! floor (never peeking past the stated percentage) and clamp to at least
//! one row so tiny measurements stay usable.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::dataio::Measurement;
use crate::matrix::Matrix;
use crate::rng::hash_f64_slice;

#[derive(Debug, Error, PartialEq)]
pub enum WindowError {
    #[error("window index must be in 1..=10, got {0}")]
    InvalidWindowIndex(String),
    #[error("empty input: at least one sample is required")]
    EmptyInput,
    #[error("samples disagree on column count: {0} vs {1}")]
    ColumnMismatch(usize, usize),
}

/// One of the ten rising windows, `w1` (10%) through `w10` (100%).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct WindowIndex(u8);

impl WindowIndex {
    pub fn new(k: u8) -> Result<Self, WindowError> {
        if (1..=10).contains(&k) {
            Ok(WindowIndex(k))
        } else {
            Err(WindowError::InvalidWindowIndex(k.to_string()))
        }
    }

    pub fn k(&self) -> u8 {
        self.0
    }

    /// Window size as a percentage of the full measurement.
    pub fn percent(&self) -> u32 {
        self.0 as u32 * 10
    }

    pub fn all() -> impl Iterator<Item = WindowIndex> {
        (1..=10).map(WindowIndex)
    }

    pub const LAST: WindowIndex = WindowIndex(10);
}

impl fmt::Display for WindowIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

impl FromStr for WindowIndex {
    type Err = WindowError;

    /// Accepts `"w3"` (as printed in reports) or a bare `"3"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.strip_prefix('w').unwrap_or(s);
        digits
            .parse::<u8>()
            .ok()
            .and_then(|k| WindowIndex::new(k).ok())
            .ok_or_else(|| WindowError::InvalidWindowIndex(s.to_string()))
    }
}

impl TryFrom<String> for WindowIndex {
    type Error = WindowError;
    fn try_from(s: String) -> Result<Self, WindowError> {
        s.parse()
    }
}

impl From<WindowIndex> for String {
    fn from(w: WindowIndex) -> String {
        w.to_string()
    }
}

/// Feature matrix cut from one measurement: `rows()` time steps by
/// `cols()` sensors, plus the class label.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    pub features: Matrix,
    pub label: usize,
}

impl WindowedSample {
    pub fn rows(&self) -> usize {
        self.features.rows()
    }

    pub fn cols(&self) -> usize {
        self.features.cols()
    }
}

/// Number of rows in window `w` of a `total_rows`-row measurement:
/// `max(1, floor(total_rows * k / 10))`, exactly `total_rows` at `w10`.
pub fn window_row_count(total_rows: usize, w: WindowIndex) -> usize {
    (total_rows * w.k() as usize / 10).max(1)
}

/// Cut window `w` from a measurement: the leading rows, all sensor columns.
pub fn slice_window(m: &Measurement, w: WindowIndex) -> WindowedSample {
    let n = window_row_count(m.values.rows(), w);
    WindowedSample {
        features: m.values.top_rows(n),
        label: m.label,
    }
}

/// Row-major (time-major) flattening: entry `(t, c)` lands at `t * cols + c`.
pub fn flatten_sample(s: &WindowedSample) -> Vec<f64> {
    s.features.as_slice().to_vec()
}

/// Normalization granularity. The default pools every scalar entry of the
/// training windows into one mean/std pair ("flattened dataset" semantics);
/// per-column stats exist for experimentation only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormalizerKind {
    #[default]
    Pooled,
    PerColumn,
}

/// Z-score transform fitted on training windows. `std` is population
/// (divide by N) and floored at `1e-12` so constant data stays finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub kind: NormalizerKind,
    /// One entry for `Pooled`, one per sensor column for `PerColumn`.
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Hash of the training entries this was fitted on.
    pub fitted_on: u64,
}

pub const STD_FLOOR: f64 = 1e-12;

impl Normalizer {
    /// The identity transform (mean 0, std 1).
    pub fn identity() -> Self {
        Normalizer {
            kind: NormalizerKind::Pooled,
            means: vec![0.0],
            stds: vec![1.0],
            fitted_on: 0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.means[0]
    }

    pub fn std(&self) -> f64 {
        self.stds[0]
    }

    /// True if any std hit the floor (constant training data).
    pub fn degenerate(&self) -> bool {
        self.stds.iter().any(|s| *s <= STD_FLOOR)
    }
}

/// Fit a pooled z-score normalizer over all scalar entries of all samples.
pub fn fit_normalizer(samples: &[WindowedSample]) -> Result<Normalizer, WindowError> {
    fit_normalizer_kind(samples, NormalizerKind::Pooled)
}

pub fn fit_normalizer_kind(
    samples: &[WindowedSample],
    kind: NormalizerKind,
) -> Result<Normalizer, WindowError> {
    if samples.is_empty() {
        return Err(WindowError::EmptyInput);
    }
    let cols = samples[0].cols();
    for s in samples {
        if s.cols() != cols {
            return Err(WindowError::ColumnMismatch(cols, s.cols()));
        }
    }
    let (means, stds) = match kind {
        NormalizerKind::Pooled => {
            let (mean, var) = welford(samples.iter().flat_map(|s| s.features.iter().copied()));
            (vec![mean], vec![var.sqrt().max(STD_FLOOR)])
        }
        NormalizerKind::PerColumn => {
            let mut means = Vec::with_capacity(cols);
            let mut stds = Vec::with_capacity(cols);
            for c in 0..cols {
                let (mean, var) = welford(samples.iter().flat_map(move |s| {
                    (0..s.rows()).map(move |r| s.features.get(r, c))
                }));
                means.push(mean);
                stds.push(var.sqrt().max(STD_FLOOR));
            }
            (means, stds)
        }
    };
    let mut fingerprint = samples.len() as u64;
    for s in samples {
        fingerprint = hash_f64_slice(fingerprint, s.features.as_slice());
    }
    Ok(Normalizer {
        kind,
        means,
        stds,
        fitted_on: fingerprint,
    })
}

/// Welford single-pass mean and population variance.
fn welford(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut n = 0u64;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for x in values {
        n += 1;
        let delta = x - mean;
        mean += delta / n as f64;
        m2 += delta * (x - mean);
    }
    if n == 0 {
        (0.0, 0.0)
    } else {
        (mean, m2 / n as f64)
    }
}

/// Apply `(x - mean) / std` entrywise; label and shape are unchanged.
pub fn apply_normalizer(n: &Normalizer, s: &WindowedSample) -> WindowedSample {
    let mut out = s.clone();
    match n.kind {
        NormalizerKind::Pooled => {
            let (mean, std) = (n.means[0], n.stds[0]);
            for v in out.features.as_mut_slice() {
                *v = (*v - mean) / std;
            }
        }
        NormalizerKind::PerColumn => {
            let cols = out.cols();
            for (i, v) in out.features.as_mut_slice().iter_mut().enumerate() {
                let c = i % cols;
                *v = (*v - n.means[c]) / n.stds[c];
            }
        }
    }
    out
}

/// Invert the transform: `x * std + mean`.
pub fn invert_normalizer(n: &Normalizer, s: &WindowedSample) -> WindowedSample {
    let mut out = s.clone();
    match n.kind {
        NormalizerKind::Pooled => {
            let (mean, std) = (n.means[0], n.stds[0]);
            for v in out.features.as_mut_slice() {
                *v = *v * std + mean;
            }
        }
        NormalizerKind::PerColumn => {
            let cols = out.cols();
            for (i, v) in out.features.as_mut_slice().iter_mut().enumerate() {
                let c = i % cols;
                *v = *v * n.stds[c] + n.means[c];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(rows: usize, cols: usize, data: Vec<f64>) -> WindowedSample {
        WindowedSample {
            features: Matrix::from_vec(rows, cols, data),
            label: 0,
        }
    }

    fn measurement(rows: usize, cols: usize, data: Vec<f64>) -> Measurement {
        Measurement {
            values: Matrix::from_vec(rows, cols, data),
            label: 0,
            source_id: "test".into(),
            sampling_rate_hz: 1.0,
        }
    }

    #[test]
    fn row_count_examples() {
        assert_eq!(window_row_count(3330, WindowIndex::new(3).unwrap()), 999);
        for t in [1, 5, 10, 37, 3330] {
            assert_eq!(window_row_count(t, WindowIndex::LAST), t);
        }
        assert_eq!(window_row_count(5, WindowIndex::new(1).unwrap()), 1);
    }

    #[test]
    fn window_index_parse_and_print() {
        let w: WindowIndex = "w7".parse().unwrap();
        assert_eq!(w.k(), 7);
        assert_eq!(w.to_string(), "w7");
        assert_eq!("3".parse::<WindowIndex>().unwrap().k(), 3);
        assert!("w0".parse::<WindowIndex>().is_err());
        assert!("w11".parse::<WindowIndex>().is_err());
    }

    #[test]
    fn slice_examples() {
        let t = 3330;
        let m = measurement(t, 6, (0..t * 6).map(|i| i as f64).collect());
        let w2 = slice_window(&m, WindowIndex::new(2).unwrap());
        assert_eq!((w2.rows(), w2.cols()), (666, 6));
        let w10 = slice_window(&m, WindowIndex::LAST);
        assert_eq!(w10.features, m.values);
    }

    #[test]
    fn slices_are_prefixes() {
        let m = measurement(53, 3, (0..53 * 3).map(|i| (i as f64).sin()).collect());
        for k in 1..10u8 {
            let a = slice_window(&m, WindowIndex::new(k).unwrap());
            let b = slice_window(&m, WindowIndex::new(k + 1).unwrap());
            assert_eq!(
                a.features.as_slice(),
                &b.features.as_slice()[..a.rows() * a.cols()]
            );
        }
    }

    #[test]
    fn normalizer_constant_data_floors_std() {
        let s = vec![sample(2, 2, vec![5.0; 4]), sample(3, 2, vec![5.0; 6])];
        let n = fit_normalizer(&s).unwrap();
        assert_eq!(n.mean(), 5.0);
        assert_eq!(n.std(), STD_FLOOR);
        assert!(n.degenerate());
    }

    #[test]
    fn normalizer_symmetric_data() {
        let s = vec![sample(2, 2, vec![-1.0, 1.0, 1.0, -1.0])];
        let n = fit_normalizer(&s).unwrap();
        assert!(n.mean().abs() < 1e-15);
        assert!((n.std() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normalizer_matches_two_pass_oracle() {
        let mut rng = crate::rng::Rng64::from_seed(99);
        let samples: Vec<WindowedSample> = (0..5)
            .map(|_| {
                let data: Vec<f64> = (0..12).map(|_| rng.next_f64() * 10.0 - 3.0).collect();
                sample(4, 3, data)
            })
            .collect();
        let n = fit_normalizer(&samples).unwrap();

        // two-pass oracle
        let all: Vec<f64> = samples
            .iter()
            .flat_map(|s| s.features.iter().copied())
            .collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / all.len() as f64;

        assert!((n.mean() - mean).abs() < 1e-10);
        assert!((n.std() - var.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn apply_normalizer_known_points() {
        let s = vec![sample(1, 2, vec![1.0, 3.0])];
        let n = fit_normalizer(&s).unwrap(); // mean 2, std 1
        let out = apply_normalizer(&n, &sample(1, 2, vec![n.mean(), n.mean() + n.std()]));
        assert!((out.features.get(0, 0)).abs() < 1e-12);
        assert!((out.features.get(0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn self_normalization_is_zero_mean_unit_var() {
        let mut rng = crate::rng::Rng64::from_seed(4);
        let samples: Vec<WindowedSample> = (0..8)
            .map(|_| {
                let data: Vec<f64> = (0..20).map(|_| rng.approx_normal() * 4.0 + 2.5).collect();
                sample(5, 4, data)
            })
            .collect();
        let n = fit_normalizer(&samples).unwrap();
        let transformed: Vec<WindowedSample> =
            samples.iter().map(|s| apply_normalizer(&n, s)).collect();
        let all: Vec<f64> = transformed
            .iter()
            .flat_map(|s| s.features.iter().copied())
            .collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / all.len() as f64;
        assert!(mean.abs() < 1e-9, "pooled mean {mean}");
        assert!((var - 1.0).abs() < 1e-6, "pooled var {var}");
    }

    #[test]
    fn identity_normalizer_is_identity() {
        let s = sample(2, 2, vec![0.5, -1.5, 2.0, 7.0]);
        let out = apply_normalizer(&Normalizer::identity(), &s);
        assert_eq!(out, s);
    }

    #[test]
    fn flatten_order() {
        let s = sample(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(flatten_sample(&s), vec![1.0, 2.0, 3.0, 4.0]);
        let one_row = sample(1, 3, vec![9.0, 8.0, 7.0]);
        assert_eq!(flatten_sample(&one_row), vec![9.0, 8.0, 7.0]);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert_eq!(fit_normalizer(&[]).unwrap_err(), WindowError::EmptyInput);
    }

    proptest! {
        #[test]
        fn row_count_monotone_and_full_at_w10(t in 1usize..5000) {
            let mut prev = 0usize;
            for k in 1..=10u8 {
                let n = window_row_count(t, WindowIndex::new(k).unwrap());
                prop_assert!(n >= 1);
                prop_assert!(n >= prev);
                prop_assert!(n <= t);
                prev = n;
            }
            prop_assert_eq!(window_row_count(t, WindowIndex::LAST), t);
        }

        #[test]
        fn flatten_round_trips(rows in 1usize..12, cols in 1usize..8, seed in 0u64..1000) {
            let mut rng = crate::rng::Rng64::from_seed(seed);
            let data: Vec<f64> = (0..rows * cols).map(|_| rng.next_f64()).collect();
            let s = sample(rows, cols, data.clone());
            let flat = flatten_sample(&s);
            // element (t, c) lands at t*cols + c
            for t in 0..rows {
                for c in 0..cols {
                    prop_assert_eq!(flat[t * cols + c], s.features.get(t, c));
                }
            }
            let back = Matrix::from_vec(rows, cols, flat);
            prop_assert_eq!(back, s.features);
        }

        #[test]
        fn normalize_then_invert_recovers(seed in 0u64..500) {
            let mut rng = crate::rng::Rng64::from_seed(seed);
            let samples: Vec<WindowedSample> = (0..3)
                .map(|_| sample(4, 2, (0..8).map(|_| rng.next_f64() * 100.0).collect()))
                .collect();
            let n = fit_normalizer(&samples).unwrap();
            for s in &samples {
                let round = invert_normalizer(&n, &apply_normalizer(&n, s));
                for (a, b) in round.features.iter().zip(s.features.iter()) {
                    let denom = b.abs().max(1.0);
                    prop_assert!(((a - b) / denom).abs() < 1e-9);
                }
            }
        }
    }
}
