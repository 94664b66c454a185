//! Rising-window benchmark toolkit for electronic-nose gas classification.
//!
//! An electronic nose records a time series per gas exposure: one row per
//! time step, one column per sensor. The classifiers here consume only the
//! first `k * 10%` of each measurement (the rising-window protocol) so a
//! forecast is available long before the measurement finishes.
//!
//! The crate is organized along the pipeline:
//!
//! - [`dataio`] — manifest-driven dataset loading plus a deterministic
//!   synthetic generator for desk-scale experiments.
//! - [`windowing`] — window slicing, z-score normalization, flattening.
//! - [`svm`] — from-scratch soft-margin SVM: RBF kernel, SMO solver,
//!   one-vs-one multiclass.
//! - [`neural`] — a minimal deterministic network engine (dense, conv2d,
//!   residual and column-fusion layers, SGD with momentum) and builders for
//!   the four benchmark architectures.
//! - [`bench`] — experiment orchestration: stratified holdout, per-window
//!   train/evaluate/time, best-window selection, report emission.
//!
//! Everything that draws random numbers does so through [`rng::Rng64`], a
//! documented xoshiro-family generator, so results are reproducible from a
//! seed alone.

pub mod bench;
pub mod dataio;
pub mod matrix;
pub mod neural;
pub mod rng;
pub mod svm;
pub mod windowing;

pub use matrix::Matrix;
pub use rng::Rng64;
