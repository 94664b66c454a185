//! From-scratch soft-margin SVM: RBF kernel, SMO training, one-vs-one
//! multiclass, versioned JSON model files.

mod kernel;
mod multiclass;
mod smo;

pub use kernel::{compute_gamma, rbf_kernel, GammaEstimate, VARIANCE_FLOOR};
pub use multiclass::{predict_multiclass, train_multiclass, MulticlassTraining, PairSummary};
pub use smo::{dual_objective, kkt_violations, smo_train_binary, SmoOutcome, SV_ALPHA_THRESHOLD};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("empty input: at least one sample is required")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training data contains a single class")]
    SingleClassInput,
    #[error("labels must be exactly -1 or +1, got {0}")]
    InvalidLabel(f64),
    #[error("fewer than 2 classes present in training labels")]
    TooFewClasses,
    #[error("training produced no support vectors")]
    NoSupportVectors,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training pair ({class_a}, {class_b}) failed: {source}")]
    PairTraining {
        class_a: usize,
        class_b: usize,
        #[source]
        source: Box<SvmError>,
    },
    #[error("model file is not usable: {0}")]
    BadModelFile(String),
}

/// Gamma selection: the explicit value, or the `1/(n * variance)` rule
/// evaluated on the training vectors at fit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaRule {
    PaperScale,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    /// Soft-margin penalty; the benchmark setting is 10.
    pub c: f64,
    pub gamma: GammaRule,
    /// KKT tolerance for the stopping condition.
    pub tol: f64,
    /// Sweep budget knob; the iteration cap below derives from it.
    pub max_passes: usize,
    /// Hard cap on pair-update attempts. `None` means `10 * N * max_passes`.
    pub max_iterations: Option<u64>,
    /// Seed for the solver's randomized index-selection fallbacks.
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 10.0,
            gamma: GammaRule::PaperScale,
            tol: 1e-3,
            max_passes: 200,
            max_iterations: None,
            seed: 0,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<(), SvmError> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(SvmError::InvalidConfig(format!("C must be > 0, got {}", self.c)));
        }
        if let GammaRule::Fixed(g) = self.gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(SvmError::InvalidConfig(format!(
                    "gamma must be > 0, got {g}"
                )));
            }
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(SvmError::InvalidConfig(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if self.max_passes == 0 {
            return Err(SvmError::InvalidConfig("max_passes must be >= 1".into()));
        }
        Ok(())
    }

    /// The gamma a training run will use on `samples`.
    pub fn resolve_gamma(&self, samples: &[Vec<f64>]) -> Result<f64, SvmError> {
        match self.gamma {
            GammaRule::Fixed(g) => Ok(g),
            GammaRule::PaperScale => Ok(compute_gamma(samples)?.value),
        }
    }
}

/// SMO-trained binary classifier: support vectors with their multipliers
/// and labels, plus the bias and the kernel width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub sv_labels: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
}

impl BinarySvmModel {
    pub fn dimension(&self) -> usize {
        self.support_vectors[0].len()
    }
}

/// Decision function `sum_i alpha_i y_i K(sv_i, x) + bias`.
pub fn svm_decision(model: &BinarySvmModel, x: &[f64]) -> Result<f64, SvmError> {
    if x.len() != model.dimension() {
        return Err(SvmError::DimensionMismatch {
            expected: model.dimension(),
            got: x.len(),
        });
    }
    let mut f = model.bias;
    for ((sv, &a), &y) in model
        .support_vectors
        .iter()
        .zip(&model.alphas)
        .zip(&model.sv_labels)
    {
        f += a * y * kernel::rbf_kernel_unchecked(sv, x, model.gamma);
    }
    Ok(f)
}

/// One-vs-one ensemble: a binary model per unordered class pair, with
/// `class_a` mapped to +1 and `class_b` to -1 during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassSvmModel {
    pub format_version: u32,
    pub class_count: usize,
    pub c: f64,
    /// Gamma shared by all pairs (resolved once on the full training set).
    pub gamma: f64,
    pub pairs: Vec<PairModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub class_a: usize,
    pub class_b: usize,
    pub model: BinarySvmModel,
}

pub const SVM_MODEL_FORMAT_VERSION: u32 = 1;

impl MulticlassSvmModel {
    pub fn dimension(&self) -> usize {
        self.pairs[0].model.dimension()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SvmError> {
        let model: MulticlassSvmModel = serde_json::from_str(text)
            .map_err(|e| SvmError::BadModelFile(e.to_string()))?;
        if model.format_version != SVM_MODEL_FORMAT_VERSION {
            return Err(SvmError::BadModelFile(format!(
                "unsupported format_version {} (expected {})",
                model.format_version, SVM_MODEL_FORMAT_VERSION
            )));
        }
        let expected = model.class_count * (model.class_count - 1) / 2;
        if model.pairs.len() != expected {
            return Err(SvmError::BadModelFile(format!(
                "{} pairs for {} classes (expected {})",
                model.pairs.len(),
                model.class_count,
                expected
            )));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng64;

    #[test]
    fn decision_matches_naive_resummation() {
        let mut rng = Rng64::from_seed(17);
        let model = BinarySvmModel {
            support_vectors: (0..6)
                .map(|_| (0..4).map(|_| rng.approx_normal()).collect())
                .collect(),
            alphas: (0..6).map(|_| rng.next_f64() * 5.0).collect(),
            sv_labels: (0..6).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect(),
            bias: 0.37,
            gamma: 0.6,
        };
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.approx_normal()).collect();
            // direct loop oracle
            let mut expected = model.bias;
            for i in 0..6 {
                let mut sq = 0.0;
                for d in 0..4 {
                    let diff = model.support_vectors[i][d] - x[d];
                    sq += diff * diff;
                }
                expected += model.alphas[i] * model.sv_labels[i] * (-model.gamma * sq).exp();
            }
            let got = svm_decision(&model, &x).unwrap();
            assert!((got - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn decision_checks_dimension() {
        let model = BinarySvmModel {
            support_vectors: vec![vec![0.0, 1.0]],
            alphas: vec![1.0],
            sv_labels: vec![1.0],
            bias: 0.0,
            gamma: 1.0,
        };
        assert!(matches!(
            svm_decision(&model, &[1.0]),
            Err(SvmError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn config_validation() {
        let bad = SvmConfig {
            c: 0.0,
            ..SvmConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SvmConfig {
            gamma: GammaRule::Fixed(-1.0),
            ..SvmConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(SvmConfig::default().validate().is_ok());
    }
}
