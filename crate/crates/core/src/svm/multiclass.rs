//! One-vs-one multiclass reduction with sign voting.

use super::smo::smo_train_binary;
use super::{
    svm_decision, GammaRule, MulticlassSvmModel, PairModel, SvmConfig, SvmError,
    SVM_MODEL_FORMAT_VERSION,
};

/// Per-pair training facts surfaced alongside the model.
#[derive(Debug, Clone)]
pub struct PairSummary {
    pub class_a: usize,
    pub class_b: usize,
    pub support_vector_count: usize,
    pub iterations: u64,
    pub cap_exceeded: bool,
}

#[derive(Debug, Clone)]
pub struct MulticlassTraining {
    pub model: MulticlassSvmModel,
    pub pair_summaries: Vec<PairSummary>,
    /// Gamma came from constant (floored-variance) data.
    pub degenerate_variance: bool,
}

/// Train one binary model per unordered class pair `(a, b)`, `a < b`, each
/// on that pair's samples only, with `a` mapped to +1 and `b` to -1.
///
/// With [`GammaRule::PaperScale`], gamma is resolved once over all of
/// `samples` and shared by every pair.
pub fn train_multiclass(
    samples: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    cfg: &SvmConfig,
) -> Result<MulticlassTraining, SvmError> {
    if samples.is_empty() {
        return Err(SvmError::EmptyInput);
    }
    if samples.len() != labels.len() {
        return Err(SvmError::DimensionMismatch {
            expected: samples.len(),
            got: labels.len(),
        });
    }
    if class_count < 2 {
        return Err(SvmError::TooFewClasses);
    }
    let mut present = vec![false; class_count];
    for &l in labels {
        if l >= class_count {
            return Err(SvmError::InvalidConfig(format!(
                "label {l} out of range for {class_count} classes"
            )));
        }
        present[l] = true;
    }
    if present.iter().filter(|p| **p).count() < 2 {
        return Err(SvmError::TooFewClasses);
    }
    cfg.validate()?;

    let mut degenerate_variance = false;
    let gamma = match cfg.gamma {
        GammaRule::Fixed(g) => g,
        GammaRule::PaperScale => {
            let est = super::compute_gamma(samples)?;
            degenerate_variance = est.degenerate_variance;
            est.value
        }
    };
    let pair_cfg = SvmConfig {
        gamma: GammaRule::Fixed(gamma),
        ..*cfg
    };

    let mut pairs = Vec::with_capacity(class_count * (class_count - 1) / 2);
    let mut pair_summaries = Vec::new();
    for class_a in 0..class_count {
        for class_b in class_a + 1..class_count {
            let mut x = Vec::new();
            let mut y = Vec::new();
            for (sample, &label) in samples.iter().zip(labels) {
                if label == class_a {
                    x.push(sample.clone());
                    y.push(1.0);
                } else if label == class_b {
                    x.push(sample.clone());
                    y.push(-1.0);
                }
            }
            let outcome =
                smo_train_binary(&x, &y, &pair_cfg).map_err(|e| SvmError::PairTraining {
                    class_a,
                    class_b,
                    source: Box::new(e),
                })?;
            pair_summaries.push(PairSummary {
                class_a,
                class_b,
                support_vector_count: outcome.model.support_vectors.len(),
                iterations: outcome.iterations,
                cap_exceeded: outcome.cap_exceeded,
            });
            pairs.push(PairModel {
                class_a,
                class_b,
                model: outcome.model,
            });
        }
    }
    Ok(MulticlassTraining {
        model: MulticlassSvmModel {
            format_version: SVM_MODEL_FORMAT_VERSION,
            class_count,
            c: cfg.c,
            gamma,
            pairs,
        },
        pair_summaries,
        degenerate_variance,
    })
}

/// Each pair votes by decision sign (`>= 0` votes `class_a`); the class
/// with the most votes wins, ties broken by the smallest class index.
pub fn predict_multiclass(model: &MulticlassSvmModel, x: &[f64]) -> Result<usize, SvmError> {
    if x.len() != model.dimension() {
        return Err(SvmError::DimensionMismatch {
            expected: model.dimension(),
            got: x.len(),
        });
    }
    let mut votes = vec![0usize; model.class_count];
    for pair in &model.pairs {
        let d = svm_decision(&pair.model, x)?;
        if d >= 0.0 {
            votes[pair.class_a] += 1;
        } else {
            votes[pair.class_b] += 1;
        }
    }
    Ok(argmax_votes(&votes))
}

fn argmax_votes(votes: &[usize]) -> usize {
    let mut best = 0usize;
    for (i, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng64;

    fn blob_dataset(
        classes: usize,
        per_class: usize,
        spread: f64,
        seed: u64,
    ) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = Rng64::from_seed(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for c in 0..classes {
            let angle = c as f64 * std::f64::consts::TAU / classes as f64;
            let center = [4.0 * angle.cos(), 4.0 * angle.sin()];
            for _ in 0..per_class {
                x.push(vec![
                    center[0] + spread * rng.approx_normal(),
                    center[1] + spread * rng.approx_normal(),
                ]);
                y.push(c);
            }
        }
        (x, y)
    }

    #[test]
    fn pair_count_for_three_classes() {
        let (x, y) = blob_dataset(3, 6, 0.3, 1);
        let trained = train_multiclass(&x, &y, 3, &SvmConfig::default()).unwrap();
        let pairs: Vec<(usize, usize)> = trained
            .model
            .pairs
            .iter()
            .map(|p| (p.class_a, p.class_b))
            .collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn two_class_prediction_equals_binary_sign() {
        let (x, y) = blob_dataset(2, 8, 0.3, 2);
        let trained = train_multiclass(&x, &y, 2, &SvmConfig::default()).unwrap();
        assert_eq!(trained.model.pairs.len(), 1);
        let binary = &trained.model.pairs[0].model;
        for sample in &x {
            let d = svm_decision(binary, sample).unwrap();
            let expected = if d >= 0.0 { 0 } else { 1 };
            assert_eq!(predict_multiclass(&trained.model, sample).unwrap(), expected);
        }
    }

    #[test]
    fn separable_four_class_is_perfect_on_holdout() {
        let (x, y) = blob_dataset(4, 10, 0.25, 3);
        // nearest-centroid oracle first: confirm the blobs are separable
        let mut centroids = vec![vec![0.0; 2]; 4];
        let mut counts = vec![0usize; 4];
        for (xi, &yi) in x.iter().zip(&y) {
            centroids[yi][0] += xi[0];
            centroids[yi][1] += xi[1];
            counts[yi] += 1;
        }
        for (c, n) in centroids.iter_mut().zip(&counts) {
            c[0] /= *n as f64;
            c[1] /= *n as f64;
        }
        let centroid_acc = x
            .iter()
            .zip(&y)
            .filter(|(xi, &yi)| {
                let nearest = (0..4)
                    .min_by(|&a, &b| {
                        let da: f64 = (0..2).map(|d| (xi[d] - centroids[a][d]).powi(2)).sum();
                        let db: f64 = (0..2).map(|d| (xi[d] - centroids[b][d]).powi(2)).sum();
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                nearest == yi
            })
            .count() as f64
            / x.len() as f64;
        assert!(centroid_acc >= 0.95, "oracle accuracy {centroid_acc}");

        // holdout: train on even indices, test on odd
        let train_idx: Vec<usize> = (0..x.len()).filter(|i| i % 2 == 0).collect();
        let test_idx: Vec<usize> = (0..x.len()).filter(|i| i % 2 == 1).collect();
        let xt: Vec<Vec<f64>> = train_idx.iter().map(|&i| x[i].clone()).collect();
        let yt: Vec<usize> = train_idx.iter().map(|&i| y[i]).collect();
        let trained = train_multiclass(&xt, &yt, 4, &SvmConfig::default()).unwrap();
        let correct = test_idx
            .iter()
            .filter(|&&i| predict_multiclass(&trained.model, &x[i]).unwrap() == y[i])
            .count();
        assert_eq!(correct, test_idx.len());
    }

    #[test]
    fn vote_argmax_and_tie_rule() {
        assert_eq!(argmax_votes(&[2, 1, 0]), 0);
        assert_eq!(argmax_votes(&[1, 1, 1]), 0);
        assert_eq!(argmax_votes(&[0, 3, 3]), 1);
    }

    #[test]
    fn missing_class_is_annotated_with_pair() {
        let (x, y) = blob_dataset(2, 6, 0.3, 4);
        // claim 3 classes but provide samples for only 2: pair (0,2) fails
        let err = train_multiclass(&x, &y, 3, &SvmConfig::default()).unwrap_err();
        match err {
            SvmError::PairTraining {
                class_a, class_b, source,
            } => {
                assert_eq!((class_a, class_b), (0, 2));
                assert!(matches!(*source, SvmError::SingleClassInput));
            }
            other => panic!("expected PairTraining, got {other:?}"),
        }
    }

    #[test]
    fn model_json_round_trip_reproduces_decisions() {
        let (x, y) = blob_dataset(3, 6, 0.4, 5);
        let trained = train_multiclass(&x, &y, 3, &SvmConfig::default()).unwrap();
        let json = trained.model.to_json();
        let back = MulticlassSvmModel::from_json(&json).unwrap();
        for sample in &x {
            for (p1, p2) in trained.model.pairs.iter().zip(&back.pairs) {
                let d1 = svm_decision(&p1.model, sample).unwrap();
                let d2 = svm_decision(&p2.model, sample).unwrap();
                assert!((d1 - d2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn prediction_invariant_under_positive_decision_rescaling() {
        let (x, y) = blob_dataset(3, 6, 0.4, 6);
        let trained = train_multiclass(&x, &y, 3, &SvmConfig::default()).unwrap();
        let mut scaled = trained.model.clone();
        for (i, pair) in scaled.pairs.iter_mut().enumerate() {
            let factor = 3.0 + i as f64;
            for a in &mut pair.model.alphas {
                *a *= factor;
            }
            pair.model.bias *= factor;
        }
        for sample in &x {
            assert_eq!(
                predict_multiclass(&trained.model, sample).unwrap(),
                predict_multiclass(&scaled, sample).unwrap()
            );
        }
    }
}
