//! RBF kernel and the benchmark's gamma rule.

use super::SvmError;

/// `exp(-gamma * ||x - y||^2)`. Symmetric, equal to 1 iff `x == y`.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64, SvmError> {
    if x.len() != y.len() {
        return Err(SvmError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(rbf_kernel_unchecked(x, y, gamma))
}

#[inline]
pub(crate) fn rbf_kernel_unchecked(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let mut sq = 0.0;
    for (a, b) in x.iter().zip(y) {
        let d = a - b;
        sq += d * d;
    }
    (-gamma * sq).exp()
}

/// Variance floor applied before inverting, so constant data yields a
/// finite (if huge) gamma instead of a division by zero.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Gamma estimate: `1 / (n * variance)` where `n` is the flattened vector
/// length and the variance pools every scalar entry of every sample
/// (population convention). `degenerate_variance` is set when the floor
/// kicked in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaEstimate {
    pub value: f64,
    pub degenerate_variance: bool,
}

/// Compute the gamma rule over flattened sample vectors.
pub fn compute_gamma(samples: &[Vec<f64>]) -> Result<GammaEstimate, SvmError> {
    if samples.is_empty() || samples[0].is_empty() {
        return Err(SvmError::EmptyInput);
    }
    let n = samples[0].len();
    for s in samples {
        if s.len() != n {
            return Err(SvmError::DimensionMismatch {
                expected: n,
                got: s.len(),
            });
        }
    }
    // Welford over the pooled entries
    let mut count = 0u64;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for s in samples {
        for &x in s {
            count += 1;
            let delta = x - mean;
            mean += delta / count as f64;
            m2 += delta * (x - mean);
        }
    }
    let var = m2 / count as f64;
    let degenerate = var <= VARIANCE_FLOOR;
    let var = var.max(VARIANCE_FLOOR);
    Ok(GammaEstimate {
        value: 1.0 / (n as f64 * var),
        degenerate_variance: degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng64;

    #[test]
    fn kernel_self_is_one() {
        let x = vec![0.3, -2.0, 5.5];
        assert_eq!(rbf_kernel(&x, &x, 0.7).unwrap(), 1.0);
    }

    #[test]
    fn unit_exponent_gives_e_inverse() {
        let gamma = 0.5;
        // ||x - y||^2 = 2 = 1/gamma
        let x = vec![0.0, 0.0];
        let y = vec![1.0, 1.0];
        let k = rbf_kernel(&x, &y, gamma).unwrap();
        assert!((k - (-1.0f64).exp()).abs() < 1e-12);
        assert!((k - 0.367879441).abs() < 1e-8);
    }

    #[test]
    fn kernel_matches_direct_sum_oracle() {
        let mut rng = Rng64::from_seed(21);
        for _ in 0..50 {
            let n = 1 + rng.below(8);
            let x: Vec<f64> = (0..n).map(|_| rng.approx_normal()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.approx_normal()).collect();
            let gamma = 0.1 + rng.next_f64();
            // naive squared-distance loop
            let mut sq = 0.0;
            for i in 0..n {
                sq += (x[i] - y[i]) * (x[i] - y[i]);
            }
            let expected = (-gamma * sq).exp();
            let got = rbf_kernel(&x, &y, gamma).unwrap();
            assert!((got - expected).abs() < 1e-12);
            let reversed = rbf_kernel(&y, &x, gamma).unwrap();
            assert_eq!(got, reversed);
            assert!(got > 0.0 && got <= 1.0);
        }
    }

    #[test]
    fn kernel_dimension_mismatch() {
        assert!(matches!(
            rbf_kernel(&[1.0], &[1.0, 2.0], 1.0),
            Err(SvmError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gamma_unit_variance() {
        // entries {-1, +1} equally often: pooled variance exactly 1
        let samples = vec![vec![-1.0, 1.0, -1.0, 1.0], vec![1.0, -1.0, 1.0, -1.0]];
        let g = compute_gamma(&samples).unwrap();
        assert!((g.value - 0.25).abs() < 1e-15);
        assert!(!g.degenerate_variance);
    }

    #[test]
    fn gamma_constant_data_floors() {
        let samples = vec![vec![3.0; 5], vec![3.0; 5]];
        let g = compute_gamma(&samples).unwrap();
        assert!(g.degenerate_variance);
        assert!((g.value - 1.0 / (5.0 * VARIANCE_FLOOR)).abs() / g.value < 1e-12);
    }

    #[test]
    fn gamma_matches_two_pass_oracle() {
        let mut rng = Rng64::from_seed(77);
        let samples: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..6).map(|_| rng.next_f64() * 4.0 - 1.0).collect())
            .collect();
        let g = compute_gamma(&samples).unwrap();
        let all: Vec<f64> = samples.iter().flatten().copied().collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / all.len() as f64;
        let expected = 1.0 / (6.0 * var);
        assert!((g.value - expected).abs() < 1e-10);
    }

    #[test]
    fn gamma_empty_input() {
        assert!(matches!(compute_gamma(&[]), Err(SvmError::EmptyInput)));
    }
}
