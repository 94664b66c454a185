//! Sequential Minimal Optimization for the soft-margin SVM dual.
//!
//! Platt-style solver: the outer loop alternates full sweeps with sweeps
//! over non-bound multipliers, the second index is picked by the
//! second-choice heuristic (maximize `|E1 - E2|`) with randomized-start
//! fallbacks, and the error cache is kept current for every point. The
//! randomness is a seeded [`Rng64`], so training is bit-reproducible.

use super::kernel::rbf_kernel_unchecked;
use super::{BinarySvmModel, SvmConfig, SvmError};
use crate::rng::Rng64;

/// Multipliers below this are treated as zero when pruning support vectors.
pub const SV_ALPHA_THRESHOLD: f64 = 1e-8;

/// Relative step floor: pair updates smaller than this are rejected.
const STEP_EPS: f64 = 1e-12;

/// Training outcome. `alphas` is the full multiplier vector before support
/// vectors are pruned (the dual-feasibility invariant is stated over it).
#[derive(Debug, Clone)]
pub struct SmoOutcome {
    pub model: BinarySvmModel,
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub iterations: u64,
    /// The safety cap fired; the model is the best found so far.
    pub cap_exceeded: bool,
}

/// Train a binary soft-margin SVM with labels in `{-1.0, +1.0}`.
pub fn smo_train_binary(
    x: &[Vec<f64>],
    y: &[f64],
    cfg: &SvmConfig,
) -> Result<SmoOutcome, SvmError> {
    if x.is_empty() || x[0].is_empty() {
        return Err(SvmError::EmptyInput);
    }
    if x.len() != y.len() {
        return Err(SvmError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let dim = x[0].len();
    for v in x {
        if v.len() != dim {
            return Err(SvmError::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
    }
    for &label in y {
        if label != 1.0 && label != -1.0 {
            return Err(SvmError::InvalidLabel(label));
        }
    }
    if !y.iter().any(|&l| l > 0.0) || !y.iter().any(|&l| l < 0.0) {
        return Err(SvmError::SingleClassInput);
    }
    cfg.validate()?;
    let gamma = cfg.resolve_gamma(x)?;

    let mut solver = Solver::new(x, y, gamma, cfg);
    let cap_exceeded = solver.run();
    solver.into_outcome(x, gamma, cap_exceeded)
}

struct Solver<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    gram: Vec<f64>,
    n: usize,
    c: f64,
    tol: f64,
    alphas: Vec<f64>,
    /// E_i = f(x_i) - y_i, current for every point.
    errors: Vec<f64>,
    bias: f64,
    rng: Rng64,
    iterations: u64,
    max_iterations: u64,
    max_sweeps: u64,
}

impl<'a> Solver<'a> {
    fn new(x: &'a [Vec<f64>], y: &'a [f64], gamma: f64, cfg: &SvmConfig) -> Self {
        let n = x.len();
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            gram[i * n + i] = 1.0;
            for j in 0..i {
                let k = rbf_kernel_unchecked(&x[i], &x[j], gamma);
                gram[i * n + j] = k;
                gram[j * n + i] = k;
            }
        }
        let max_iterations = cfg
            .max_iterations
            .unwrap_or(10 * n as u64 * cfg.max_passes as u64);
        Solver {
            x,
            y,
            gram,
            n,
            c: cfg.c,
            tol: cfg.tol,
            alphas: vec![0.0; n],
            errors: y.iter().map(|&yi| -yi).collect(),
            bias: 0.0,
            rng: Rng64::derive(cfg.seed, "smo"),
            iterations: 0,
            max_iterations,
            max_sweeps: 10 * cfg.max_passes as u64,
        }
    }

    #[inline]
    fn k(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.n + j]
    }

    #[inline]
    fn non_bound(&self, i: usize) -> bool {
        self.alphas[i] > 0.0 && self.alphas[i] < self.c
    }

    /// Returns true when the iteration cap fired.
    fn run(&mut self) -> bool {
        let mut num_changed = 0usize;
        let mut examine_all = true;
        let mut sweeps = 0u64;
        while num_changed > 0 || examine_all {
            num_changed = 0;
            for i in 0..self.n {
                if examine_all || self.non_bound(i) {
                    num_changed += self.examine(i) as usize;
                }
                if self.iterations >= self.max_iterations {
                    return true;
                }
            }
            if examine_all {
                examine_all = false;
            } else if num_changed == 0 {
                examine_all = true;
            }
            sweeps += 1;
            if sweeps >= self.max_sweeps {
                return true;
            }
        }
        false
    }

    fn examine(&mut self, i2: usize) -> bool {
        let y2 = self.y[i2];
        let alph2 = self.alphas[i2];
        let e2 = self.errors[i2];
        let r2 = e2 * y2;
        let violates = (r2 < -self.tol && alph2 < self.c) || (r2 > self.tol && alph2 > 0.0);
        if !violates {
            return false;
        }
        // second-choice heuristic: largest |E1 - E2| among non-bound points
        let mut best: Option<(usize, f64)> = None;
        for i1 in 0..self.n {
            if i1 != i2 && self.non_bound(i1) {
                let gap = (self.errors[i1] - e2).abs();
                if best.map_or(true, |(_, g)| gap > g) {
                    best = Some((i1, gap));
                }
            }
        }
        if let Some((i1, _)) = best {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        // fall back: sweep non-bound then all, from a random start
        let start = self.rng.below(self.n);
        for offset in 0..self.n {
            let i1 = (start + offset) % self.n;
            if i1 != i2 && self.non_bound(i1) && self.take_step(i1, i2) {
                return true;
            }
        }
        let start = self.rng.below(self.n);
        for offset in 0..self.n {
            let i1 = (start + offset) % self.n;
            if i1 != i2 && self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        self.iterations += 1;
        let (alph1, alph2) = (self.alphas[i1], self.alphas[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (e1, e2) = (self.errors[i1], self.errors[i2]);
        let s = y1 * y2;
        let (low, high) = if y1 != y2 {
            ((alph2 - alph1).max(0.0), (self.c + alph2 - alph1).min(self.c))
        } else {
            ((alph1 + alph2 - self.c).max(0.0), (alph1 + alph2).min(self.c))
        };
        if low >= high {
            return false;
        }
        let (k11, k12, k22) = (self.k(i1, i1), self.k(i1, i2), self.k(i2, i2));
        let eta = k11 + k22 - 2.0 * k12;
        let mut a2 = if eta > 0.0 {
            (alph2 + y2 * (e1 - e2) / eta).clamp(low, high)
        } else {
            // duplicate points: compare the restricted objective at the ends
            let f1 = y1 * (e1 - self.bias) - alph1 * k11 - s * alph2 * k12;
            let f2 = y2 * (e2 - self.bias) - s * alph1 * k12 - alph2 * k22;
            let l1 = alph1 + s * (alph2 - low);
            let h1 = alph1 + s * (alph2 - high);
            let obj_low = l1 * f1 + low * f2
                + 0.5 * l1 * l1 * k11
                + 0.5 * low * low * k22
                + s * low * l1 * k12;
            let obj_high = h1 * f1 + high * f2
                + 0.5 * h1 * h1 * k11
                + 0.5 * high * high * k22
                + s * high * h1 * k12;
            if obj_low < obj_high - STEP_EPS {
                low
            } else if obj_low > obj_high + STEP_EPS {
                high
            } else {
                return false;
            }
        };
        if (a2 - alph2).abs() < STEP_EPS * (a2 + alph2 + STEP_EPS) {
            return false;
        }
        let mut a1 = alph1 + s * (alph2 - a2);
        // guard against rounding pushing a1 past the box
        if a1 < 0.0 {
            a2 += s * a1;
            a1 = 0.0;
        } else if a1 > self.c {
            a2 += s * (a1 - self.c);
            a1 = self.c;
        }
        let d1 = y1 * (a1 - alph1);
        let d2 = y2 * (a2 - alph2);
        let b1 = self.bias - e1 - d1 * k11 - d2 * k12;
        let b2 = self.bias - e2 - d1 * k12 - d2 * k22;
        let new_bias = if a1 > 0.0 && a1 < self.c {
            b1
        } else if a2 > 0.0 && a2 < self.c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let delta_b = new_bias - self.bias;
        for k in 0..self.n {
            self.errors[k] += d1 * self.k(i1, k) + d2 * self.k(i2, k) + delta_b;
        }
        self.alphas[i1] = a1;
        self.alphas[i2] = a2;
        self.bias = new_bias;
        true
    }

    fn into_outcome(
        self,
        x: &[Vec<f64>],
        gamma: f64,
        cap_exceeded: bool,
    ) -> Result<SmoOutcome, SvmError> {
        let mut support_vectors = Vec::new();
        let mut sv_alphas = Vec::new();
        let mut sv_labels = Vec::new();
        for (i, &a) in self.alphas.iter().enumerate() {
            if a > SV_ALPHA_THRESHOLD {
                support_vectors.push(x[i].clone());
                sv_alphas.push(a);
                sv_labels.push(self.y[i]);
            }
        }
        if support_vectors.is_empty() {
            return Err(SvmError::NoSupportVectors);
        }
        Ok(SmoOutcome {
            model: BinarySvmModel {
                support_vectors,
                alphas: sv_alphas,
                sv_labels,
                bias: self.bias,
                gamma,
            },
            alphas: self.alphas,
            bias: self.bias,
            iterations: self.iterations,
            cap_exceeded,
        })
    }
}

/// Dual objective `sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij`
/// for a full multiplier vector over the training set.
pub fn dual_objective(x: &[Vec<f64>], y: &[f64], alphas: &[f64], gamma: f64) -> f64 {
    let n = x.len();
    let mut obj: f64 = alphas.iter().sum();
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            if alphas[j] == 0.0 {
                continue;
            }
            let k = rbf_kernel_unchecked(&x[i], &x[j], gamma);
            obj -= 0.5 * alphas[i] * alphas[j] * y[i] * y[j] * k;
        }
    }
    obj
}

/// Count training points whose KKT case is violated by more than `tol`.
pub fn kkt_violations(
    x: &[Vec<f64>],
    y: &[f64],
    alphas: &[f64],
    bias: f64,
    gamma: f64,
    c: f64,
    tol: f64,
) -> usize {
    let n = x.len();
    let mut violations = 0;
    for i in 0..n {
        let mut f = bias;
        for j in 0..n {
            if alphas[j] > 0.0 {
                f += alphas[j] * y[j] * rbf_kernel_unchecked(&x[j], &x[i], gamma);
            }
        }
        let margin = y[i] * f - 1.0;
        let ok = if alphas[i] <= SV_ALPHA_THRESHOLD {
            margin >= -tol
        } else if alphas[i] >= c - SV_ALPHA_THRESHOLD {
            margin <= tol
        } else {
            margin.abs() <= tol
        };
        if !ok {
            violations += 1;
        }
    }
    violations
}
