//! Maximum-entropy weights under the local-linearity constraint.
//!
//! Given `a_i = (Y_i - y) K_h(Y_i - y)` the weights maximize
//! `-Σ p_i log p_i` subject to `p_i >= 0`, `Σ p_i = 1` and `Σ p_i a_i = 0`.
//! Stationarity of the Lagrangian gives the exponential family
//! `p_i = exp(-1 + k + λ a_i)`, with `λ` the root of
//! `g(λ) = Σ a_i exp(λ a_i)` and `exp(1 - k) = Σ exp(λ a_i)`.
//!
//! `g` is strictly increasing (`g'(λ) = Σ a_i² exp(λ a_i) > 0`), so the root
//! is unique whenever the nonzero `a_i` take both signs. The solver works on
//! the normalized form `g(λ) / Σ exp(λ a_i) = Σ p_i(λ) a_i`, which has the
//! same root and never overflows.

use serde::{Deserialize, Serialize};

use crate::cond_dist::LaggedSample;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

const MAX_ITER: usize = 500;
const MAX_EXPANSIONS: usize = 2000;

/// The constrained quantities `a_i` together with the kernel mass of each
/// regressor at the conditioning point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintVector {
    y: f64,
    a: Vec<f64>,
    kernel: Vec<f64>,
}

impl ConstraintVector {
    /// Builds a constraint vector from raw `a_i`. Kernel mass is taken to be
    /// positive exactly where `a_i != 0`.
    pub fn from_values(a: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::EmptyInput);
        }
        let kernel = a
            .iter()
            .map(|&v| if v != 0.0 { 1.0 } else { 0.0 })
            .collect();
        Ok(Self { y: 0.0, a, kernel })
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn values(&self) -> &[f64] {
        &self.a
    }

    /// `K_h(Y_i - y)` for each index.
    pub fn kernel_mass(&self) -> &[f64] {
        &self.kernel
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Number of indices with `a_i != 0` or positive kernel mass.
    pub fn active_count(&self) -> usize {
        self.a
            .iter()
            .zip(&self.kernel)
            .filter(|(&a, &k)| a != 0.0 || k > 0.0)
            .count()
    }

    /// `max(1, max |a_i|)`, the scale used by residual tolerances.
    pub fn scale(&self) -> f64 {
        self.a.iter().fold(1.0f64, |m, v| m.max(v.abs()))
    }
}

/// Computes `a_i = (Y_i - y) K_h(Y_i - y)` for every sample.
pub fn build_constraint_vector(
    samples: &LaggedSample,
    y: f64,
    spec: &KernelSpec,
) -> Result<ConstraintVector> {
    build_from_regressors(samples.regressors(), y, spec)
}

pub(crate) fn build_from_regressors(
    regressors: &[f64],
    y: f64,
    spec: &KernelSpec,
) -> Result<ConstraintVector> {
    if regressors.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut a = Vec::with_capacity(regressors.len());
    let mut kernel = Vec::with_capacity(regressors.len());
    for &yi in regressors {
        let d = yi - y;
        let k = spec.scaled(d);
        a.push(d * k);
        kernel.push(k);
    }
    Ok(ConstraintVector { y, a, kernel })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightStatus {
    Solved,
    DegenerateAllZero,
    NoInteriorRoot,
}

impl WeightStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightStatus::Solved => "solved",
            WeightStatus::DegenerateAllZero => "degenerate_all_zero",
            WeightStatus::NoInteriorRoot => "no_interior_root",
        }
    }
}

/// Solved multipliers and the resulting probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxEntWeights {
    pub p: Vec<f64>,
    pub lambda: f64,
    pub k: f64,
    /// `|Σ p_i a_i|`.
    pub residual: f64,
    pub status: WeightStatus,
}

impl MaxEntWeights {
    pub fn entropy(&self) -> f64 {
        entropy(&self.p)
    }
}

pub(crate) fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// Tilted moments of `a` at `lambda`: `(Σ p a, Σ p (a - mean)², log Σ e^{λa})`.
fn tilted(a: &[f64], lambda: f64) -> (f64, f64, f64) {
    let shift = a
        .iter()
        .map(|&v| lambda * v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut first = 0.0;
    for &v in a {
        let e = (lambda * v - shift).exp();
        total += e;
        first += v * e;
    }
    let mean = first / total;
    let var = a
        .iter()
        .map(|&v| {
            let e = (lambda * v - shift).exp();
            (v - mean) * (v - mean) * e
        })
        .sum::<f64>()
        / total;
    (mean, var, shift + total.ln())
}

fn uniform_over(mask: &[bool]) -> (Vec<f64>, usize) {
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        let n = mask.len();
        return (vec![1.0 / n as f64; n], n);
    }
    let w = 1.0 / count as f64;
    (
        mask.iter().map(|&m| if m { w } else { 0.0 }).collect(),
        count,
    )
}

fn residual_of(p: &[f64], a: &[f64]) -> f64 {
    p.iter().zip(a).map(|(p, a)| p * a).sum::<f64>().abs()
}

/// Solves for `λ` and `k` and returns the maximum-entropy weights.
///
/// Degenerate inputs do not fail: when every `a_i` is zero the constraint is
/// vacuous and the weights are uniform over indices with kernel mass; when
/// the nonzero `a_i` share one sign no positive weights satisfy the
/// constraint and the result is uniform over kernel-support indices, flagged
/// [`WeightStatus::NoInteriorRoot`].
pub fn solve_lambda(cv: &ConstraintVector) -> Result<MaxEntWeights> {
    let a = cv.values();
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    let has_pos = a.iter().any(|&v| v > 0.0);
    let has_neg = a.iter().any(|&v| v < 0.0);
    let support: Vec<bool> = cv
        .kernel_mass()
        .iter()
        .zip(a)
        .map(|(&k, &v)| k > 0.0 || v != 0.0)
        .collect();

    if !(has_pos && has_neg) {
        let status = if has_pos || has_neg {
            WeightStatus::NoInteriorRoot
        } else {
            WeightStatus::DegenerateAllZero
        };
        let (p, count) = uniform_over(&support);
        let residual = residual_of(&p, a);
        return Ok(MaxEntWeights {
            p,
            lambda: 0.0,
            k: 1.0 - (count as f64).ln(),
            residual,
            status,
        });
    }

    let lambda = find_root(a, cv.scale());
    let (_, _, log_norm) = tilted(a, lambda);
    let p: Vec<f64> = a.iter().map(|&v| (lambda * v - log_norm).exp()).collect();
    let residual = residual_of(&p, a);
    Ok(MaxEntWeights {
        p,
        lambda,
        k: 1.0 - log_norm,
        residual,
        status: WeightStatus::Solved,
    })
}

/// Safeguarded Newton on `m(λ) = Σ p_i(λ) a_i` inside an expanding bracket.
/// Requires both signs among `a`.
fn find_root(a: &[f64], scale: f64) -> f64 {
    let tol = 1e-12 * scale;
    let (m0, var0, _) = tilted(a, 0.0);
    if m0.abs() <= tol && !((m0 / var0).abs() > 1e-13) {
        return 0.0;
    }
    let amax = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut step = 1.0 / amax;
    let (mut lo, mut hi) = if m0 > 0.0 { (-step, 0.0) } else { (0.0, step) };
    for _ in 0..MAX_EXPANSIONS {
        let probe = if m0 > 0.0 { lo } else { hi };
        let (m, _, _) = tilted(a, probe);
        if (m0 > 0.0 && m <= 0.0) || (m0 < 0.0 && m >= 0.0) {
            break;
        }
        if m0 > 0.0 {
            hi = lo;
            lo -= step;
        } else {
            lo = hi;
            hi += step;
        }
        step *= 2.0;
    }

    let mut lambda = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let (m, var, _) = tilted(a, lambda);
        // A small residual alone is not enough when var is tiny: also wait
        // for the Newton correction to be negligible.
        if m.abs() <= tol && !((m / var).abs() > 1e-13 * (1.0 + lambda.abs())) {
            break;
        }
        if m > 0.0 {
            hi = lambda;
        } else {
            lo = lambda;
        }
        if hi - lo <= 1e-14 * (1.0 + lambda.abs()) {
            break;
        }
        let newton = lambda - m / var;
        lambda = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    lambda
}

/// Residuals of the three weight constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub min_p: f64,
    pub sum_residual: f64,
    pub constraint_residual: f64,
}

impl ConstraintReport {
    /// True when all three constraints hold at the solver's tolerances.
    pub fn satisfied(&self, scale: f64) -> bool {
        self.min_p >= 0.0 && self.sum_residual <= 1e-12 && self.constraint_residual <= 1e-10 * scale
    }
}

pub fn verify_constraints(w: &MaxEntWeights, cv: &ConstraintVector) -> Result<ConstraintReport> {
    if w.p.len() != cv.len() {
        return Err(Error::LengthMismatch {
            expected: cv.len(),
            got: w.p.len(),
        });
    }
    let min_p = w.p.iter().copied().fold(f64::INFINITY, f64::min);
    let sum_residual = (w.p.iter().sum::<f64>() - 1.0).abs();
    Ok(ConstraintReport {
        min_p,
        sum_residual,
        constraint_residual: residual_of(&w.p, cv.values()),
    })
}
