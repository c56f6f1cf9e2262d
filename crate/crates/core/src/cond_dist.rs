//! Weighted Nadaraya-Watson estimate of the conditional distribution
//! `F(z | Y = y)`.
//!
//! Each sample contributes the effective weight `p_i K_h(Y_i - y)`, where
//! `p` are the maximum-entropy weights at `y`. The fitted estimate is the
//! step function `F̂(z | y) = Σ_{Z_i < z} w̃_i` with `w̃` the normalized
//! effective weights. Atoms with equal `Z` are merged.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::maxent::{self, MaxEntWeights};

/// Embedded pairs `(Y_i, Z_i) = (z_i, z_{i+m})`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedSample {
    regressors: Vec<f64>,
    responses: Vec<f64>,
}

impl LaggedSample {
    pub fn new(regressors: Vec<f64>, responses: Vec<f64>) -> Result<Self> {
        if regressors.len() != responses.len() {
            return Err(Error::LengthMismatch {
                expected: regressors.len(),
                got: responses.len(),
            });
        }
        if regressors.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: regressors.len(),
            });
        }
        Ok(Self {
            regressors,
            responses,
        })
    }

    pub fn regressors(&self) -> &[f64] {
        &self.regressors
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn len(&self) -> usize {
        self.regressors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regressors.is_empty()
    }

    /// The first `len` pairs.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        let len = len.min(self.len());
        Self::new(
            self.regressors[..len].to_vec(),
            self.responses[..len].to_vec(),
        )
    }
}

/// Pairs each observation with the one `horizon` steps later.
pub fn lag_embed(series: &[f64], horizon: usize) -> Result<LaggedSample> {
    if horizon == 0 {
        return Err(Error::InvalidSpec(
            "forecast horizon must be at least 1".into(),
        ));
    }
    if series.len() < horizon + 2 {
        return Err(Error::TooShort {
            needed: horizon + 2,
            got: series.len(),
        });
    }
    let n = series.len() - horizon;
    LaggedSample::new(series[..n].to_vec(), series[horizon..].to_vec())
}

/// How the per-sample probabilities `p_i` are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    #[default]
    MaxEntropy,
    /// `p_i = 1/n`: the classical Nadaraya-Watson estimator.
    Uniform,
}

/// A fitted conditional CDF. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalCdf {
    y: f64,
    spec: KernelSpec,
    sorted_z: Vec<f64>,
    atom_w: Vec<f64>,
    cum_w: Vec<f64>,
    effective_n: f64,
    #[serde(skip)]
    weights: Option<MaxEntWeights>,
}

impl ConditionalCdf {
    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn bandwidth(&self) -> f64 {
        self.spec.bandwidth()
    }

    /// Distinct response values carrying positive weight, ascending.
    pub fn atoms(&self) -> &[f64] {
        &self.sorted_z
    }

    /// Normalized weight of each atom.
    pub fn atom_weights(&self) -> &[f64] {
        &self.atom_w
    }

    /// Cumulative weight up to and including each atom. Last entry is 1.
    pub fn cumulative(&self) -> &[f64] {
        &self.cum_w
    }

    /// `1 / Σ w̃_i²` over the individual samples.
    pub fn effective_n(&self) -> f64 {
        self.effective_n
    }

    /// The maximum-entropy weights behind the fit; `None` for uniform weighting.
    pub fn weights(&self) -> Option<&MaxEntWeights> {
        self.weights.as_ref()
    }

    /// `F̂(z | y) = Σ_{Z_i < z} w̃_i`.
    pub fn eval(&self, z: f64) -> f64 {
        let below = self.sorted_z.partition_point(|&a| a < z);
        if below == 0 {
            0.0
        } else {
            self.cum_w[below - 1]
        }
    }
}

pub fn fit_cdf(samples: &LaggedSample, y: f64, spec: &KernelSpec) -> Result<ConditionalCdf> {
    fit_cdf_with(samples, y, spec, Weighting::MaxEntropy)
}

pub fn fit_cdf_with(
    samples: &LaggedSample,
    y: f64,
    spec: &KernelSpec,
    weighting: Weighting,
) -> Result<ConditionalCdf> {
    let cv = maxent::build_constraint_vector(samples, y, spec)?;
    if cv.kernel_mass().iter().all(|&k| k <= 0.0) {
        return Err(Error::NoLocalData {
            y,
            h: spec.bandwidth(),
        });
    }
    let (p, weights) = match weighting {
        Weighting::MaxEntropy => {
            let w = maxent::solve_lambda(&cv)?;
            (w.p.clone(), Some(w))
        }
        Weighting::Uniform => (vec![1.0 / samples.len() as f64; samples.len()], None),
    };

    let mut points: Vec<(f64, f64)> = samples
        .responses()
        .iter()
        .zip(p.iter().zip(cv.kernel_mass()))
        .map(|(&z, (&pi, &ki))| (z, pi * ki))
        .filter(|&(_, w)| w > 0.0)
        .collect();
    let total: f64 = points.iter().map(|&(_, w)| w).sum();
    if points.is_empty() || !(total > 0.0) {
        return Err(Error::NoLocalData {
            y,
            h: spec.bandwidth(),
        });
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));

    let effective_n = 1.0
        / points
            .iter()
            .map(|&(_, w)| (w / total).powi(2))
            .sum::<f64>();

    let mut sorted_z: Vec<f64> = Vec::new();
    let mut atom_w: Vec<f64> = Vec::new();
    for (z, w) in points {
        match sorted_z.last() {
            Some(&last) if last == z => *atom_w.last_mut().unwrap() += w,
            _ => {
                sorted_z.push(z);
                atom_w.push(w);
            }
        }
    }
    atom_w.iter_mut().for_each(|w| *w /= total);
    let mut cum_w = Vec::with_capacity(atom_w.len());
    let mut acc = 0.0;
    for &w in &atom_w {
        acc += w;
        cum_w.push(acc.min(1.0));
    }
    *cum_w.last_mut().unwrap() = 1.0;

    Ok(ConditionalCdf {
        y,
        spec: *spec,
        sorted_z,
        atom_w,
        cum_w,
        effective_n: effective_n.max(1.0),
        weights,
    })
}

pub fn cdf_eval(f: &ConditionalCdf, z: f64) -> f64 {
    f.eval(z)
}

/// Evaluates `F̂` on an ascending grid.
pub fn cdf_curve(f: &ConditionalCdf, zs: &[f64]) -> Result<Vec<(f64, f64)>> {
    if zs.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::UnsortedGrid);
    }
    Ok(zs.iter().map(|&z| (z, f.eval(z))).collect())
}
