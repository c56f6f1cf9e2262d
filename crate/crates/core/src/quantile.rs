//! Conditional quantiles, prediction intervals and the pinball loss.

use serde::Serialize;

use crate::cond_dist::ConditionalCdf;
use crate::error::{Error, Result};

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidTau(tau))
    }
}

/// `inf { z : F̂(z) >= tau }`: the first atom whose cumulative weight
/// reaches `tau`.
///
/// Works on the cumulative weights directly rather than on `F̂` itself,
/// since `F̂` excludes an atom's own mass at the atom.
pub fn quantile(f: &ConditionalCdf, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let cum = f.cumulative();
    let idx = cum.partition_point(|&c| c < tau).min(cum.len() - 1);
    Ok(f.atoms()[idx])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictionInterval {
    pub lower: f64,
    pub upper: f64,
    /// Nominal coverage `1 - alpha`.
    pub level: f64,
    pub alpha: f64,
}

impl PredictionInterval {
    pub fn contains(&self, z: f64) -> bool {
        self.lower <= z && z <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// `[q(alpha/2), q(1 - alpha/2)]`.
pub fn prediction_interval(f: &ConditionalCdf, alpha: f64) -> Result<PredictionInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok(PredictionInterval {
        lower: quantile(f, alpha / 2.0)?,
        upper: quantile(f, 1.0 - alpha / 2.0)?,
        level: 1.0 - alpha,
        alpha,
    })
}

/// `τ(z - g)·1{z > g} + (1 - τ)(g - z)·1{g >= z}`.
pub fn pinball_loss(tau: f64, z: f64, g: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(pinball(tau, z, g))
}

#[inline]
pub(crate) fn pinball(tau: f64, z: f64, g: f64) -> f64 {
    if z > g {
        tau * (z - g)
    } else {
        (1.0 - tau) * (g - z)
    }
}

/// Expected pinball loss of predicting `g` under the fitted distribution.
pub fn expected_pinball(f: &ConditionalCdf, tau: f64, g: f64) -> f64 {
    f.atoms()
        .iter()
        .zip(f.atom_weights())
        .map(|(&z, &w)| w * pinball(tau, z, g))
        .sum()
}

/// The candidate minimizing the expected pinball loss under the fitted
/// weights. Flat stretches resolve to the smallest minimizer.
pub fn argmin_check(f: &ConditionalCdf, tau: f64, candidates: &[f64]) -> Result<f64> {
    check_tau(tau)?;
    if candidates.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let losses: Vec<f64> = candidates
        .iter()
        .map(|&g| expected_pinball(f, tau, g))
        .collect();
    let best = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = f
        .atoms()
        .iter()
        .chain(candidates)
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let slack = 1e-12 * scale;
    Ok(candidates
        .iter()
        .zip(&losses)
        .filter(|(_, &l)| l <= best + slack)
        .map(|(&g, _)| g)
        .fold(f64::INFINITY, f64::min))
}
