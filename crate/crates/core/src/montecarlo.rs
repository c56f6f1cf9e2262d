//! AR(1) generators and Monte Carlo experiments for the estimator: interval
//! coverage, asymptotic normality of `F̂(z | y)` and consistency of the
//! conditional quantile.
//!
//! Replication `r` draws from its own stream seeded by
//! [`derive_seed`]`(seed, r)`, so every report is a pure function of the
//! inputs regardless of how replications are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StudentT};
use rayon::prelude::*;
use serde::Serialize;

use crate::bandwidth::{rule_of_thumb, BandwidthRule};
use crate::cond_dist::{fit_cdf, lag_embed};
use crate::error::{Error, Result};
use crate::io::{backtest_values, BacktestConfig};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::quantile::quantile;
use crate::stats;

pub const DEFAULT_BURN_IN: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Innovation {
    Gaussian { sd: f64 },
    StudentT { df: f64, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ar1Spec {
    pub phi: f64,
    pub innovation: Innovation,
    pub n: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Ar1Spec {
    /// The experiment design: `φ = 0.76`, standard normal innovations.
    pub fn reference(n: usize, seed: u64) -> Self {
        Self {
            phi: 0.76,
            innovation: Innovation::Gaussian { sd: 1.0 },
            n,
            burn_in: DEFAULT_BURN_IN,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi.abs() < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "|phi| must be < 1, got {}",
                self.phi
            )));
        }
        match self.innovation {
            Innovation::Gaussian { sd } if !(sd > 0.0 && sd.is_finite()) => {
                return Err(Error::InvalidSpec(format!(
                    "innovation sd must be positive, got {sd}"
                )))
            }
            Innovation::StudentT { df, scale } if !(df > 0.0 && scale > 0.0) => {
                return Err(Error::InvalidSpec(format!(
                    "student-t needs df > 0 and scale > 0, got df={df} scale={scale}"
                )))
            }
            _ => {}
        }
        if self.burn_in < 100 {
            return Err(Error::InvalidSpec(format!(
                "burn-in must be at least 100, got {}",
                self.burn_in
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidSpec("n must be positive".into()));
        }
        Ok(())
    }

    fn with(&self, n: usize, seed: u64) -> Self {
        Self { n, seed, ..*self }
    }

    fn gaussian_sd(&self) -> Result<f64> {
        match self.innovation {
            Innovation::Gaussian { sd } => Ok(sd),
            Innovation::StudentT { .. } => Err(Error::InvalidSpec(
                "closed-form conditional law requires Gaussian innovations".into(),
            )),
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for replication `r` of an experiment seeded with `seed`.
pub fn derive_seed(seed: u64, r: u64) -> u64 {
    splitmix64(seed ^ splitmix64(r))
}

/// `x_t = φ x_{t-1} + ε_t` started at zero; the first `burn_in` draws are
/// discarded.
pub fn simulate_ar1(spec: &Ar1Spec) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draw: Box<dyn FnMut(&mut ChaCha8Rng) -> f64> = match spec.innovation {
        Innovation::Gaussian { sd } => {
            let d = Normal::new(0.0, sd).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            Box::new(move |r| d.sample(r))
        }
        Innovation::StudentT { df, scale } => {
            let d = StudentT::new(df).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            Box::new(move |r| scale * d.sample(r))
        }
    };
    let mut x = 0.0;
    let mut out = Vec::with_capacity(spec.n);
    for t in 0..spec.burn_in + spec.n {
        x = spec.phi * x + draw(&mut rng);
        if t >= spec.burn_in {
            out.push(x);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageConfig {
    pub alpha: f64,
    pub holdout: usize,
    pub replications: usize,
    pub family: KernelFamily,
    pub bandwidth: BandwidthRule,
}

impl CoverageConfig {
    pub fn new(alpha: f64, holdout: usize, replications: usize) -> Self {
        Self {
            alpha,
            holdout,
            replications,
            family: KernelFamily::Epanechnikov,
            bandwidth: BandwidthRule::RuleOfThumb,
        }
    }
}

/// One held-out forecast of one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRecord {
    pub replication: usize,
    pub step: usize,
    pub truth: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub contained: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub replications: usize,
    pub nominal: f64,
    pub empirical_coverage: f64,
    pub mean_width: f64,
    /// `sqrt(c (1 - c) / m)` over the `m` evaluated forecasts.
    pub std_error: f64,
    pub per_step_coverage: Vec<f64>,
    pub evaluated: usize,
    pub skipped: usize,
    /// False when more than 2% of forecasts failed to fit.
    pub valid: bool,
    #[serde(skip)]
    pub records: Vec<CoverageRecord>,
}

/// Simulates `spec.n + holdout` points per replication and backtests the
/// last `holdout`, each forecast conditioned on the observed previous value.
pub fn coverage_experiment(spec: &Ar1Spec, cfg: &CoverageConfig) -> Result<CoverageReport> {
    spec.validate()?;
    if cfg.holdout == 0 || cfg.replications == 0 {
        return Err(Error::InvalidSpec(
            "holdout and replications must be positive".into(),
        ));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidAlpha(cfg.alpha));
    }
    let bt = BacktestConfig {
        holdout: cfg.holdout,
        alpha: cfg.alpha,
        horizon: 1,
        family: cfg.family,
        bandwidth: cfg.bandwidth.clone(),
    };
    let per_rep: Vec<Vec<CoverageRecord>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let series =
                simulate_ar1(&spec.with(spec.n + cfg.holdout, derive_seed(spec.seed, r as u64)))?;
            let report = backtest_values(&series, &bt)?;
            Ok(report
                .rows
                .iter()
                .enumerate()
                .map(|(step, row)| CoverageRecord {
                    replication: r,
                    step,
                    truth: row.truth,
                    lower: row.lower,
                    upper: row.upper,
                    contained: row.contained,
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let records: Vec<CoverageRecord> = per_rep.into_iter().flatten().collect();
    let mut hits = 0usize;
    let mut evaluated = 0usize;
    let mut width = 0.0;
    let mut step_hits = vec![0usize; cfg.holdout];
    let mut step_n = vec![0usize; cfg.holdout];
    for rec in &records {
        if let (Some(c), Some(lo), Some(hi)) = (rec.contained, rec.lower, rec.upper) {
            evaluated += 1;
            step_n[rec.step] += 1;
            if c {
                hits += 1;
                step_hits[rec.step] += 1;
            }
            width += hi - lo;
        }
    }
    let skipped = records.len() - evaluated;
    let coverage = if evaluated > 0 {
        hits as f64 / evaluated as f64
    } else {
        0.0
    };
    Ok(CoverageReport {
        replications: cfg.replications,
        nominal: 1.0 - cfg.alpha,
        empirical_coverage: coverage,
        mean_width: if evaluated > 0 {
            width / evaluated as f64
        } else {
            f64::NAN
        },
        std_error: if evaluated > 0 {
            (coverage * (1.0 - coverage) / evaluated as f64).sqrt()
        } else {
            f64::NAN
        },
        per_step_coverage: step_hits
            .iter()
            .zip(&step_n)
            .map(|(&h, &n)| if n > 0 { h as f64 / n as f64 } else { f64::NAN })
            .collect(),
        evaluated,
        skipped,
        valid: evaluated > 0 && (skipped as f64) < 0.02 * records.len() as f64,
        records,
    })
}

/// Conditional law of the Gaussian AR(1): `Z | Y = y ~ N(φ y, σ²)`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianAr1Truth {
    pub phi: f64,
    pub sd: f64,
}

impl GaussianAr1Truth {
    pub fn from_spec(spec: &Ar1Spec) -> Result<Self> {
        Ok(Self {
            phi: spec.phi,
            sd: spec.gaussian_sd()?,
        })
    }

    fn standardized(&self, z: f64, y: f64) -> f64 {
        (z - self.phi * y) / self.sd
    }

    pub fn cdf(&self, z: f64, y: f64) -> f64 {
        stats::std_normal_cdf(self.standardized(z, y))
    }

    /// `∂²F(z | y) / ∂y²`.
    pub fn cdf_curvature(&self, z: f64, y: f64) -> f64 {
        let u = self.standardized(z, y);
        let r = self.phi / self.sd;
        -r * r * u * stats::std_normal_pdf(u)
    }

    pub fn quantile(&self, tau: f64, y: f64) -> f64 {
        self.phi * y + self.sd * stats::std_normal_quantile(tau)
    }

    /// Stationary marginal density of the regressor.
    pub fn marginal_density(&self, y: f64) -> f64 {
        let s = self.sd / (1.0 - self.phi * self.phi).sqrt();
        stats::std_normal_pdf(y / s) / s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityReport {
    pub sample_count: usize,
    pub mean: f64,
    pub variance: f64,
    pub ks_statistic: f64,
    pub mean_bandwidth: f64,
    pub skipped: usize,
    pub standardized_errors: Vec<f64>,
}

/// Standardized estimation error of `F̂(z | y)` across replications:
/// `sqrt(n h) [F̂ - F - h² k2 F''/2] / sqrt(v0 F (1 - F) / f_Y(y))`, with the
/// rule-of-thumb bandwidth per replication.
pub fn normality_experiment(
    spec: &Ar1Spec,
    y: f64,
    z: f64,
    replications: usize,
    family: KernelFamily,
) -> Result<NormalityReport> {
    spec.validate()?;
    let truth = GaussianAr1Truth::from_spec(spec)?;
    if replications < 2 {
        return Err(Error::InvalidSpec("need at least two replications".into()));
    }
    let f_true = truth.cdf(z, y);
    let curvature = truth.cdf_curvature(z, y);
    let f_y = truth.marginal_density(y);
    let m = family.moments();
    let sd = (m.v0 * f_true * (1.0 - f_true) / f_y).sqrt();

    let outcomes: Vec<Option<(f64, f64)>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let series = simulate_ar1(&spec.with(spec.n, derive_seed(spec.seed, r as u64)))?;
            let samples = lag_embed(&series, 1)?;
            let h = rule_of_thumb(samples.regressors())?;
            let fit = match fit_cdf(&samples, y, &KernelSpec::new(family, h)?) {
                Ok(f) => f,
                Err(Error::NoLocalData { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let n = samples.len() as f64;
            let bias = 0.5 * h * h * m.k2 * curvature;
            let stat = (n * h).sqrt() * (fit.eval(z) - f_true - bias) / sd;
            Ok(Some((stat, h)))
        })
        .collect::<Result<_>>()?;

    let kept: Vec<(f64, f64)> = outcomes.iter().flatten().copied().collect();
    let errors: Vec<f64> = kept.iter().map(|&(s, _)| s).collect();
    if errors.len() < 2 {
        return Err(Error::InvalidSpec("too few successful replications".into()));
    }
    Ok(NormalityReport {
        sample_count: errors.len(),
        mean: stats::mean(&errors),
        variance: stats::variance(&errors),
        ks_statistic: stats::ks_distance_std_normal(&errors),
        mean_bandwidth: kept.iter().map(|&(_, h)| h).sum::<f64>() / kept.len() as f64,
        skipped: replications - errors.len(),
        standardized_errors: errors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub tau: f64,
    pub y: f64,
    pub true_quantile: f64,
    pub ns: Vec<usize>,
    pub rmse: Vec<f64>,
    pub skipped: Vec<usize>,
    /// RMSE strictly decreases along `ns`.
    pub strictly_decreasing: bool,
    /// RMSE never increases along `ns` by more than the tolerance.
    pub nonincreasing: bool,
}

fn check_increasing(ns: &[usize]) -> Result<()> {
    if ns.is_empty() || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSpec(
            "sample sizes must be nonempty and increasing".into(),
        ));
    }
    Ok(())
}

/// RMSE of `q̂_τ(· | y)` against `φ y + σ Φ⁻¹(τ)` for each sample size.
pub fn consistency_experiment(
    spec: &Ar1Spec,
    tau: f64,
    y: f64,
    ns: &[usize],
    replications: usize,
    family: KernelFamily,
) -> Result<ConsistencyReport> {
    spec.validate()?;
    check_increasing(ns)?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidTau(tau));
    }
    if replications == 0 {
        return Err(Error::InvalidSpec("replications must be positive".into()));
    }
    let truth = GaussianAr1Truth::from_spec(spec)?;
    let target = truth.quantile(tau, y);

    let mut rmse = Vec::with_capacity(ns.len());
    let mut skipped = Vec::with_capacity(ns.len());
    for &n in ns {
        let base = derive_seed(spec.seed, n as u64);
        let errs: Vec<Option<f64>> = (0..replications)
            .into_par_iter()
            .map(|r| {
                let series = simulate_ar1(&spec.with(n + 1, derive_seed(base, r as u64)))?;
                let samples = lag_embed(&series, 1)?;
                let h = rule_of_thumb(samples.regressors())?;
                match fit_cdf(&samples, y, &KernelSpec::new(family, h)?) {
                    Ok(f) => Ok(Some(quantile(&f, tau)? - target)),
                    Err(Error::NoLocalData { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<_>>()?;
        let ok: Vec<f64> = errs.iter().flatten().copied().collect();
        skipped.push(replications - ok.len());
        rmse.push((ok.iter().map(|e| e * e).sum::<f64>() / ok.len() as f64).sqrt());
    }
    let strictly_decreasing = rmse.windows(2).all(|w| w[1] < w[0]);
    let nonincreasing = rmse.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    Ok(ConsistencyReport {
        tau,
        y,
        true_quantile: target,
        ns: ns.to_vec(),
        rmse,
        skipped,
        strictly_decreasing,
        nonincreasing,
    })
}

/// Mean absolute deviation between `F̂(· | y)` and the true conditional CDF
/// on a grid of `φy ± 3σ`, averaged over replications, for each sample size.
pub fn cdf_error_experiment(
    spec: &Ar1Spec,
    y: f64,
    ns: &[usize],
    replications: usize,
    family: KernelFamily,
) -> Result<Vec<f64>> {
    spec.validate()?;
    check_increasing(ns)?;
    let truth = GaussianAr1Truth::from_spec(spec)?;
    let grid: Vec<f64> = (0..=60)
        .map(|i| truth.phi * y + truth.sd * (-3.0 + 0.1 * i as f64))
        .collect();
    ns.iter()
        .map(|&n| {
            let base = derive_seed(spec.seed, n as u64);
            let per_rep: Vec<f64> = (0..replications)
                .into_par_iter()
                .map(|r| {
                    let series = simulate_ar1(&spec.with(n + 1, derive_seed(base, r as u64)))?;
                    let samples = lag_embed(&series, 1)?;
                    let h = rule_of_thumb(samples.regressors())?;
                    let f = fit_cdf(&samples, y, &KernelSpec::new(family, h)?)?;
                    Ok(grid
                        .iter()
                        .map(|&z| (f.eval(z) - truth.cdf(z, y)).abs())
                        .sum::<f64>()
                        / grid.len() as f64)
                })
                .collect::<Result<_>>()?;
            Ok(stats::mean(&per_rep))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_noise_has_no_autocorrelation() {
        let spec = Ar1Spec {
            phi: 0.0,
            ..Ar1Spec::reference(5000, 7)
        };
        let x = simulate_ar1(&spec).unwrap();
        assert_eq!(x.len(), 5000);
        let m = stats::mean(&x);
        let num: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
        let den: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
        assert!((num / den).abs() < 3.0 / (x.len() as f64).sqrt());
    }

    #[test]
    fn stationary_variance() {
        let x = simulate_ar1(&Ar1Spec::reference(20_000, 13)).unwrap();
        let target = 1.0 / (1.0 - 0.76f64 * 0.76);
        assert!((target - 2.3674).abs() < 1e-4);
        assert!(((stats::variance(&x) - target) / target).abs() < 0.1);
    }

    #[test]
    fn simulation_is_deterministic() {
        let spec = Ar1Spec::reference(300, 99);
        assert_eq!(simulate_ar1(&spec).unwrap(), simulate_ar1(&spec).unwrap());
        let other = Ar1Spec::reference(300, 100);
        assert_ne!(simulate_ar1(&spec).unwrap(), simulate_ar1(&other).unwrap());
    }

    #[test]
    fn rejects_invalid_specs() {
        let bad_phi = Ar1Spec {
            phi: 1.0,
            ..Ar1Spec::reference(10, 0)
        };
        assert!(matches!(simulate_ar1(&bad_phi), Err(Error::InvalidSpec(_))));
        let short_burn = Ar1Spec {
            burn_in: 10,
            ..Ar1Spec::reference(10, 0)
        };
        assert!(simulate_ar1(&short_burn).is_err());
        let bad_t = Ar1Spec {
            innovation: Innovation::StudentT {
                df: 0.0,
                scale: 1.0,
            },
            ..Ar1Spec::reference(10, 0)
        };
        assert!(simulate_ar1(&bad_t).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: Vec<u64> = (0..1000).map(|r| derive_seed(42, r)).collect();
        let mut uniq = seeds.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), seeds.len());
    }

    #[test]
    fn truth_closed_forms() {
        let t = GaussianAr1Truth { phi: 0.76, sd: 1.0 };
        assert_eq!(t.quantile(0.5, 0.0), 0.0);
        assert_eq!(t.cdf_curvature(0.0, 0.0), 0.0);
        let t0 = GaussianAr1Truth { phi: 0.0, sd: 1.0 };
        assert_eq!(t0.quantile(0.9, -3.0), t0.quantile(0.9, 4.0));
        // Curvature by finite differences in y.
        let (z, y, d) = (0.5, 0.2, 1e-4);
        let fd = (t.cdf(z, y + d) - 2.0 * t.cdf(z, y) + t.cdf(z, y - d)) / (d * d);
        assert!((fd - t.cdf_curvature(z, y)).abs() < 1e-5);
    }

    #[test]
    fn coverage_report_is_consistent() {
        let spec = Ar1Spec::reference(300, 1);
        let cfg = CoverageConfig::new(0.1, 3, 20);
        let rep = coverage_experiment(&spec, &cfg).unwrap();
        assert_eq!(rep.records.len(), 60);
        assert_eq!(rep.evaluated + rep.skipped, 60);
        let c = rep.empirical_coverage;
        assert!((0.0..=1.0).contains(&c));
        assert!((rep.std_error - (c * (1.0 - c) / rep.evaluated as f64).sqrt()).abs() < 1e-15);
        assert_eq!(rep.per_step_coverage.len(), 3);
        assert_eq!(rep, coverage_experiment(&spec, &cfg).unwrap());
    }

    #[test]
    fn extreme_alpha_undercovers() {
        let spec = Ar1Spec::reference(300, 2);
        let cfg = CoverageConfig::new(0.99999, 5, 40);
        let rep = coverage_experiment(&spec, &cfg).unwrap();
        assert!(rep.empirical_coverage < 0.2, "{}", rep.empirical_coverage);
    }

    #[test]
    fn median_curvature_vanishes() {
        let t = GaussianAr1Truth { phi: 0.76, sd: 1.0 };
        assert_eq!(t.cdf_curvature(t.quantile(0.5, 1.3), 1.3), 0.0);
    }

    #[test]
    fn consistency_rejects_bad_inputs() {
        let spec = Ar1Spec::reference(10, 0);
        assert!(consistency_experiment(
            &spec,
            0.5,
            0.0,
            &[800, 200],
            5,
            KernelFamily::Epanechnikov
        )
        .is_err());
        let heavy = Ar1Spec {
            innovation: Innovation::StudentT {
                df: 3.0,
                scale: 1.0,
            },
            ..spec
        };
        assert!(
            consistency_experiment(&heavy, 0.5, 0.0, &[100], 5, KernelFamily::Epanechnikov)
                .is_err()
        );
    }

    #[test]
    fn cdf_error_shrinks_with_n() {
        let spec = Ar1Spec::reference(1, 2024);
        let errs = cdf_error_experiment(
            &spec,
            0.0,
            &[200, 800, 3200],
            50,
            KernelFamily::Epanechnikov,
        )
        .unwrap();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }
}
