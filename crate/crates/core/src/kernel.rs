//! Compactly supported smoothing kernels on `[-1, 1]`.
//!
//! Every family here is a symmetric probability density that vanishes
//! outside the unit interval and is Lipschitz inside it (the uniform kernel
//! is the one exception to Lipschitz continuity at the boundary). The
//! scaled kernel is `K_h(d) = K(d / h) / h`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    #[default]
    Epanechnikov,
    Triweight,
    Uniform,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 3] = [
        KernelFamily::Epanechnikov,
        KernelFamily::Triweight,
        KernelFamily::Uniform,
    ];

    /// Unscaled kernel `K(u)`.
    pub fn eval(self, u: f64) -> f64 {
        if !(-1.0..=1.0).contains(&u) {
            return 0.0;
        }
        match self {
            KernelFamily::Epanechnikov => 0.75 * (1.0 - u * u),
            KernelFamily::Triweight => {
                let t = 1.0 - u * u;
                35.0 / 32.0 * t * t * t
            }
            KernelFamily::Uniform => 0.5,
        }
    }

    /// Closed-form `(k2, v0)` for the family.
    pub fn moments(self) -> KernelMoments {
        match self {
            KernelFamily::Epanechnikov => KernelMoments { k2: 0.2, v0: 0.6 },
            KernelFamily::Triweight => KernelMoments {
                k2: 1.0 / 9.0,
                v0: 350.0 / 429.0,
            },
            KernelFamily::Uniform => KernelMoments {
                k2: 1.0 / 3.0,
                v0: 0.5,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Epanechnikov => "epanechnikov",
            KernelFamily::Triweight => "triweight",
            KernelFamily::Uniform => "uniform",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" => Ok(KernelFamily::Epanechnikov),
            "triweight" => Ok(KernelFamily::Triweight),
            "uniform" => Ok(KernelFamily::Uniform),
            other => Err(Error::InvalidSpec(format!(
                "unknown kernel family '{other}'"
            ))),
        }
    }
}

/// Second moment `k2 = ∫u²K(u)du` and roughness `v0 = ∫K²(u)du`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelMoments {
    pub k2: f64,
    pub v0: f64,
}

/// A kernel family together with a bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    bandwidth: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidBandwidth(bandwidth));
        }
        Ok(Self { family, bandwidth })
    }

    pub fn epanechnikov(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Epanechnikov, bandwidth)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn with_bandwidth(&self, bandwidth: f64) -> Result<Self> {
        Self::new(self.family, bandwidth)
    }

    /// `K(u)` of the underlying family; independent of the bandwidth.
    pub fn eval(&self, u: f64) -> f64 {
        self.family.eval(u)
    }

    /// `K_h(d) = K(d / h) / h`.
    pub fn scaled(&self, d: f64) -> f64 {
        self.family.eval(d / self.bandwidth) / self.bandwidth
    }

    pub fn moments(&self) -> KernelMoments {
        self.family.moments()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Adaptive Simpson, used as an independent check on the closed forms.
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec<F: Fn(f64) -> f64>(
            f: &F,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            let delta = left + right - whole;
            if depth == 0 || delta.abs() <= 15.0 * tol {
                return left + right + delta / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let fa = f(a);
        let fb = f(b);
        let fm = f(0.5 * (a + b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    #[test]
    fn epanechnikov_values() {
        let k = KernelSpec::epanechnikov(1.0).unwrap();
        assert_eq!(k.eval(0.0), 0.75);
        assert_eq!(k.eval(1.0), 0.0);
        assert_eq!(k.eval(2.0), 0.0);
    }

    #[test]
    fn scaled_values() {
        let k2 = KernelSpec::epanechnikov(2.0).unwrap();
        assert_eq!(k2.scaled(0.0), 0.375);
        let khalf = KernelSpec::epanechnikov(0.5).unwrap();
        assert_eq!(khalf.scaled(1.0), 0.0);
        let k1 = KernelSpec::epanechnikov(1.0).unwrap();
        let direct = 0.75 * (1.0 - 0.5f64 * 0.5);
        assert!((k1.scaled(0.5) - direct).abs() < 1e-15);
        assert!((k1.scaled(0.5) - 0.5625).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_bandwidth() {
        assert!(KernelSpec::epanechnikov(0.0).is_err());
        assert!(KernelSpec::epanechnikov(-1.0).is_err());
        assert!(KernelSpec::epanechnikov(f64::NAN).is_err());
        assert!(KernelSpec::epanechnikov(f64::INFINITY).is_err());
    }

    #[test]
    fn symmetric_nonnegative_compact() {
        for fam in KernelFamily::ALL {
            for i in -300..=300 {
                let u = i as f64 / 100.0;
                let v = fam.eval(u);
                assert_eq!(v, fam.eval(-u), "{fam} at {u}");
                assert!(v >= 0.0);
                if u.abs() > 1.0 {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn integrates_to_one() {
        for fam in KernelFamily::ALL {
            let total = simpson(&|u| fam.eval(u), -1.0, 1.0, 1e-14);
            assert!((total - 1.0).abs() < 1e-10, "{fam}: {total}");
        }
    }

    #[test]
    fn scaled_integrates_to_one() {
        for fam in KernelFamily::ALL {
            for h in [0.1, 1.0, 10.0] {
                let spec = KernelSpec::new(fam, h).unwrap();
                let total = simpson(&|d| spec.scaled(d), -h, h, 1e-13);
                assert!((total - 1.0).abs() < 1e-8, "{fam} h={h}: {total}");
            }
        }
    }

    #[test]
    fn moments_match_quadrature() {
        for fam in KernelFamily::ALL {
            let m = fam.moments();
            let k2 = simpson(&|u| u * u * fam.eval(u), -1.0, 1.0, 1e-14);
            let v0 = simpson(&|u| fam.eval(u).powi(2), -1.0, 1.0, 1e-14);
            assert!((m.k2 - k2).abs() < 1e-10, "{fam} k2 {} vs {k2}", m.k2);
            assert!((m.v0 - v0).abs() < 1e-10, "{fam} v0 {} vs {v0}", m.v0);
            assert!(m.k2 > 0.0 && m.v0 > 0.0);
        }
        let uni = KernelFamily::Uniform.moments();
        assert!((uni.k2 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(uni.v0, 0.5);
    }

    #[test]
    fn moments_independent_of_bandwidth() {
        let a = KernelSpec::epanechnikov(0.1).unwrap().moments();
        let b = KernelSpec::epanechnikov(7.0).unwrap().moments();
        assert_eq!(a, b);
    }

    #[test]
    fn parses_family_names() {
        assert_eq!(
            "Triweight".parse::<KernelFamily>().unwrap(),
            KernelFamily::Triweight
        );
        assert!("gaussian".parse::<KernelFamily>().is_err());
    }
}
