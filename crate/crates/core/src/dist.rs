//! Standardized innovation distributions (zero mean, unit variance).
//!
//! The skewed Student-t is Hansen's form. With
//!
//! ```text
//! c = Γ((ν+1)/2) / (√(π(ν−2)) Γ(ν/2))
//! a = 4λc(ν−2)/(ν−1)
//! b = √(1 + 3λ² − a²)
//! ```
//!
//! the density is `b·c·(1 + ((bz+a)/(1∓λ))²/(ν−2))^(−(ν+1)/2)`, taking `1−λ`
//! below the switch point `z = −a/b` and `1+λ` above it. At `λ = 0` it reduces
//! exactly to the variance-standardized Student-t.

use std::f64::consts::{FRAC_2_PI, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::{beta::beta_reg, erf::erfc, gamma::ln_gamma};
use thiserror::Error;

use crate::rng;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;
const QUANTILE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("degrees of freedom must exceed 2, got {0}")]
    InvalidNu(f64),
    #[error("skewness must lie in (-1, 1), got {0}")]
    InvalidLambda(f64),
    #[error("non-finite argument {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnovationDist {
    Normal,
    StudentT { nu: f64 },
    SkewT { nu: f64, lambda: f64 },
}

impl InnovationDist {
    pub fn student_t(nu: f64) -> Result<Self, DistError> {
        let d = Self::StudentT { nu };
        d.validate()?;
        Ok(d)
    }

    pub fn skew_t(nu: f64, lambda: f64) -> Result<Self, DistError> {
        let d = Self::SkewT { nu, lambda };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), DistError> {
        match *self {
            Self::Normal => Ok(()),
            Self::StudentT { nu } => check_nu(nu),
            Self::SkewT { nu, lambda } => {
                check_nu(nu)?;
                if lambda > -1.0 && lambda < 1.0 {
                    Ok(())
                } else {
                    Err(DistError::InvalidLambda(lambda))
                }
            }
        }
    }

    /// Short label used in documents and on the command line.
    pub fn label(&self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::StudentT { .. } => "t",
            Self::SkewT { .. } => "skewt",
        }
    }

    /// Number of free shape parameters (ν, λ).
    pub fn n_shape(&self) -> usize {
        match self {
            Self::Normal => 0,
            Self::StudentT { .. } => 1,
            Self::SkewT { .. } => 2,
        }
    }

    pub fn nu(&self) -> Option<f64> {
        match *self {
            Self::Normal => None,
            Self::StudentT { nu } | Self::SkewT { nu, .. } => Some(nu),
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            Self::SkewT { lambda, .. } => Some(lambda),
            _ => None,
        }
    }

    /// Precomputes the normalizing constants once for repeated evaluation.
    pub fn density(&self) -> Result<Density, DistError> {
        self.validate()?;
        Ok(Density::new(*self))
    }

    /// `ln g(z)` of the standardized density.
    pub fn log_density(&self, z: f64) -> Result<f64, DistError> {
        if !z.is_finite() {
            return Err(DistError::NonFinite(z));
        }
        Ok(self.density()?.ln_pdf(z))
    }

    /// `E|Z|`.
    pub fn abs_moment(&self) -> Result<f64, DistError> {
        Ok(self.density()?.abs_moment())
    }

    pub fn cdf(&self, z: f64) -> Result<f64, DistError> {
        Ok(self.density()?.cdf(z))
    }

    /// `n` deterministic draws for `seed`.
    ///
    /// Normal draws come from the ziggurat sampler; t kinds invert the CDF by
    /// bisection so results do not depend on platform transcendental
    /// functions beyond the CDF itself.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>, DistError> {
        let density = self.density()?;
        let mut rng = rng::seeded(seed);
        Ok((0..n).map(|_| density.draw(&mut rng)).collect())
    }
}

fn check_nu(nu: f64) -> Result<(), DistError> {
    if nu > 2.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(DistError::InvalidNu(nu))
    }
}

/// A validated distribution with its constants resolved.
#[derive(Debug, Clone, Copy)]
pub struct Density {
    dist: InnovationDist,
    nu: f64,
    /// `ln c`, the symmetric-kernel normalizer.
    ln_c: f64,
    a: f64,
    b: f64,
    ln_b: f64,
}

impl Density {
    fn new(dist: InnovationDist) -> Self {
        let (nu, lambda) = match dist {
            InnovationDist::Normal => (f64::INFINITY, 0.0),
            InnovationDist::StudentT { nu } => (nu, 0.0),
            InnovationDist::SkewT { nu, lambda } => (nu, lambda),
        };
        if matches!(dist, InnovationDist::Normal) {
            return Self {
                dist,
                nu,
                ln_c: -HALF_LN_2PI,
                a: 0.0,
                b: 1.0,
                ln_b: 0.0,
            };
        }
        let ln_c = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (PI * (nu - 2.0)).ln();
        let c = ln_c.exp();
        let a = 4.0 * lambda * c * (nu - 2.0) / (nu - 1.0);
        let b = (1.0 + 3.0 * lambda * lambda - a * a).sqrt();
        Self {
            dist,
            nu,
            ln_c,
            a,
            b,
            ln_b: b.ln(),
        }
    }

    pub fn dist(&self) -> InnovationDist {
        self.dist
    }

    /// Location of the skewed-t regime switch, `−a/b`.
    pub fn switch_point(&self) -> f64 {
        -self.a / self.b
    }

    pub fn ln_pdf(&self, z: f64) -> f64 {
        match self.dist {
            InnovationDist::Normal => -HALF_LN_2PI - 0.5 * z * z,
            InnovationDist::StudentT { nu } => self.ln_c - 0.5 * (nu + 1.0) * (z * z / (nu - 2.0)).ln_1p(),
            InnovationDist::SkewT { nu, lambda } => {
                let shifted = self.b * z + self.a;
                let side = if z < self.switch_point() {
                    1.0 - lambda
                } else {
                    1.0 + lambda
                };
                let u = shifted / side;
                self.ln_b + self.ln_c - 0.5 * (nu + 1.0) * (u * u / (nu - 2.0)).ln_1p()
            }
        }
    }

    /// Upper tail of the unit-variance symmetric t kernel, `P(U > x)`.
    fn kernel_tail(&self, x: f64) -> f64 {
        let nu = self.nu;
        let t = x * (nu / (nu - 2.0)).sqrt();
        let half = 0.5 * beta_reg(nu / 2.0, 0.5, nu / (nu + t * t));
        if t >= 0.0 {
            half
        } else {
            1.0 - half
        }
    }

    /// `∫_x^∞ u k(u) du` for the unit-variance symmetric t kernel.
    fn kernel_partial_mean(&self, x: f64) -> f64 {
        let nu = self.nu;
        self.ln_c.exp() * (nu - 2.0) / (nu - 1.0) * (1.0 + x * x / (nu - 2.0)).powf(-(nu - 1.0) / 2.0)
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match self.dist {
            InnovationDist::Normal => 0.5 * erfc(-z / std::f64::consts::SQRT_2),
            InnovationDist::StudentT { .. } => 1.0 - self.kernel_tail(z),
            InnovationDist::SkewT { lambda, .. } => {
                let shifted = self.b * z + self.a;
                if z < self.switch_point() {
                    (1.0 - lambda) * (1.0 - self.kernel_tail(shifted / (1.0 - lambda)))
                } else {
                    (1.0 + lambda) * (1.0 - self.kernel_tail(shifted / (1.0 + lambda))) - lambda
                }
            }
        }
    }

    /// `E|Z|`.
    ///
    /// Since `E[Z] = 0`, `E|Z| = 2·E[Z⁺]`; the positive part is a partial
    /// moment of the symmetric kernel. A skewed-t with `−λ` is the mirror
    /// image of one with `λ`, so only `λ ≥ 0` is evaluated.
    pub fn abs_moment(&self) -> f64 {
        match self.dist {
            InnovationDist::Normal => FRAC_2_PI.sqrt(),
            InnovationDist::StudentT { .. } => 2.0 * self.kernel_partial_mean(0.0),
            InnovationDist::SkewT { nu, lambda } => {
                let lam = lambda.abs();
                let mirrored = if lambda < 0.0 {
                    Density::new(InnovationDist::SkewT { nu, lambda: lam })
                } else {
                    *self
                };
                let cut = mirrored.a / (1.0 + lam);
                2.0 * (1.0 + lam) / mirrored.b
                    * ((1.0 + lam) * mirrored.kernel_partial_mean(cut) - mirrored.a * mirrored.kernel_tail(cut))
            }
        }
    }

    /// Inverse CDF by bracketed bisection.
    pub fn quantile(&self, p: f64) -> f64 {
        let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
        while self.cdf(lo) > p {
            lo *= 2.0;
        }
        while self.cdf(hi) < p {
            hi *= 2.0;
        }
        loop {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= QUANTILE_TOL * mid.abs().max(1.0) || mid == lo || mid == hi {
                return mid;
            }
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }

    pub(crate) fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.dist {
            InnovationDist::Normal => rng.sample(StandardNormal),
            _ => loop {
                let p: f64 = rng.random();
                if p > 0.0 {
                    break self.quantile(p);
                }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normal_at_zero() {
        assert_abs_diff_eq!(
            InnovationDist::Normal.log_density(0.0).unwrap(),
            -0.918939,
            epsilon = 1e-6
        );
    }

    #[test]
    fn skew_t_without_skew_is_student_t() {
        let t = InnovationDist::student_t(5.0).unwrap();
        let s = InnovationDist::skew_t(5.0, 0.0).unwrap();
        assert_eq!(t.log_density(0.0).unwrap(), s.log_density(0.0).unwrap());
        assert_eq!(t.abs_moment().unwrap(), s.abs_moment().unwrap());
    }

    #[test]
    fn rejects_bad_shapes_and_arguments() {
        assert_eq!(InnovationDist::student_t(2.0), Err(DistError::InvalidNu(2.0)));
        assert_eq!(InnovationDist::skew_t(5.0, 1.0), Err(DistError::InvalidLambda(1.0)));
        assert!(matches!(
            InnovationDist::Normal.log_density(f64::NAN),
            Err(DistError::NonFinite(_))
        ));
        assert!(InnovationDist::Normal.log_density(f64::INFINITY).is_err());
    }

    #[test]
    fn normal_abs_moment() {
        assert_abs_diff_eq!(InnovationDist::Normal.abs_moment().unwrap(), 0.797885, epsilon = 1e-6);
    }

    #[test]
    fn abs_moment_is_mirror_symmetric() {
        let p = InnovationDist::skew_t(6.0, 0.4).unwrap().abs_moment().unwrap();
        let m = InnovationDist::skew_t(6.0, -0.4).unwrap().abs_moment().unwrap();
        assert_abs_diff_eq!(p, m, epsilon = 1e-15);
    }

    #[test]
    fn cdf_continuous_at_switch() {
        let d = InnovationDist::skew_t(4.0, -0.5).unwrap().density().unwrap();
        let x = d.switch_point();
        assert_abs_diff_eq!(d.cdf(x - 1e-12), d.cdf(x), epsilon = 1e-9);
        assert_abs_diff_eq!(d.cdf(x), 0.5 * (1.0 - (-0.5)), epsilon = 1e-12);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for dist in [
            InnovationDist::Normal,
            InnovationDist::student_t(3.5).unwrap(),
            InnovationDist::skew_t(7.0, 0.6).unwrap(),
        ] {
            let d = dist.density().unwrap();
            for &p in &[1e-6, 0.01, 0.3, 0.5, 0.77, 0.999] {
                assert_abs_diff_eq!(d.cdf(d.quantile(p)), p, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = InnovationDist::Normal.sample(5, 7).unwrap();
        let b = InnovationDist::Normal.sample(5, 7).unwrap();
        assert_eq!(a, b);
        let c = InnovationDist::skew_t(5.0, 0.3).unwrap().sample(5, 7).unwrap();
        let d = InnovationDist::skew_t(5.0, 0.3).unwrap().sample(5, 7).unwrap();
        assert_eq!(c, d);
        assert_ne!(a, InnovationDist::Normal.sample(5, 8).unwrap());
    }
}
