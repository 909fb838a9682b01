//! Constant-mean GARCH(1,1), GJR-GARCH(1,1,1) and EGARCH(1,1,1).
//!
//! With `ε_t = r_t − μ` and `z_t = ε_t / σ_t`:
//!
//! ```text
//! garch   σ²_t = ω + α ε²_{t−1} + β σ²_{t−1}
//! gjr     σ²_t = ω + (α + γ·1[ε_{t−1} < 0]) ε²_{t−1} + β σ²_{t−1}
//! egarch  ln σ²_t = ω + α(|z_{t−1}| − E|z|) + γ z_{t−1} + β ln σ²_{t−1}
//! ```
//!
//! `E|z|` is the absolute moment of the model's own innovation distribution.
//! The first conditional variance is the backcast `mean((r_t − μ)²)` unless an
//! explicit starting value is given.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{Density, DistError, InnovationDist};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GarchError {
    #[error("unsupported order p={p}, q={q}, o={o}; only lag-1 recursions are implemented")]
    UnsupportedOrder { p: usize, q: usize, o: usize },
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("return series is empty")]
    EmptyReturns,
    #[error("return series has zero variance around the mean")]
    ZeroVariance,
    #[error("conditional variance {value} at index {index} is not a positive finite number")]
    NonPositiveVariance { index: usize, value: f64 },
    #[error("parameters are not stationary (margin {0})")]
    NotStationary(f64),
    #[error("forecast horizon must be at least 1")]
    ZeroHorizon,
    #[error("multi-step EGARCH forecasts need at least 100 simulation paths, got {0}")]
    SimulationTooSmall(usize),
    #[error(transparent)]
    Dist(#[from] DistError),
}

pub type Result<T> = std::result::Result<T, GarchError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Garch,
    Gjr,
    Egarch,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Garch, Family::Gjr, Family::Egarch];

    pub fn label(self) -> &'static str {
        match self {
            Family::Garch => "garch",
            Family::Gjr => "gjr",
            Family::Egarch => "egarch",
        }
    }

    /// Name as printed in result tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Family::Garch => "GARCH",
            Family::Gjr => "GJR-GARCH",
            Family::Egarch => "EGARCH",
        }
    }

    pub fn has_asymmetry(self) -> bool {
        !matches!(self, Family::Garch)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Family {
    type Err = GarchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "garch" => Ok(Family::Garch),
            "gjr" | "gjr-garch" => Ok(Family::Gjr),
            "egarch" => Ok(Family::Egarch),
            other => Err(GarchError::InvalidSpec(format!("unknown family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchSpec {
    pub family: Family,
    pub p: usize,
    pub q: usize,
    pub o: usize,
    pub dist: InnovationDist,
}

impl GarchSpec {
    /// Lag-1 model of the given family (`o = 1` for the asymmetric ones).
    pub fn new(family: Family, dist: InnovationDist) -> Self {
        Self {
            family,
            p: 1,
            q: 1,
            o: usize::from(family.has_asymmetry()),
            dist,
        }
    }

    pub fn with_dist(self, dist: InnovationDist) -> Self {
        Self { dist, ..self }
    }

    /// Structural checks; does not reject higher orders (see
    /// [`GarchSpec::check_supported`]).
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.q == 0 {
            return Err(GarchError::InvalidSpec("p and q must be at least 1".into()));
        }
        if self.o > 0 && !self.family.has_asymmetry() {
            return Err(GarchError::InvalidSpec("o > 0 requires gjr or egarch".into()));
        }
        self.dist.validate()?;
        Ok(())
    }

    pub fn check_supported(&self) -> Result<()> {
        self.validate()?;
        let o_expected = usize::from(self.family.has_asymmetry());
        if self.p != 1 || self.q != 1 || self.o != o_expected {
            return Err(GarchError::UnsupportedOrder {
                p: self.p,
                q: self.q,
                o: self.o,
            });
        }
        Ok(())
    }
}

/// Mean and variance-equation coefficients. `gamma` is ignored by plain
/// GARCH; for EGARCH `omega` is the log-variance intercept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub mu: f64,
    pub omega: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl GarchParams {
    pub fn validate(&self, family: Family) -> Result<()> {
        let all = [self.mu, self.omega, self.alpha, self.gamma, self.beta];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(GarchError::InvalidParams("non-finite coefficient".into()));
        }
        match family {
            Family::Garch | Family::Gjr => {
                if !(self.omega > 0.0) {
                    return Err(GarchError::InvalidParams(format!("omega {} <= 0", self.omega)));
                }
                if self.alpha < 0.0 || self.beta < 0.0 {
                    return Err(GarchError::InvalidParams("alpha and beta must be >= 0".into()));
                }
                if family == Family::Gjr && self.alpha + self.gamma < 0.0 {
                    return Err(GarchError::InvalidParams("alpha + gamma must be >= 0".into()));
                }
            }
            Family::Egarch => {
                if self.beta.abs() >= 1.0 {
                    return Err(GarchError::InvalidParams(format!("|beta| = {} >= 1", self.beta.abs())));
                }
            }
        }
        Ok(())
    }
}

/// How the first conditional variance is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Mean squared residual of the series being filtered.
    Backcast,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariancePath {
    pub sigma2: Vec<f64>,
    pub residuals: Vec<f64>,
    pub std_residuals: Vec<f64>,
    pub init_variance: f64,
}

impl VariancePath {
    pub fn len(&self) -> usize {
        self.sigma2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma2.is_empty()
    }
}

/// Mean squared residual around `mu`.
pub fn backcast(returns: &[f64], mu: f64) -> f64 {
    returns.iter().map(|r| (r - mu) * (r - mu)).sum::<f64>() / returns.len() as f64
}

/// One step of the variance recursion given the previous residual and
/// variance. `abs_moment` is only read by EGARCH.
#[inline]
fn next_variance(family: Family, p: &GarchParams, abs_moment: f64, prev_eps: f64, prev_s2: f64) -> f64 {
    match family {
        Family::Garch => p.omega + p.alpha * prev_eps * prev_eps + p.beta * prev_s2,
        Family::Gjr => {
            let leverage = if prev_eps < 0.0 { p.gamma } else { 0.0 };
            p.omega + (p.alpha + leverage) * prev_eps * prev_eps + p.beta * prev_s2
        }
        Family::Egarch => {
            let z = prev_eps / prev_s2.sqrt();
            egarch_step(p, abs_moment, z, prev_s2.ln()).exp()
        }
    }
}

#[inline]
fn egarch_step(p: &GarchParams, abs_moment: f64, z: f64, prev_ln_s2: f64) -> f64 {
    p.omega + p.alpha * (z.abs() - abs_moment) + p.gamma * z + p.beta * prev_ln_s2
}

fn check_variance(index: usize, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(GarchError::NonPositiveVariance { index, value })
    }
}

fn abs_moment_for(spec: &GarchSpec) -> Result<f64> {
    match spec.family {
        Family::Egarch => Ok(spec.dist.abs_moment()?),
        _ => Ok(0.0),
    }
}

/// Conditional variances with the backcast start.
pub fn filter_variance(spec: &GarchSpec, params: &GarchParams, returns: &[f64]) -> Result<VariancePath> {
    filter_variance_from(spec, params, returns, Init::Backcast)
}

pub fn filter_variance_from(
    spec: &GarchSpec,
    params: &GarchParams,
    returns: &[f64],
    init: Init,
) -> Result<VariancePath> {
    spec.check_supported()?;
    params.validate(spec.family)?;
    if returns.is_empty() {
        return Err(GarchError::EmptyReturns);
    }
    let abs_moment = abs_moment_for(spec)?;
    let s0 = match init {
        Init::Backcast => {
            let v = backcast(returns, params.mu);
            if v == 0.0 {
                return Err(GarchError::ZeroVariance);
            }
            v
        }
        Init::Fixed(v) => v,
    };
    let n = returns.len();
    let mut sigma2 = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    let mut std_residuals = Vec::with_capacity(n);
    let mut s2 = check_variance(0, s0)?;
    for (t, &r) in returns.iter().enumerate() {
        if t > 0 {
            s2 = check_variance(t, next_variance(spec.family, params, abs_moment, residuals[t - 1], s2))?;
        }
        let eps = r - params.mu;
        sigma2.push(s2);
        residuals.push(eps);
        std_residuals.push(eps / s2.sqrt());
    }
    Ok(VariancePath {
        sigma2,
        residuals,
        std_residuals,
        init_variance: s0,
    })
}

/// `Σ_t [ln g(z_t) − ½ ln σ²_t]` over an already filtered path.
pub fn path_log_likelihood(density: &Density, path: &VariancePath) -> f64 {
    path.sigma2
        .iter()
        .zip(&path.std_residuals)
        .map(|(s2, z)| density.ln_pdf(*z) - 0.5 * s2.ln())
        .sum()
}

pub fn log_likelihood(spec: &GarchSpec, params: &GarchParams, returns: &[f64]) -> Result<f64> {
    log_likelihood_from(spec, params, returns, Init::Backcast)
}

pub fn log_likelihood_from(spec: &GarchSpec, params: &GarchParams, returns: &[f64], init: Init) -> Result<f64> {
    let path = filter_variance_from(spec, params, returns, init)?;
    Ok(path_log_likelihood(&spec.dist.density()?, &path))
}

/// Persistence slack: `1 − α − β`, `1 − α − γ/2 − β`, or `1 − |β|`.
///
/// The GJR form assumes symmetric innovations (half the shocks negative).
pub fn stationarity_margin(spec: &GarchSpec, params: &GarchParams) -> f64 {
    1.0 - persistence(spec.family, params)
}

fn persistence(family: Family, p: &GarchParams) -> f64 {
    match family {
        Family::Garch => p.alpha + p.beta,
        Family::Gjr => p.alpha + 0.5 * p.gamma + p.beta,
        Family::Egarch => p.beta.abs(),
    }
}

/// Long-run variance implied by stationary parameters. For EGARCH this is
/// `exp(ω / (1 − β))`, the variance at the long-run log level.
pub fn unconditional_variance(spec: &GarchSpec, params: &GarchParams) -> Option<f64> {
    let margin = stationarity_margin(spec, params);
    if margin <= 0.0 {
        return None;
    }
    Some(match spec.family {
        Family::Garch | Family::Gjr => params.omega / margin,
        Family::Egarch => (params.omega / (1.0 - params.beta)).exp(),
    })
}

/// A simulated return path together with the variances that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub returns: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub init_variance: f64,
}

/// Draws `r_t = μ + σ_t z_t`, starting from the unconditional variance.
///
/// Filtering the output with `Init::Fixed(init_variance)` reproduces
/// `sigma2`.
pub fn simulate(spec: &GarchSpec, params: &GarchParams, n: usize, seed: u64) -> Result<Simulation> {
    spec.check_supported()?;
    params.validate(spec.family)?;
    let s0 =
        unconditional_variance(spec, params).ok_or(GarchError::NotStationary(stationarity_margin(spec, params)))?;
    let abs_moment = abs_moment_for(spec)?;
    let shocks = spec.dist.sample(n, seed)?;
    let mut returns = Vec::with_capacity(n);
    let mut sigma2 = Vec::with_capacity(n);
    let mut s2 = s0;
    let mut prev_eps = 0.0;
    for (t, z) in shocks.into_iter().enumerate() {
        if t > 0 {
            s2 = check_variance(t, next_variance(spec.family, params, abs_moment, prev_eps, s2))?;
        }
        prev_eps = s2.sqrt() * z;
        sigma2.push(s2);
        returns.push(params.mu + prev_eps);
    }
    Ok(Simulation {
        returns,
        sigma2,
        init_variance: s0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForecastMethod {
    Analytic,
    Simulation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub horizon: usize,
    pub sigma2: Vec<f64>,
    pub sigma: Vec<f64>,
    pub method: ForecastMethod,
    pub n_paths: Option<usize>,
    pub seed: Option<u64>,
}

/// Variance forecasts for steps `T+1 ..= T+horizon` after the end of `path`.
///
/// GARCH and GJR iterate `σ²_{T+h} = ω + φ σ²_{T+h−1}` with `φ` the
/// persistence. EGARCH is analytic for one step; longer horizons average
/// `n_paths` simulated variance paths, path `i` drawing from stream `i` of
/// `seed`.
pub fn forecast(
    spec: &GarchSpec,
    params: &GarchParams,
    path: &VariancePath,
    horizon: usize,
    n_paths: usize,
    seed: u64,
) -> Result<ForecastResult> {
    spec.check_supported()?;
    params.validate(spec.family)?;
    if horizon == 0 {
        return Err(GarchError::ZeroHorizon);
    }
    let (Some(&last_s2), Some(&last_eps)) = (path.sigma2.last(), path.residuals.last()) else {
        return Err(GarchError::EmptyReturns);
    };
    let abs_moment = abs_moment_for(spec)?;
    let first = check_variance(0, next_variance(spec.family, params, abs_moment, last_eps, last_s2))?;

    if spec.family != Family::Egarch || horizon == 1 {
        let phi = persistence(spec.family, params);
        let mut sigma2 = Vec::with_capacity(horizon);
        sigma2.push(first);
        for h in 1..horizon {
            sigma2.push(check_variance(h, params.omega + phi * sigma2[h - 1])?);
        }
        return Ok(ForecastResult {
            horizon,
            sigma: sigma2.iter().map(|v| v.sqrt()).collect(),
            sigma2,
            method: ForecastMethod::Analytic,
            n_paths: None,
            seed: None,
        });
    }

    if n_paths < 100 {
        return Err(GarchError::SimulationTooSmall(n_paths));
    }
    let density = spec.dist.density()?;
    let mut totals = vec![0.0; horizon];
    for i in 0..n_paths {
        let mut rng = rng::substream(seed, i as u64);
        let mut ln_s2 = first.ln();
        totals[0] += first;
        for total in totals.iter_mut().skip(1) {
            let z = density.draw(&mut rng);
            ln_s2 = egarch_step(params, abs_moment, z, ln_s2);
            *total += ln_s2.exp();
        }
    }
    let mut sigma2: Vec<f64> = totals.into_iter().map(|t| t / n_paths as f64).collect();
    sigma2[0] = first;
    for (h, &v) in sigma2.iter().enumerate() {
        check_variance(h, v)?;
    }
    Ok(ForecastResult {
        horizon,
        sigma: sigma2.iter().map(|v| v.sqrt()).collect(),
        sigma2,
        method: ForecastMethod::Simulation,
        n_paths: Some(n_paths),
        seed: Some(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn garch(omega: f64, alpha: f64, beta: f64) -> GarchParams {
        GarchParams {
            mu: 0.0,
            omega,
            alpha,
            gamma: 0.0,
            beta,
        }
    }

    fn spec(family: Family) -> GarchSpec {
        GarchSpec::new(family, InnovationDist::Normal)
    }

    #[test]
    fn degenerate_recursion_is_constant() {
        let r = [0.3, -1.2, 4.0, 0.0, -0.7];
        let path = filter_variance(&spec(Family::Garch), &garch(2.0, 0.0, 0.0), &r).unwrap();
        assert!(path.sigma2[1..].iter().all(|&v| v == 2.0));
    }

    #[test]
    fn three_step_hand_unroll() {
        // backcast = (1 + 4 + 0.25) / 3 = 1.75
        let r = [1.0, -2.0, 0.5];
        let path = filter_variance(&spec(Family::Garch), &garch(0.1, 0.1, 0.8), &r).unwrap();
        let s0 = 1.75;
        let s1 = 0.1 + 0.1 * 1.0 + 0.8 * s0;
        let s2 = 0.1 + 0.1 * 4.0 + 0.8 * s1;
        assert_abs_diff_eq!(path.sigma2[0], s0, epsilon = 1e-15);
        assert_abs_diff_eq!(path.sigma2[1], 1.6, epsilon = 1e-14);
        assert_abs_diff_eq!(path.sigma2[1], s1, epsilon = 1e-15);
        assert_abs_diff_eq!(path.sigma2[2], 1.78, epsilon = 1e-14);
        assert_abs_diff_eq!(path.sigma2[2], s2, epsilon = 1e-15);
        assert_eq!(path.std_residuals[1], -2.0 / s1.sqrt());
    }

    #[test]
    fn gjr_without_leverage_equals_garch() {
        let r: Vec<f64> = (0..40).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.4).collect();
        let p = GarchParams {
            mu: 0.05,
            ..garch(0.2, 0.07, 0.9)
        };
        let a = filter_variance(&spec(Family::Garch), &p, &r).unwrap();
        let b = filter_variance(&spec(Family::Gjr), &p, &r).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_point_likelihood() {
        let ll = log_likelihood_from(&spec(Family::Garch), &garch(1.0, 0.0, 0.0), &[0.0], Init::Fixed(1.0)).unwrap();
        assert_abs_diff_eq!(ll, -0.918939, epsilon = 1e-6);
        let two = log_likelihood_from(
            &spec(Family::Garch),
            &garch(1.0, 0.0, 0.0),
            &[0.0, 0.0],
            Init::Fixed(1.0),
        )
        .unwrap();
        assert_abs_diff_eq!(two, 2.0 * ll, epsilon = 1e-15);
    }

    #[test]
    fn zero_variance_and_bad_init_are_errors() {
        let s = spec(Family::Garch);
        assert_eq!(
            filter_variance(&s, &garch(1.0, 0.1, 0.8), &[0.0, 0.0]),
            Err(GarchError::ZeroVariance)
        );
        assert_eq!(
            filter_variance_from(&s, &garch(1.0, 0.1, 0.8), &[1.0], Init::Fixed(-1.0)),
            Err(GarchError::NonPositiveVariance { index: 0, value: -1.0 })
        );
        assert_eq!(
            filter_variance(&s, &garch(1.0, 0.1, 0.8), &[]),
            Err(GarchError::EmptyReturns)
        );
    }

    #[test]
    fn egarch_overflow_is_reported_with_index() {
        let p = GarchParams {
            mu: 0.0,
            omega: 800.0,
            alpha: 0.0,
            gamma: 0.0,
            beta: 0.9,
        };
        let err = filter_variance(&spec(Family::Egarch), &p, &[1.0, 1.0, 1.0]).unwrap_err();
        assert!(matches!(err, GarchError::NonPositiveVariance { index: 1, .. }));
    }

    #[test]
    fn higher_orders_are_refused() {
        let s = GarchSpec {
            p: 2,
            ..spec(Family::Garch)
        };
        assert_eq!(
            filter_variance(&s, &garch(1.0, 0.1, 0.8), &[1.0, 2.0]),
            Err(GarchError::UnsupportedOrder { p: 2, q: 1, o: 0 })
        );
        let bad = GarchSpec {
            o: 1,
            ..spec(Family::Garch)
        };
        assert!(matches!(bad.validate(), Err(GarchError::InvalidSpec(_))));
    }

    #[test]
    fn margin_examples() {
        assert_abs_diff_eq!(
            stationarity_margin(&spec(Family::Garch), &garch(0.1, 0.1, 0.85)),
            0.05,
            epsilon = 1e-12
        );
        let gjr = GarchParams {
            gamma: 0.1,
            ..garch(0.1, 0.05, 0.85)
        };
        assert_abs_diff_eq!(stationarity_margin(&spec(Family::Gjr), &gjr), 0.05, epsilon = 1e-12);
        let eg = GarchParams {
            beta: 0.97,
            ..garch(0.0, 0.1, 0.0)
        };
        assert_abs_diff_eq!(stationarity_margin(&spec(Family::Egarch), &eg), 0.03, epsilon = 1e-12);
    }

    #[test]
    fn simulate_is_deterministic() {
        let s = spec(Family::Gjr);
        let p = GarchParams {
            gamma: 0.1,
            ..garch(0.1, 0.05, 0.85)
        };
        assert_eq!(simulate(&s, &p, 5, 3).unwrap(), simulate(&s, &p, 5, 3).unwrap());
        let unstable = garch(0.1, 0.5, 0.6);
        assert!(matches!(
            simulate(&spec(Family::Garch), &unstable, 5, 3),
            Err(GarchError::NotStationary(_))
        ));
    }

    #[test]
    fn one_step_forecast_is_recursion_step() {
        let r = [0.4, -1.1, 2.2, 0.3];
        let p = garch(0.1, 0.1, 0.8);
        let path = filter_variance(&spec(Family::Garch), &p, &r).unwrap();
        let f = forecast(&spec(Family::Garch), &p, &path, 1, 0, 0).unwrap();
        let expected = 0.1 + 0.1 * path.residuals[3].powi(2) + 0.8 * path.sigma2[3];
        assert_eq!(f.sigma2, vec![expected]);
        assert_eq!(f.method, ForecastMethod::Analytic);
    }

    #[test]
    fn constant_model_forecast() {
        let path = filter_variance(&spec(Family::Garch), &garch(0.7, 0.0, 0.0), &[1.0, -1.0, 3.0]).unwrap();
        let f = forecast(&spec(Family::Garch), &garch(0.7, 0.0, 0.0), &path, 12, 0, 0).unwrap();
        assert!(f.sigma2.iter().all(|&v| v == 0.7));
    }

    #[test]
    fn geometric_forecast_closed_form() {
        let p = garch(0.1, 0.1, 0.8);
        let s = spec(Family::Garch);
        let path = filter_variance(&s, &p, &[2.5, -0.3, 1.9, -3.0]).unwrap();
        let f = forecast(&s, &p, &path, 20, 0, 0).unwrap();
        let long_run = 0.1 / (1.0 - 0.9);
        for (h, v) in f.sigma2.iter().enumerate() {
            let expected = long_run + 0.9f64.powi(h as i32) * (f.sigma2[0] - long_run);
            assert_abs_diff_eq!(*v, expected, epsilon = 1e-12);
        }
        let far = forecast(&s, &p, &path, 500, 0, 0).unwrap();
        assert_abs_diff_eq!(far.sigma2[499], long_run, epsilon = 1e-6);
    }

    #[test]
    fn egarch_forecast_branches() {
        let s = spec(Family::Egarch);
        let p = GarchParams {
            mu: 0.0,
            omega: 0.01,
            alpha: 0.1,
            gamma: -0.05,
            beta: 0.95,
        };
        let path = filter_variance(&s, &p, &[0.5, -1.5, 0.8, 0.1]).unwrap();
        let one = forecast(&s, &p, &path, 1, 0, 0).unwrap();
        assert_eq!(one.method, ForecastMethod::Analytic);
        assert_eq!(
            forecast(&s, &p, &path, 5, 50, 1),
            Err(GarchError::SimulationTooSmall(50))
        );
        let sim = forecast(&s, &p, &path, 5, 200, 1).unwrap();
        assert_eq!(sim.method, ForecastMethod::Simulation);
        assert_eq!(sim.sigma2[0], one.sigma2[0]);
        assert_eq!(sim, forecast(&s, &p, &path, 5, 200, 1).unwrap());
    }

    proptest! {
        #[test]
        fn variances_stay_positive(
            returns in prop::collection::vec(-20.0f64..20.0, 2..80),
            omega in 1e-4f64..2.0,
            alpha in 0.0f64..0.5,
            beta in 0.0f64..0.49,
        ) {
            prop_assume!(returns.iter().any(|r| *r != 0.0));
            let path = filter_variance(&spec(Family::Garch), &garch(omega, alpha, beta), &returns).unwrap();
            prop_assert_eq!(path.len(), returns.len());
            prop_assert!(path.sigma2.iter().all(|&v| v > 0.0));
        }
    }
}
