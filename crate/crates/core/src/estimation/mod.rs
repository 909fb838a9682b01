//! Maximum-likelihood fitting, numerical-Hessian inference, BIC and
//! BIC-driven order selection.
//!
//! The optimizer works on the negative mean log-likelihood in the
//! unconstrained coordinates of [`transform`]: Nelder-Mead, a coordinate
//! golden-section polish, then a restarted simplex from the polished point.
//! Standard errors come from the inverse observed information in those
//! coordinates, mapped back to natural parameters by the delta method.

mod document;
pub mod optimizer;
mod transform;

pub use document::{parse_fit_document, write_fit_document, BicTable, DocumentError};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::dist::InnovationDist;
use crate::garch::{self, Family, GarchError, GarchParams, GarchSpec};
use crate::market_data::{mean, sample_std};
use optimizer::{coordinate_polish, nelder_mead, newton_refine, SimplexOptions};
use transform::Transform;

/// Smallest sample the estimator accepts.
pub const MIN_OBSERVATIONS: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("need at least {MIN_OBSERVATIONS} returns to fit, got {0}")]
    TooFewObservations(usize),
    #[error("returns have zero variance; nothing to fit")]
    DegenerateData,
    #[error("no grid candidate could be fitted")]
    NoCandidate,
    #[error("order grids must be nonempty")]
    EmptyGrid,
    #[error(transparent)]
    Model(#[from] GarchError),
}

pub type Result<T> = std::result::Result<T, EstimationError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Simplex diameter (sup norm, transformed space) that counts as converged.
    pub xtol: f64,
    /// Total simplex iterations across the initial run and the restart.
    pub max_iterations: usize,
    /// Gap kept between the persistence and 1.
    pub stationarity_margin: f64,
    /// Relative central-difference step for the Hessian.
    pub hessian_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            xtol: 1e-8,
            max_iterations: 2000,
            stationarity_margin: 1e-6,
            hessian_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub name: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Specification with the fitted shape parameters in `dist`.
    pub spec: GarchSpec,
    pub params: GarchParams,
    pub loglik: f64,
    pub bic: f64,
    pub n_obs: usize,
    pub k: usize,
    pub converged: bool,
    pub iterations: usize,
    pub margin: f64,
    /// Starting variance used when filtering the training data.
    pub backcast: f64,
    pub estimates: Vec<ParamEstimate>,
    /// Why standard errors are missing, when they are.
    pub inference_note: Option<String>,
}

impl FitResult {
    pub fn estimate(&self, name: &str) -> Option<&ParamEstimate> {
        self.estimates.iter().find(|e| e.name == name)
    }
}

/// `−2·loglik + ln(n)·k`.
pub fn bic(loglik: f64, n: usize, k: usize) -> f64 {
    -2.0 * loglik + (n as f64).ln() * k as f64
}

/// Two-sided normal tail probability of `estimate / stderr`.
pub fn p_value(estimate: f64, stderr: f64) -> f64 {
    erfc((estimate / stderr).abs() / std::f64::consts::SQRT_2)
}

/// Free parameters: mean, variance equation, and distribution shapes.
pub fn parameter_count(spec: &GarchSpec) -> usize {
    let variance = if spec.family.has_asymmetry() { 4 } else { 3 };
    1 + variance + spec.dist.n_shape()
}

fn starting_point(spec: &GarchSpec, returns: &[f64]) -> (GarchParams, InnovationDist) {
    let mu = mean(returns);
    let var = sample_std(returns).powi(2);
    let beta = 0.85;
    let (omega, gamma) = match spec.family {
        Family::Garch => (0.1 * var, 0.0),
        Family::Gjr => (0.1 * var, 0.05),
        // log-variance intercept that puts the long-run level at the sample variance
        Family::Egarch => ((1.0 - beta) * var.ln(), 0.05),
    };
    let dist = match spec.dist {
        InnovationDist::Normal => InnovationDist::Normal,
        InnovationDist::StudentT { .. } => InnovationDist::StudentT { nu: 8.0 },
        InnovationDist::SkewT { .. } => InnovationDist::SkewT { nu: 8.0, lambda: 0.0 },
    };
    let params = GarchParams {
        mu,
        omega,
        alpha: 0.05,
        gamma,
        beta,
    };
    (params, dist)
}

/// Negative log-likelihood in transformed coordinates, `+inf` off the
/// model's domain.
struct Objective<'a> {
    transform: Transform,
    spec: GarchSpec,
    returns: &'a [f64],
}

impl Objective<'_> {
    fn loglik(&self, x: &[f64]) -> f64 {
        let (params, dist) = self.transform.decode(x);
        let spec = self.spec.with_dist(dist);
        match garch::log_likelihood(&spec, &params, self.returns) {
            Ok(ll) if ll.is_finite() => ll,
            _ => f64::NEG_INFINITY,
        }
    }

    fn mean_nll(&self, x: &[f64]) -> f64 {
        -self.loglik(x) / self.returns.len() as f64
    }
}

fn initial_steps(transform: &Transform, returns: &[f64]) -> Vec<f64> {
    let sd = sample_std(returns);
    let mut steps = vec![0.1 * sd, 0.5];
    let n_variance = if transform.family.has_asymmetry() { 3 } else { 2 };
    if transform.family == Family::Egarch {
        steps.extend([0.05, 0.05, 0.5]);
    } else {
        steps.extend(std::iter::repeat_n(0.5, n_variance));
    }
    steps.resize(transform.dim(), 0.5);
    steps
}

/// Fits `spec` to `returns` by maximum likelihood.
///
/// A run that exhausts the iteration budget is returned with
/// `converged == false`, the best parameters found, and no standard errors.
pub fn fit(spec: &GarchSpec, returns: &[f64], options: &FitOptions) -> Result<FitResult> {
    spec.check_supported()?;
    if returns.len() < MIN_OBSERVATIONS {
        return Err(EstimationError::TooFewObservations(returns.len()));
    }
    if !(sample_std(returns) > 0.0) {
        return Err(EstimationError::DegenerateData);
    }
    let transform = Transform::new(spec, options.stationarity_margin);
    let objective = Objective {
        transform,
        spec: *spec,
        returns,
    };
    let mut f = |x: &[f64]| objective.mean_nll(x);

    let (p0, d0) = starting_point(spec, returns);
    let x0 = transform.encode(&p0, &d0);
    let steps = initial_steps(&transform, returns);
    let opts = SimplexOptions {
        xtol: options.xtol,
        max_iterations: options.max_iterations,
    };
    let first = nelder_mead(&mut f, &x0, &steps, opts);
    let mut x = first.x;
    let polish_tol = options.xtol * 1e-2;
    let value = coordinate_polish(&mut f, &mut x, first.value, polish_tol, 10);

    let remaining = options.max_iterations.saturating_sub(first.iterations);
    let restart_steps: Vec<f64> = steps.iter().map(|s| s * 1e-2).collect();
    let second = nelder_mead(
        &mut f,
        &x,
        &restart_steps,
        SimplexOptions {
            max_iterations: remaining,
            ..opts
        },
    );
    let (mut x, mut value) = if second.value <= value {
        (second.x, second.value)
    } else {
        (x, value)
    };
    value = coordinate_polish(&mut f, &mut x, value, polish_tol, 10);
    value = newton_refine(&mut f, &mut x, value, options.xtol, 8);
    let iterations = first.iterations + second.iterations;

    let (params, dist) = transform.decode(&x);
    let fitted_spec = spec.with_dist(dist);
    let loglik = -value * returns.len() as f64;
    let margin = garch::stationarity_margin(&fitted_spec, &params);
    let converged = second.converged && loglik.is_finite() && margin > 0.0;
    let k = parameter_count(spec);
    let estimates = transform
        .names()
        .into_iter()
        .zip(transform.natural(&params, &dist))
        .map(|(name, value)| ParamEstimate {
            name: name.to_string(),
            value,
            stderr: None,
            p_value: None,
        })
        .collect();
    let result = FitResult {
        spec: fitted_spec,
        params,
        loglik,
        bic: bic(loglik, returns.len(), k),
        n_obs: returns.len(),
        k,
        converged,
        iterations,
        margin,
        backcast: garch::backcast(returns, params.mu),
        estimates,
        inference_note: None,
    };
    if converged {
        Ok(infer(&result, returns, options))
    } else {
        Ok(FitResult {
            inference_note: Some("optimizer did not converge; standard errors not computed".into()),
            ..result
        })
    }
}

/// Observed-information standard errors and normal p-values.
///
/// The Hessian of the log-likelihood is taken by central differences in the
/// optimizer's coordinates with step `max(h, h·|x|)`, inverted, and pushed
/// through the Jacobian of the coordinate map. A Hessian whose negative is
/// not positive definite leaves the standard errors unset with a note.
pub fn infer(fit: &FitResult, returns: &[f64], options: &FitOptions) -> FitResult {
    let mut out = fit.clone();
    for e in &mut out.estimates {
        e.stderr = None;
        e.p_value = None;
    }
    if !fit.converged {
        out.inference_note = Some("fit did not converge; standard errors not computed".into());
        return out;
    }
    let transform = Transform::new(&fit.spec, options.stationarity_margin);
    let objective = Objective {
        transform,
        spec: fit.spec,
        returns,
    };
    let x = transform.encode(&fit.params, &fit.spec.dist);
    let dim = x.len();
    let steps: Vec<f64> = x
        .iter()
        .map(|v| options.hessian_step.max(options.hessian_step * v.abs()))
        .collect();

    let ll = |dx: &[(usize, f64)]| {
        let mut probe = x.clone();
        for &(i, d) in dx {
            probe[i] += d;
        }
        objective.loglik(&probe)
    };
    let center = ll(&[]);
    let mut info = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        let hi = steps[i];
        let d2 = (ll(&[(i, hi)]) - 2.0 * center + ll(&[(i, -hi)])) / (hi * hi);
        info[(i, i)] = -d2;
        for j in 0..i {
            let hj = steps[j];
            let d2 = (ll(&[(i, hi), (j, hj)]) - ll(&[(i, hi), (j, -hj)]) - ll(&[(i, -hi), (j, hj)])
                + ll(&[(i, -hi), (j, -hj)]))
                / (4.0 * hi * hj);
            info[(i, j)] = -d2;
            info[(j, i)] = -d2;
        }
    }
    if info.iter().any(|v| !v.is_finite()) {
        out.inference_note = Some("Hessian has non-finite entries; standard errors unavailable".into());
        return out;
    }
    let Some(chol) = info.clone().cholesky() else {
        out.inference_note = Some("negative Hessian is not positive definite; standard errors unavailable".into());
        return out;
    };
    let cov_x = chol.inverse();

    // Jacobian of natural parameters with respect to transformed coordinates
    let natural_at = |probe: &[f64]| {
        let (p, d) = transform.decode(probe);
        transform.natural(&p, &d)
    };
    let mut jac = DMatrix::<f64>::zeros(dim, dim);
    for j in 0..dim {
        let h = 1e-6 * x[j].abs().max(1.0);
        let mut up = x.clone();
        up[j] += h;
        let mut down = x.clone();
        down[j] -= h;
        let (a, b) = (natural_at(&up), natural_at(&down));
        for i in 0..dim {
            jac[(i, j)] = (a[i] - b[i]) / (2.0 * h);
        }
    }
    let cov = &jac * cov_x * jac.transpose();
    for (i, e) in out.estimates.iter_mut().enumerate() {
        let var = cov[(i, i)];
        if var.is_finite() && var >= 0.0 {
            let se = var.sqrt();
            e.stderr = Some(se);
            e.p_value = Some(if se > 0.0 { p_value(e.value, se) } else { 0.0 });
        }
    }
    out.inference_note = None;
    out
}

/// Outcome of one grid cell in [`select_order`].
#[derive(Debug, Clone, PartialEq)]
pub enum CandidateOutcome {
    Fitted {
        loglik: f64,
        bic: f64,
    },
    /// The recursion for this order is not implemented.
    Unsupported,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderCandidate {
    pub p: usize,
    pub q: usize,
    pub outcome: CandidateOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderSelection {
    pub p: usize,
    pub q: usize,
    pub table: Vec<OrderCandidate>,
}

/// Lowest-BIC fitted candidate; ties go to the smaller `p + q`, then the
/// smaller `p`.
pub fn pick_best(table: &[OrderCandidate]) -> Option<(usize, usize)> {
    table
        .iter()
        .filter_map(|c| match c.outcome {
            CandidateOutcome::Fitted { bic, .. } => Some((bic, c.p, c.q)),
            _ => None,
        })
        .min_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then((a.1 + a.2).cmp(&(b.1 + b.2)))
                .then(a.1.cmp(&b.1))
        })
        .map(|(_, p, q)| (p, q))
}

/// Fits every `(p, q)` on the grid for the template's family and
/// distribution and picks the lowest BIC. Orders other than 1 are recorded
/// as [`CandidateOutcome::Unsupported`].
pub fn select_order(
    returns: &[f64],
    template: &GarchSpec,
    p_grid: &[usize],
    q_grid: &[usize],
    options: &FitOptions,
) -> Result<OrderSelection> {
    if p_grid.is_empty() || q_grid.is_empty() {
        return Err(EstimationError::EmptyGrid);
    }
    let mut table = Vec::with_capacity(p_grid.len() * q_grid.len());
    for &p in p_grid {
        for &q in q_grid {
            let spec = GarchSpec { p, q, ..*template };
            let outcome = match spec.check_supported() {
                Err(GarchError::UnsupportedOrder { .. }) => CandidateOutcome::Unsupported,
                Err(e) => CandidateOutcome::Failed(e.to_string()),
                Ok(()) => match fit(&spec, returns, options) {
                    Ok(f) if f.converged => CandidateOutcome::Fitted {
                        loglik: f.loglik,
                        bic: f.bic,
                    },
                    Ok(_) => CandidateOutcome::Failed("did not converge".into()),
                    Err(e) => CandidateOutcome::Failed(e.to_string()),
                },
            };
            table.push(OrderCandidate { p, q, outcome });
        }
    }
    let (p, q) = pick_best(&table).ok_or(EstimationError::NoCandidate)?;
    Ok(OrderSelection { p, q, table })
}
