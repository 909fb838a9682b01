//! Smooth bijections between the optimizer's unconstrained space and the
//! feasible parameter region.
//!
//! - `ω = exp(x)` for GARCH/GJR; the EGARCH intercept is free.
//! - GARCH: `(α, β) = s·softmax(xα, xβ, 0)[..2]`, so `α, β > 0` and
//!   `α + β < s` with `s = 1 − margin`.
//! - GJR: with `a = α` and `c = α + γ`, `(a/2, c/2, β) = s·softmax(xa, xc, xβ, 0)[..3]`,
//!   covering `α ≥ 0`, `α + γ ≥ 0`, `α + γ/2 + β < s`.
//! - EGARCH: `β = s·tanh(x)`; `α`, `γ` free.
//! - `ν = 2 + exp(x)`, `λ = tanh(x)`.

use crate::dist::InnovationDist;
use crate::garch::{Family, GarchParams, GarchSpec};

/// Parameter layout for one model specification.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Transform {
    pub family: Family,
    /// Template distribution; its shape values are replaced on decode.
    pub dist: InnovationDist,
    pub scale: f64,
}

impl Transform {
    pub fn new(spec: &GarchSpec, margin: f64) -> Self {
        Self {
            family: spec.family,
            dist: spec.dist,
            scale: 1.0 - margin,
        }
    }

    /// Names of the natural parameters in vector order.
    pub fn names(&self) -> Vec<&'static str> {
        let mut names = vec!["mu", "omega", "alpha"];
        if self.family.has_asymmetry() {
            names.push("gamma");
        }
        names.push("beta");
        match self.dist {
            InnovationDist::Normal => {}
            InnovationDist::StudentT { .. } => names.push("nu"),
            InnovationDist::SkewT { .. } => names.extend(["nu", "lambda"]),
        }
        names
    }

    pub fn dim(&self) -> usize {
        self.names().len()
    }

    /// Natural parameter vector in [`Transform::names`] order.
    pub fn natural(&self, params: &GarchParams, dist: &InnovationDist) -> Vec<f64> {
        let mut v = vec![params.mu, params.omega, params.alpha];
        if self.family.has_asymmetry() {
            v.push(params.gamma);
        }
        v.push(params.beta);
        v.extend(dist.nu());
        v.extend(dist.lambda());
        v
    }

    pub fn decode(&self, x: &[f64]) -> (GarchParams, InnovationDist) {
        let s = self.scale;
        let (omega, alpha, gamma, beta, rest) = match self.family {
            Family::Garch => {
                let w = softmax_with_zero(&x[2..4]);
                (x[1].exp(), s * w[0], 0.0, s * w[1], &x[4..])
            }
            Family::Gjr => {
                let w = softmax_with_zero(&x[2..5]);
                let a = 2.0 * s * w[0];
                let c = 2.0 * s * w[1];
                (x[1].exp(), a, c - a, s * w[2], &x[5..])
            }
            Family::Egarch => (x[1], x[2], x[3], s * x[4].tanh(), &x[5..]),
        };
        let dist = match self.dist {
            InnovationDist::Normal => InnovationDist::Normal,
            InnovationDist::StudentT { .. } => InnovationDist::StudentT {
                nu: 2.0 + rest[0].exp(),
            },
            InnovationDist::SkewT { .. } => InnovationDist::SkewT {
                nu: 2.0 + rest[0].exp(),
                lambda: rest[1].tanh(),
            },
        };
        let params = GarchParams {
            mu: x[0],
            omega,
            alpha,
            gamma,
            beta,
        };
        (params, dist)
    }

    /// Inverse of [`Transform::decode`]. Inputs must lie strictly inside the
    /// feasible region.
    pub fn encode(&self, params: &GarchParams, dist: &InnovationDist) -> Vec<f64> {
        let s = self.scale;
        let mut x = vec![params.mu];
        match self.family {
            Family::Garch => {
                x.push(params.omega.ln());
                x.extend(log_ratios(&[params.alpha / s, params.beta / s]));
            }
            Family::Gjr => {
                x.push(params.omega.ln());
                let a = params.alpha / (2.0 * s);
                let c = (params.alpha + params.gamma) / (2.0 * s);
                x.extend(log_ratios(&[a, c, params.beta / s]));
            }
            Family::Egarch => {
                x.extend([params.omega, params.alpha, params.gamma, (params.beta / s).atanh()]);
            }
        }
        if let Some(nu) = dist.nu() {
            x.push((nu - 2.0).ln());
        }
        if let Some(lambda) = dist.lambda() {
            x.push(lambda.atanh());
        }
        x
    }
}

/// `softmax(x_1, …, x_k, 0)` restricted to the first `k` weights.
fn softmax_with_zero(x: &[f64]) -> Vec<f64> {
    let top = x.iter().copied().fold(0.0, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - top).exp()).collect();
    let denom = (-top).exp() + exps.iter().sum::<f64>();
    exps.into_iter().map(|e| e / denom).collect()
}

fn log_ratios(weights: &[f64]) -> Vec<f64> {
    let rest = 1.0 - weights.iter().sum::<f64>();
    weights.iter().map(|w| (w / rest).ln()).collect()
}
