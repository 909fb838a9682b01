#![allow(dead_code)]

use std::path::PathBuf;

use chrono::NaiveDate;
use statrs::distribution::{Continuous, StudentsT};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn day(i: i64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2019, 1, 1).unwrap() + chrono::Duration::days(i)
}

/// `∫_c^∞ f` by the exp-sinh substitution `x = c + exp(π/2·sinh t)`,
/// which turns algebraic tails into double-exponential decay.
pub fn integrate_upper(f: impl Fn(f64) -> f64, c: f64) -> f64 {
    let h = 1.0 / 128.0;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut sum = 0.0;
    for k in -768i32..=768 {
        let t = k as f64 * h;
        let u = half_pi * t.sinh();
        let e = u.exp();
        let w = half_pi * t.cosh() * e;
        let v = f(c + e);
        if v.is_finite() && w.is_finite() {
            sum += w * v;
        }
    }
    sum * h
}

/// `∫_{−∞}^c f`.
pub fn integrate_lower(f: impl Fn(f64) -> f64, c: f64) -> f64 {
    integrate_upper(|x| f(2.0 * c - x), c)
}

/// `∫_a^b f` by tanh-sinh.
pub fn integrate_finite(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = 1.0 / 128.0;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    let mut sum = 0.0;
    for k in -512i32..=512 {
        let t = k as f64 * h;
        let u = half_pi * t.sinh();
        let x = u.tanh();
        let w = half_pi * t.cosh() / u.cosh().powi(2);
        if w > 0.0 && x.abs() < 1.0 {
            sum += w * f(mid + half * x);
        }
    }
    sum * h * half
}

/// `∫_{−∞}^{c} f` split at the sorted `breaks` below `c`.
pub fn integrate_lower_pieces(f: impl Fn(f64) -> f64 + Copy, breaks: &[f64], c: f64) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|b| *b < c).collect();
    pts.push(c);
    let mut total = integrate_lower(f, pts[0]);
    for w in pts.windows(2) {
        total += integrate_finite(f, w[0], w[1]);
    }
    total
}

/// `∫ f` over the whole line, split at the sorted `breaks` where `f` may
/// lose smoothness.
pub fn integrate_line(f: impl Fn(f64) -> f64 + Copy, breaks: &[f64]) -> f64 {
    let last = *breaks.last().unwrap();
    integrate_lower_pieces(f, &breaks[..breaks.len() - 1], last) + integrate_upper(f, last)
}

/// Composite Simpson on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// Standardized Student-t density built from an independent t implementation.
pub fn reference_t_pdf(nu: f64, z: f64) -> f64 {
    let scale = (nu / (nu - 2.0)).sqrt();
    StudentsT::new(0.0, 1.0, nu).unwrap().pdf(z * scale) * scale
}

/// Hansen's density written out directly from its definition.
pub fn reference_skew_pdf(nu: f64, lambda: f64, z: f64) -> f64 {
    let lg = statrs::function::gamma::ln_gamma;
    let c = (lg((nu + 1.0) / 2.0) - lg(nu / 2.0)).exp() / (std::f64::consts::PI * (nu - 2.0)).sqrt();
    let a = 4.0 * lambda * c * (nu - 2.0) / (nu - 1.0);
    let b = (1.0 + 3.0 * lambda * lambda - a * a).sqrt();
    let side = if z < -a / b { 1.0 - lambda } else { 1.0 + lambda };
    let u = (b * z + a) / side;
    b * c * (1.0 + u * u / (nu - 2.0)).powf(-(nu + 1.0) / 2.0)
}

/// Thirteen seeded returns, min-max scaled over themselves and cut into
/// eight windows of five, with the overfit configuration used to memorize
/// them.
pub fn memorization_case(
    seed: u64,
) -> (
    vollab::market_data::ReturnSeries,
    vollab::lstm::WindowedDataset,
    vollab::lstm::LstmConfig,
) {
    use rand::{Rng, SeedableRng};
    use vollab::lstm::{windows_from, LstmConfig, MinMaxScaler};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..13).map(|_| rng.random_range(-2.0..2.0)).collect();
    let returns = vollab::market_data::ReturnSeries::from_values(day(0), values);
    let scaler = MinMaxScaler::fit(returns.values()).unwrap();
    let data = windows_from(returns.dates(), returns.values(), 5, scaler).unwrap();
    let cfg = LstmConfig {
        layer_sizes: vec![128, 64, 32],
        dropout: 0.0,
        epochs: 500,
        ..LstmConfig::default()
    };
    (returns, data, cfg)
}
