mod common;

use std::fs;
use std::path::Path;
use std::time::Instant;

use chrono::NaiveDate;
use common::{fixture, integrate_line, reference_t_pdf};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vollab::backtest::backtest_garch;
use vollab::cli;
use vollab::dist::InnovationDist;
use vollab::estimation::{bic, fit, BicTable, FitOptions, FitResult};
use vollab::garch::{self, Family, GarchParams, GarchSpec};
use vollab::lstm::{gradient_check, LstmConfig, TrainedLstm};
use vollab::market_data::{self, annualize, Horizon, ReturnSeries};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn estimate(f: &FitResult, name: &str) -> (f64, f64, f64) {
    let e = f.estimates.iter().find(|e| e.name == name).expect("parameter present");
    (e.value, e.stderr.unwrap_or(f64::NAN), e.p_value.unwrap_or(f64::NAN))
}

fn garch_recovery() -> Outcome {
    let start = Instant::now();
    let spec = GarchSpec::new(Family::Garch, InnovationDist::Normal);
    let truth = GarchParams {
        mu: 0.0,
        omega: 0.1,
        alpha: 0.1,
        gamma: 0.0,
        beta: 0.8,
    };
    let r = garch::simulate(&spec, &truth, 20_000, 20_240_101)
        .map_err(|e| e.to_string())?
        .returns;
    let f = fit(&spec, &r, &FitOptions::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let mut ok = f.converged && secs < 60.0;
    let mut parts = Vec::new();
    for (name, value) in [("omega", truth.omega), ("alpha", truth.alpha), ("beta", truth.beta)] {
        let (est, se, _) = estimate(&f, name);
        let err = (est - value).abs();
        ok &= err <= 0.05 && err <= 3.0 * se;
        parts.push(format!("{name} {est:.4} (se {se:.4})"));
    }
    check(ok, format!("{}; {secs:.2} s", parts.join(", ")))
}

fn gjr_asymmetry() -> Outcome {
    let start = Instant::now();
    let spec = GarchSpec::new(Family::Gjr, InnovationDist::Normal);
    let truth = GarchParams {
        mu: 0.0,
        omega: 0.1,
        alpha: 0.05,
        gamma: 0.15,
        beta: 0.75,
    };
    let r = garch::simulate(&spec, &truth, 20_000, 20_240_102)
        .map_err(|e| e.to_string())?
        .returns;
    let f = fit(&spec, &r, &FitOptions::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let (g, se, p) = estimate(&f, "gamma");
    check(
        f.converged && (0.05..=0.25).contains(&g) && p < 0.05 && secs < 60.0,
        format!("gamma {g:.4} (se {se:.4}, p {p:.2e}); {secs:.2} s"),
    )
}

fn egarch_oracle() -> Outcome {
    let r = [0.8, -1.3, 0.25, 2.1, -0.6, -1.9, 0.4, 1.1, -0.35, 0.05];
    let params = GarchParams {
        mu: 0.05,
        omega: 0.02,
        alpha: 0.15,
        gamma: -0.08,
        beta: 0.93,
    };
    let normal = [
        1.2237500000000001,
        1.1451793029920492,
        1.372372203502709,
        1.2295532653097285,
        1.2484661940283883,
        1.271882320342737,
        1.6848308884477603,
        1.4983147701954282,
        1.3998998177573196,
        1.3376668203475635,
    ];
    let student = [
        1.2237500000000001,
        1.1560142836609395,
        1.3956391063596392,
        1.2606186989058812,
        1.2877973181730455,
        1.3187734217566969,
        1.7465070023437042,
        1.563391562669341,
        1.468284870226439,
        1.4089815871183418,
    ];
    let t5 = InnovationDist::student_t(5.0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (dist, expected) in [(InnovationDist::Normal, normal), (t5, student)] {
        let spec = GarchSpec::new(Family::Egarch, dist);
        let path = garch::filter_variance(&spec, &params, &r).map_err(|e| e.to_string())?;
        for (a, b) in path.sigma2.iter().zip(expected) {
            worst = worst.max((a - b).abs());
        }
    }
    check(worst < 1e-10, format!("max abs diff {worst:.2e} over 20 values"))
}

fn bic_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let ll = rng.random_range(-1e5..1e5);
        let n = rng.random_range(1..1_000_000usize);
        let k = rng.random_range(1..20usize);
        let expected = -2.0 * ll + (n as f64).ln() * k as f64;
        worst = worst.max((bic(ll, n, k) - expected).abs());
    }
    check(worst <= 1e-12, format!("max abs diff {worst:.2e} over 1000 triples"))
}

fn normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut mass_err, mut mean_err, mut var_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut t_err: f64 = 0.0;
    for _ in 0..20 {
        let nu = rng.random_range(2.5..40.0);
        let lambda = rng.random_range(-0.9..0.9);
        let d = InnovationDist::skew_t(nu, lambda).map_err(|e| e.to_string())?;
        let c = d.density().map_err(|e| e.to_string())?.switch_point();
        let g = |z: f64| d.log_density(z).unwrap().exp();
        mass_err = mass_err.max((integrate_line(g, &[c]) - 1.0).abs());
        mean_err = mean_err.max(integrate_line(|z| z * g(z), &[c]).abs());
        var_err = var_err.max((integrate_line(|z| z * z * g(z), &[c]) - 1.0).abs());

        let sym = InnovationDist::skew_t(nu, 0.0).map_err(|e| e.to_string())?;
        for i in 0..=40 {
            let z = -8.0 + 0.4 * i as f64;
            t_err = t_err.max((sym.log_density(z).unwrap().exp() - reference_t_pdf(nu, z)).abs());
        }
    }
    check(
        mass_err < 1e-6 && mean_err < 1e-6 && var_err < 1e-5 && t_err < 1e-12,
        format!("mass {mass_err:.1e}, mean {mean_err:.1e}, variance {var_err:.1e}, t match {t_err:.1e}"),
    )
}

fn gradient() -> Outcome {
    let start = Instant::now();
    let cfg = LstmConfig {
        window_len: 3,
        layer_sizes: vec![4, 3, 2],
        dropout: 0.0,
        ..LstmConfig::default()
    };
    let model = TrainedLstm::init(&cfg, 3).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = ndarray::Array2::from_shape_simple_fn((6, 3), || rng.random_range(-1.0..1.0));
    let y = ndarray::Array1::from_shape_simple_fn(6, || rng.random_range(-0.5..0.5));
    let gc = gradient_check(&model, x.view(), y.view(), 250, 1e-5, 11).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check(
        gc.checked >= 200 && gc.max_rel_error < 1e-4 && secs < 10.0,
        format!(
            "max rel error {:.2e} over {} weights; {secs:.2} s",
            gc.max_rel_error, gc.checked
        ),
    )
}

fn load_returns(name: &str) -> Result<ReturnSeries, String> {
    let prices = market_data::load_csv(fixture(name), "Close").map_err(|e| e.to_string())?;
    market_data::compute_returns(&prices).map_err(|e| e.to_string())
}

fn memorization() -> Outcome {
    let start = Instant::now();
    let (_, batch, cfg) = common::memorization_case(7);
    let model = TrainedLstm::init(&cfg, cfg.seed)
        .and_then(|m| m.train(&batch, None))
        .map_err(|e| e.to_string())?;
    let mse = model.evaluate(&batch).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check(
        batch.len() == 8 && mse < 1e-3 && secs < 60.0,
        format!("training MSE {mse:.2e} on {} scaled samples; {secs:.2} s", batch.len()),
    )
}

fn backtest_equivalence() -> Outcome {
    let spec = GarchSpec::new(Family::Garch, InnovationDist::Normal);
    let truth = GarchParams {
        mu: 0.02,
        omega: 0.1,
        alpha: 0.1,
        gamma: 0.0,
        beta: 0.8,
    };
    let sim = garch::simulate(&spec, &truth, 300, 8)
        .map_err(|e| e.to_string())?
        .returns;
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let series = ReturnSeries::from_values(start, sim.clone());
    let f = fit(&spec, &sim, &FitOptions::default()).map_err(|e| e.to_string())?;
    let span = (series.dates()[100], series.dates()[299]);
    let report = backtest_garch(&f, &series, span, 10).map_err(|e| e.to_string())?;

    let p = f.params;
    let mut s2 = vec![f.backcast];
    for t in 1..sim.len() {
        let e = sim[t - 1] - p.mu;
        s2.push(p.omega + p.alpha * e * e + p.beta * s2[t - 1]);
    }
    let mut worst: f64 = 0.0;
    let mut rows = 0;
    for (i, end) in (109..300).enumerate() {
        let w = &sim[end - 9..=end];
        let predicted = (s2[end - 9..=end].iter().sum::<f64>() / 10.0).sqrt();
        let m = w.iter().sum::<f64>() / 10.0;
        let realized = (w.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 9.0).sqrt();
        worst = worst.max((report.predicted[i] - predicted).abs());
        worst = worst.max((report.realized[i] - realized).abs());
        rows += 1;
    }
    check(
        report.len() == 200 - 9 && rows == report.len() && worst < 1e-10,
        format!("{} windows over a 200-day span, max abs diff {worst:.2e}", report.len()),
    )
}

fn annualization() -> Outcome {
    let m = annualize(1.0, Horizon::Monthly).map_err(|e| e.to_string())?;
    let a = annualize(1.0, Horizon::Annual).map_err(|e| e.to_string())?;
    let (ms, as_) = (format!("{m:.5}"), format!("{a:.5}"));
    check(
        ms == "4.58258" && as_ == "15.87451",
        format!("monthly {ms}, annual {as_}"),
    )
}

fn pipeline(input: &Path, out: &Path) -> Result<(), String> {
    let (i, o) = (input.to_str().unwrap(), out.to_str().unwrap());
    let data = ["--input", i, "--out", o, "--split", "2020-12-31"];
    let steps: [&[&str]; 5] = [
        &["fit", "--model", "gjr"],
        &["backtest", "--model", "gjr"],
        &["forecast", "--model", "egarch"],
        &["backtest", "--model", "lstm", "--epochs", "1"],
        &["compare"],
    ];
    for step in steps {
        let mut argv = vec!["vollab"];
        argv.extend_from_slice(step);
        if step[0] == "compare" {
            argv.extend(["--out", o]);
        } else {
            argv.extend(data);
        }
        let (mut log, mut err) = (Vec::new(), Vec::new());
        if cli::run_with(&argv, &mut log, &mut err) != 0 {
            return Err(format!(
                "`{}` failed: {}",
                step.join(" "),
                String::from_utf8_lossy(&err).trim()
            ));
        }
    }
    Ok(())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("banking.csv");
    fs::copy(fixture("banking.csv"), &input).map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    pipeline(&input, &a)?;
    pipeline(&input, &b)?;
    let mut names: Vec<String> = fs::read_dir(&a)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let mut differing = Vec::new();
    for name in &names {
        if fs::read(a.join(name)).ok() != fs::read(b.join(name)).ok() {
            differing.push(name.clone());
        }
    }
    let required = [
        "banking_gjr_fit.txt",
        "banking_lstm_model.bin",
        "banking_gjr_backtest.csv",
        "comparison.csv",
    ];
    let present = required.iter().all(|r| names.iter().any(|n| n == r));
    check(
        differing.is_empty() && present,
        format!(
            "{} artifacts compared, {} differ {:?}",
            names.len(),
            differing.len(),
            differing
        ),
    )
}

fn nesting() -> Outcome {
    let mut table = BicTable::default();
    let mut worst = f64::INFINITY;
    let mut lines = Vec::new();
    for name in ["banking.csv", "it.csv", "pharma.csv"] {
        let sector = name.trim_end_matches(".csv");
        let returns = load_returns(name)?;
        for dist in [InnovationDist::Normal, InnovationDist::SkewT { nu: 8.0, lambda: 0.0 }] {
            let g = fit(
                &GarchSpec::new(Family::Garch, dist),
                returns.values(),
                &FitOptions::default(),
            )
            .map_err(|e| e.to_string())?;
            let j = fit(
                &GarchSpec::new(Family::Gjr, dist),
                returns.values(),
                &FitOptions::default(),
            )
            .map_err(|e| e.to_string())?;
            worst = worst.min(j.loglik - g.loglik);
            lines.push(format!("{sector}/{}: {:.4} vs {:.4}", dist.label(), j.loglik, g.loglik));
            if dist.label() == "skewt" {
                table.insert(sector, Family::Garch, g.bic);
                table.insert(sector, Family::Gjr, j.bic);
            }
        }
    }
    print!("{}", table.to_csv());
    check(
        worst >= -1e-6,
        format!("min GJR - GARCH loglik {worst:.4}; {}", lines.join(", ")),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("garch parameter recovery", garch_recovery),
        ("gjr asymmetry detection", gjr_asymmetry),
        ("egarch filter oracle", egarch_oracle),
        ("bic exactness", bic_exactness),
        ("skew-t normalization", normalization),
        ("lstm gradient check", gradient),
        ("lstm memorization", memorization),
        ("backtest brute-force equivalence", backtest_equivalence),
        ("annualization", annualization),
        ("pipeline determinism", determinism),
        ("gjr nests garch", nesting),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
