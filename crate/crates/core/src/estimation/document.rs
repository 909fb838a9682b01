//! Plain-text `key=value` fit documents and the sector × family BIC table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{FitResult, ParamEstimate};
use crate::dist::InnovationDist;
use crate::garch::{Family, GarchParams, GarchSpec};

const FORMAT_VERSION: u32 = 1;
const NA: &str = "NA";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DocumentError {
    #[error("line {line}: expected key=value")]
    Malformed { line: usize },
    #[error("missing field '{0}'")]
    Missing(String),
    #[error("field '{field}' has invalid value '{value}'")]
    Invalid { field: String, value: String },
    #[error("unsupported document version {0}")]
    Version(String),
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        NA.into()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.into(), num)
}

/// Serializes a fit. Floats use shortest round-trip formatting, so
/// [`parse_fit_document`] restores them bit for bit.
pub fn write_fit_document(fit: &FitResult) -> String {
    let mut s = String::new();
    let p = &fit.params;
    let asym = fit.spec.family.has_asymmetry();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(s, "{k}={v}");
    };
    line("version", FORMAT_VERSION.to_string());
    line("family", fit.spec.family.label().into());
    line("dist", fit.spec.dist.label().into());
    line("p", fit.spec.p.to_string());
    line("q", fit.spec.q.to_string());
    line("o", fit.spec.o.to_string());
    line("mu", num(p.mu));
    line("omega", num(p.omega));
    line("alpha", num(p.alpha));
    line("gamma", if asym { num(p.gamma) } else { NA.into() });
    line("beta", num(p.beta));
    line("nu", opt(fit.spec.dist.nu()));
    line("lambda", opt(fit.spec.dist.lambda()));
    line("loglik", num(fit.loglik));
    line("bic", num(fit.bic));
    line("n_obs", fit.n_obs.to_string());
    line("k", fit.k.to_string());
    line("converged", fit.converged.to_string());
    line("iterations", fit.iterations.to_string());
    line("margin", num(fit.margin));
    line("backcast", num(fit.backcast));
    for e in &fit.estimates {
        line(&format!("stderr.{}", e.name), opt(e.stderr));
    }
    for e in &fit.estimates {
        line(&format!("p.{}", e.name), opt(e.p_value));
    }
    if let Some(note) = &fit.inference_note {
        line("note", note.replace('\n', " "));
    }
    s
}

struct Fields(BTreeMap<String, String>);

impl Fields {
    fn raw(&self, key: &str) -> Result<&str, DocumentError> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| DocumentError::Missing(key.into()))
    }

    fn invalid(key: &str, value: &str) -> DocumentError {
        DocumentError::Invalid {
            field: key.into(),
            value: value.into(),
        }
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, DocumentError> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| Self::invalid(key, v))
    }

    fn float(&self, key: &str) -> Result<f64, DocumentError> {
        match self.raw(key)? {
            NA => Ok(f64::NAN),
            _ => self.parse(key),
        }
    }

    fn opt_float(&self, key: &str) -> Result<Option<f64>, DocumentError> {
        match self.0.get(key).map(String::as_str) {
            None | Some(NA) => Ok(None),
            Some(_) => self.parse(key).map(Some),
        }
    }
}

pub fn parse_fit_document(text: &str) -> Result<FitResult, DocumentError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let (k, v) = l.split_once('=').ok_or(DocumentError::Malformed { line: i + 1 })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let f = Fields(map);
    let version = f.raw("version")?;
    if version != FORMAT_VERSION.to_string() {
        return Err(DocumentError::Version(version.into()));
    }
    let family_raw = f.raw("family")?;
    let family: Family = family_raw.parse().map_err(|_| Fields::invalid("family", family_raw))?;
    let dist = match f.raw("dist")? {
        "normal" => InnovationDist::Normal,
        "t" => InnovationDist::StudentT { nu: f.parse("nu")? },
        "skewt" => InnovationDist::SkewT {
            nu: f.parse("nu")?,
            lambda: f.parse("lambda")?,
        },
        other => return Err(Fields::invalid("dist", other)),
    };
    let spec = GarchSpec {
        family,
        p: f.parse("p")?,
        q: f.parse("q")?,
        o: f.parse("o")?,
        dist,
    };
    let params = GarchParams {
        mu: f.parse("mu")?,
        omega: f.parse("omega")?,
        alpha: f.parse("alpha")?,
        gamma: if family.has_asymmetry() { f.parse("gamma")? } else { 0.0 },
        beta: f.parse("beta")?,
    };
    let transform = super::Transform::new(&spec, 0.0);
    let estimates = transform
        .names()
        .into_iter()
        .zip(transform.natural(&params, &dist))
        .map(|(name, value)| {
            Ok(ParamEstimate {
                stderr: f.opt_float(&format!("stderr.{name}"))?,
                p_value: f.opt_float(&format!("p.{name}"))?,
                name: name.to_string(),
                value,
            })
        })
        .collect::<Result<Vec<_>, DocumentError>>()?;
    Ok(FitResult {
        spec,
        params,
        loglik: f.float("loglik")?,
        bic: f.float("bic")?,
        n_obs: f.parse("n_obs")?,
        k: f.parse("k")?,
        converged: f.parse("converged")?,
        iterations: f.parse("iterations")?,
        margin: f.float("margin")?,
        backcast: f.float("backcast")?,
        estimates,
        inference_note: f.0.get("note").cloned(),
    })
}

/// BIC scores laid out one row per sector, one column per GARCH family.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BicTable {
    rows: BTreeMap<String, BTreeMap<Family, f64>>,
}

impl BicTable {
    pub fn insert(&mut self, sector: &str, family: Family, bic: f64) {
        self.rows.entry(sector.to_string()).or_default().insert(family, bic);
    }

    pub fn get(&self, sector: &str, family: Family) -> Option<f64> {
        self.rows.get(sector)?.get(&family).copied()
    }

    /// Family with the lowest BIC in a sector.
    pub fn best(&self, sector: &str) -> Option<Family> {
        self.rows
            .get(sector)?
            .iter()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(f, _)| *f)
    }

    /// `Sectors,GARCH,GJR-GARCH,EGARCH` CSV, two decimals, blank where a
    /// family was not fitted.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("Sectors");
        for f in Family::ALL {
            out.push(',');
            out.push_str(f.display_name());
        }
        out.push('\n');
        for (sector, scores) in &self.rows {
            out.push_str(sector);
            for f in Family::ALL {
                out.push(',');
                if let Some(v) = scores.get(&f) {
                    let _ = write!(out, "{v:.2}");
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_fit() -> FitResult {
        let spec = GarchSpec::new(Family::Gjr, InnovationDist::SkewT { nu: 6.25, lambda: -0.1 });
        let params = GarchParams {
            mu: 0.0612,
            omega: 0.0311,
            alpha: 0.021,
            gamma: 0.143,
            beta: 0.881,
        };
        let names = ["mu", "omega", "alpha", "gamma", "beta", "nu", "lambda"];
        let values = [0.0612, 0.0311, 0.021, 0.143, 0.881, 6.25, -0.1];
        FitResult {
            spec,
            params,
            loglik: -1930.123456789,
            bic: 3908.07,
            n_obs: 980,
            k: 7,
            converged: true,
            iterations: 812,
            margin: 0.0265,
            backcast: 1.7,
            estimates: names
                .iter()
                .zip(values)
                .map(|(n, v)| ParamEstimate {
                    name: n.to_string(),
                    value: v,
                    stderr: if *n == "lambda" {
                        None
                    } else {
                        Some(0.01 + v.abs() / 10.0)
                    },
                    p_value: if *n == "lambda" { None } else { Some(0.001) },
                })
                .collect(),
            inference_note: None,
        }
    }

    #[test]
    fn document_roundtrip_is_exact() {
        let fit = sample_fit();
        let text = write_fit_document(&fit);
        assert!(text.contains("\nbic=3908.07\n"));
        assert!(text.contains("\nstderr.lambda=NA\n"));
        assert!(text.contains("\np.gamma=0.001\n"));
        assert_eq!(parse_fit_document(&text).unwrap(), fit);
    }

    #[test]
    fn garch_document_marks_gamma_na() {
        let mut fit = sample_fit();
        fit.spec = GarchSpec::new(Family::Garch, InnovationDist::Normal);
        fit.params.gamma = 0.0;
        fit.k = 4;
        fit.estimates
            .retain(|e| ["mu", "omega", "alpha", "beta"].contains(&e.name.as_str()));
        let text = write_fit_document(&fit);
        assert!(text.contains("\ngamma=NA\n"));
        assert!(text.contains("\nnu=NA\n"));
        assert_eq!(parse_fit_document(&text).unwrap(), fit);
    }

    #[test]
    fn rejects_bad_documents() {
        assert_eq!(
            parse_fit_document("version=1\nnonsense\n"),
            Err(DocumentError::Malformed { line: 2 })
        );
        assert_eq!(
            parse_fit_document("version=9\n"),
            Err(DocumentError::Version("9".into()))
        );
        assert_eq!(
            parse_fit_document("version=1\n"),
            Err(DocumentError::Missing("family".into()))
        );
    }

    #[test]
    fn bic_table_layout() {
        let mut t = BicTable::default();
        t.insert("Banking", Family::Garch, 3928.86);
        t.insert("Banking", Family::Gjr, 3908.07);
        t.insert("Banking", Family::Egarch, 3910.93);
        t.insert("IT", Family::Garch, 3824.834);
        assert_eq!(
            t.to_csv(),
            "Sectors,GARCH,GJR-GARCH,EGARCH\nBanking,3928.86,3908.07,3910.93\nIT,3824.83,,\n"
        );
        assert_eq!(t.best("Banking"), Some(Family::Gjr));
    }
}
