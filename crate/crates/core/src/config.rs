//! TOML model files.
//!
//! A file names either a canonical family with its parameters, or gives the
//! coefficients as expressions in `x`. Optional `[probe]` and `[mc]` tables
//! override numeric settings. Unknown keys are errors, and errors carry the
//! line and column in the file.
//!
//! ```toml
//! model = "heston"
//! rho = -0.3
//! [params]
//! kappa = 1.0
//! theta = 1.0
//! xi = 2.0
//! ```
//!
//! ```toml
//! drift = "1 - x"
//! diffusion = "2 * sqrt(x)"
//! exponent = "sqrt(x)"
//! lower = 0
//! upper = "inf"
//! start = 1
//! rho = 0.5
//! ```

use std::sync::Arc;

use serde::Deserialize;
use toml::Spanned;

use crate::analytic::{CanonicalParams, SzSupport};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::mc::McConfig;
use crate::model::{builtin, DiffusionSpec};
use crate::scale::ProfilePolicy;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    model: Option<Spanned<String>>,
    params: Option<Spanned<Params>>,
    drift: Option<Spanned<String>>,
    diffusion: Option<Spanned<String>>,
    exponent: Option<Spanned<String>>,
    lower: Option<Spanned<Bound>>,
    upper: Option<Spanned<Bound>>,
    start: Option<f64>,
    rho: Option<f64>,
    reference: Option<f64>,
    probe: Option<ProbeSection>,
    mc: Option<McSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub kappa: Option<f64>,
    pub theta: Option<f64>,
    pub xi: Option<f64>,
    pub omega: Option<f64>,
    pub gamma: Option<f64>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub support: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Bound {
    Number(f64),
    Text(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub probe_count: Option<usize>,
    pub ratio: Option<f64>,
    pub substeps: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub paths: Option<u64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub barriers: Option<[f64; 2]>,
    pub y_cap: Option<f64>,
    pub phi_cap: Option<f64>,
    pub scheme: Option<String>,
    pub workers: Option<usize>,
    pub antithetic: Option<bool>,
    pub bridge: Option<bool>,
    pub low_confidence_fraction: Option<f64>,
}

impl ProbeSection {
    pub fn apply(&self, p: &mut ProfilePolicy) {
        if let Some(v) = self.probe_count {
            p.probe.probe_count = v;
        }
        if let Some(v) = self.ratio {
            p.probe.ratio = v;
        }
        if let Some(v) = self.substeps {
            p.substeps = v;
        }
        if let Some(v) = self.tol {
            p.probe.tol = v;
        }
    }
}

impl McSection {
    pub fn apply(&self, c: &mut McConfig) -> Result<()> {
        macro_rules! set {
            ($($f:ident => $g:ident),*) => { $(if let Some(v) = self.$f { c.$g = v; })* };
        }
        set!(paths => path_count, dt => dt, horizon => horizon, seed => seed, y_cap => y_cap,
             phi_cap => phi_cap, workers => workers, antithetic => antithetic, bridge => bridge,
             low_confidence_fraction => low_confidence_fraction);
        if self.epsilon.is_some() {
            c.epsilon = self.epsilon;
        }
        if let Some([lo, hi]) = self.barriers {
            c.barriers = Some((lo, hi));
        }
        if let Some(s) = &self.scheme {
            c.scheme = s.parse()?;
        }
        Ok(())
    }
}

/// A loaded model file.
#[derive(Debug)]
pub struct ModelFile {
    pub spec: DiffusionSpec,
    pub canonical: Option<CanonicalParams>,
    pub probe: ProbeSection,
    pub mc: McSection,
}

/// 1-based line and column of a byte offset.
fn locate(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

fn at(src: &str, offset: usize, message: impl Into<String>) -> Error {
    let (line, column) = locate(src, offset);
    Error::Parse { line, column, message: message.into() }
}

fn expression(src: &str, field: &str, s: &Spanned<String>) -> Result<Arc<Expr>> {
    Expr::parse(s.get_ref()).map(Arc::new).map_err(|e| {
        // Span covers the opening quote; expression columns are 1-based.
        at(src, s.span().start + e.column, format!("in {field}: {}", e.message))
    })
}

fn bound(src: &str, b: &Spanned<Bound>) -> Result<f64> {
    match b.get_ref() {
        Bound::Number(v) => Ok(*v),
        Bound::Text(t) => match t.trim() {
            "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
            "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
            other => other.parse().map_err(|_| at(src, b.span().start, format!("'{other}' is not a number or ±inf"))),
        },
    }
}

fn canonical(src: &str, model: &Spanned<String>, params: &Spanned<Params>, rho: f64) -> Result<CanonicalParams> {
    let p = params.get_ref();
    let need = |name: &str, v: Option<f64>| {
        v.ok_or_else(|| at(src, params.span().start, format!("[params] is missing '{name}' for {}", model.get_ref())))
    };
    let given: [(&str, bool); 8] = [
        ("kappa", p.kappa.is_some()),
        ("theta", p.theta.is_some()),
        ("xi", p.xi.is_some()),
        ("omega", p.omega.is_some()),
        ("gamma", p.gamma.is_some()),
        ("mu", p.mu.is_some()),
        ("sigma", p.sigma.is_some()),
        ("support", p.support.is_some()),
    ];
    let allowed: &[&str] = match model.get_ref().as_str() {
        "heston" => &["kappa", "theta", "xi"],
        "three_halves" => &["omega", "theta", "xi"],
        "schobel_zhu" => &["kappa", "theta", "gamma", "support"],
        "hull_white" => &["mu", "sigma"],
        other => {
            return Err(at(
                src,
                model.span().start,
                format!("unknown model '{other}' (heston, three_halves, schobel_zhu, hull_white)"),
            ))
        }
    };
    if let Some((name, _)) = given.iter().find(|(n, g)| *g && !allowed.contains(n)) {
        return Err(at(src, params.span().start, format!("parameter '{name}' does not apply to {}", model.get_ref())));
    }
    let span = params.span();
    let params = match model.get_ref().as_str() {
        "heston" => CanonicalParams::Heston { kappa: need("kappa", p.kappa)?, theta: need("theta", p.theta)?, xi: need("xi", p.xi)?, rho },
        "three_halves" => CanonicalParams::ThreeHalves { omega: need("omega", p.omega)?, theta: need("theta", p.theta)?, xi: need("xi", p.xi)?, rho },
        "schobel_zhu" => CanonicalParams::SchobelZhu {
            kappa: need("kappa", p.kappa)?,
            theta: need("theta", p.theta)?,
            gamma: need("gamma", p.gamma)?,
            rho,
            support: match &p.support {
                Some(s) => s.parse().map_err(|e: Error| at(src, params.span().start, e.to_string()))?,
                None => SzSupport::RealLine,
            },
        },
        _ => CanonicalParams::HullWhite { mu: need("mu", p.mu)?, sigma: need("sigma", p.sigma)?, rho },
    };
    params.validate().map_err(|e| at(src, span.start, e.to_string()))?;
    Ok(params)
}

/// Parses a model file.
pub fn parse_model_file(src: &str) -> Result<ModelFile> {
    let file: FileConfig = toml::from_str(src).map_err(|e| {
        let off = e.span().map_or(0, |s| s.start);
        at(src, off, e.message().to_string())
    })?;
    let rho = file.rho.unwrap_or(0.0);
    let expr_keys = [&file.drift, &file.diffusion, &file.exponent];
    let (spec, canonical) = match (&file.model, expr_keys.iter().any(|k| k.is_some())) {
        (Some(m), false) => {
            if let Some(b) = file.lower.as_ref().or(file.upper.as_ref()) {
                return Err(at(src, b.span().start, "lower/upper are fixed by the canonical model"));
            }
            let empty = Spanned::new(m.span(), Params::default());
            let params = file.params.as_ref().unwrap_or(&empty);
            let c = canonical(src, m, params, rho)?;
            let mut spec = builtin(&c)?;
            if let Some(x0) = file.start {
                spec = spec.with_start(x0)?;
            }
            (spec, Some(c))
        }
        (Some(m), true) => {
            return Err(at(src, m.span().start, "give either 'model' or drift/diffusion/exponent, not both"));
        }
        (None, _) => {
            if let Some(p) = &file.params {
                return Err(at(src, p.span().start, "[params] needs 'model'"));
            }
            fn get<'a>(k: &'a Option<Spanned<String>>, name: &str) -> Result<&'a Spanned<String>> {
                k.as_ref().ok_or_else(|| Error::Parse { line: 1, column: 1, message: format!("missing '{name}' (or give 'model')") })
            }
            let mu = expression(src, "drift", get(&file.drift, "drift")?)?;
            let sigma = expression(src, "diffusion", get(&file.diffusion, "diffusion")?)?;
            let b = expression(src, "exponent", get(&file.exponent, "exponent")?)?;
            let lower = file.lower.as_ref().map_or(Ok(f64::NEG_INFINITY), |b| bound(src, b))?;
            let upper = file.upper.as_ref().map_or(Ok(f64::INFINITY), |b| bound(src, b))?;
            let start = file.start.ok_or_else(|| Error::Parse { line: 1, column: 1, message: "missing 'start'".into() })?;
            let spec = DiffusionSpec::new(
                Arc::new(move |x| mu.eval(x)),
                Arc::new(move |x| sigma.eval(x)),
                Arc::new(move |x| b.eval(x)),
                (lower, upper),
                start,
                rho,
            )?;
            (spec, None)
        }
    };
    let spec = match file.reference {
        Some(c) => spec.with_reference(c)?,
        None => spec,
    };
    Ok(ModelFile { spec, canonical, probe: file.probe.unwrap_or_default(), mc: file.mc.unwrap_or_default() })
}

pub fn load_model_file(path: &std::path::Path) -> Result<ModelFile> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_model_file(&src).map_err(|e| match e {
        Error::Parse { line, column, message } => {
            Error::Config(format!("{}:{line}:{column}: {message}", path.display()))
        }
        other => other,
    })
}
