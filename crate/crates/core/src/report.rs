//! Line-oriented `key=value` text for reports.
//!
//! The first line is a header naming the document kind and format version,
//! e.g. `svmart-report 1 martingale`. Every following line is `key=value`;
//! keys are stable, list-valued keys repeat, and nested reports use a dotted
//! prefix. Floats are written in shortest round-trip form, so parsing an
//! emitted document gives back an equal value. Backslashes and newlines in
//! values are escaped as `\\` and `\n`.

use crate::classify::{ExitBehavior, ExitCase, MartingaleReport, Tri};
use crate::error::{Error, Result};
use crate::mc::{McEstimate, Tallies};
use crate::model::{ConditionReport, Measure};
use crate::quad::Finiteness;
use crate::scale::{BoundaryProfile, PROFILE_FIELDS};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "svmart-report";

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\n', "\\n")
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut it = s.chars();
    while let Some(c) = it.next() {
        if c == '\\' {
            match it.next() {
                Some('n') => out.push('\n'),
                Some(o) => out.push(o),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

struct Writer {
    lines: Vec<String>,
}

impl Writer {
    fn new(kind: &str) -> Writer {
        Writer { lines: vec![format!("{MAGIC} {FORMAT_VERSION} {kind}")] }
    }

    fn put(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{key}={}", escape(&value.to_string())));
    }

    fn num(&mut self, key: &str, v: f64) {
        self.lines.push(format!("{key}={v:?}"));
    }

    fn finish(self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

fn write_finiteness(w: &mut Writer, key: &str, f: &Finiteness) {
    w.put(key, f.label());
    match f {
        Finiteness::Finite { estimate, error } => {
            if let Some(e) = estimate {
                w.num(&format!("{key}.estimate"), *e);
            }
            if let Some(e) = error {
                w.num(&format!("{key}.error"), *e);
            }
        }
        Finiteness::Infinite { rate: Some(r) } => w.num(&format!("{key}.rate"), *r),
        _ => {}
    }
}

fn write_profile(w: &mut Writer, prefix: &str, p: &BoundaryProfile) {
    w.put(&format!("{prefix}.measure"), p.measure.label());
    for (name, f) in PROFILE_FIELDS.iter().zip(p.fields().iter()) {
        write_finiteness(w, &format!("{prefix}.{name}"), f);
    }
}

fn write_exit(w: &mut Writer, prefix: &str, e: &ExitBehavior) {
    w.put(&format!("{prefix}.case"), e.case.label());
    if let Some(p) = e.exit_prob_right {
        w.num(&format!("{prefix}.exit_prob_right"), p);
    }
}

fn write_martingale(w: &mut Writer, prefix: &str, r: &MartingaleReport) {
    let k = |s: &str| format!("{prefix}{s}");
    w.put(&k("conditions_ok"), r.conditions_ok);
    w.put(&k("true_martingale"), r.true_martingale);
    w.put(&k("ui_martingale"), r.ui_martingale);
    w.put(&k("positive_finite_t"), r.positive_finite_t);
    w.put(&k("positive_at_infinity"), r.positive_at_infinity);
    w.put(&k("absorbed_at_zero"), r.absorbed_at_zero);
    write_exit(w, &k("exit_original"), &r.exit_original);
    write_exit(w, &k("exit_tilde"), &r.exit_tilde);
    write_profile(w, &k("profile_original"), &r.profile_original);
    write_profile(w, &k("profile_tilde"), &r.profile_tilde);
    for (name, v) in &r.derived {
        w.num(&k(&format!("derived.{name}")), *v);
    }
    for b in &r.blocking {
        w.put(&k("blocking"), b);
    }
    for d in &r.diagnostics {
        w.put(&k("diagnostic"), d);
    }
    for d in &r.disagreements {
        w.put(&k("disagreement"), d);
    }
    if let Some(a) = &r.analytic {
        write_martingale(w, &k("analytic."), a);
    }
}

pub fn emit_martingale(r: &MartingaleReport) -> String {
    let mut w = Writer::new("martingale");
    write_martingale(&mut w, "", r);
    w.finish()
}

pub fn emit_conditions(r: &ConditionReport) -> String {
    let mut w = Writer::new("conditions");
    w.put("es_condition", r.es_condition);
    w.put("b_local_integrability", r.b_local_integrability);
    w.put("b_nontrivial", r.b_nontrivial);
    for wit in &r.witnesses {
        let est = match wit.estimate {
            Some(v) => format!("{v:?}"),
            None => "diverged".to_string(),
        };
        w.put("witness", format!("{:?} {:?} {} {est}", wit.interval.0, wit.interval.1, wit.integrand));
    }
    for n in &r.notes {
        w.put("note", n);
    }
    w.finish()
}

fn write_estimate(w: &mut Writer, prefix: &str, e: &McEstimate) {
    let k = |s: &str| format!("{prefix}{s}");
    w.put(&k("label"), &e.label);
    w.num(&k("mean"), e.mean);
    w.num(&k("standard_error"), e.standard_error);
    w.put(&k("path_count"), e.path_count);
    w.put(&k("tallies.absorbed_left"), e.tallies.absorbed_left);
    w.put(&k("tallies.absorbed_right"), e.tallies.absorbed_right);
    w.put(&k("tallies.capped"), e.tallies.capped);
    w.put(&k("tallies.survived"), e.tallies.survived);
    w.put(&k("low_confidence"), e.low_confidence);
    for (q, v) in &e.quantiles {
        w.num(&k(&format!("quantile.{q:?}")), *v);
    }
    for n in &e.notes {
        w.put(&k("note"), n);
    }
}

pub fn emit_estimates(es: &[McEstimate]) -> String {
    let mut w = Writer::new("montecarlo");
    w.put("count", es.len());
    for (i, e) in es.iter().enumerate() {
        write_estimate(&mut w, &format!("estimate.{i}."), e);
    }
    w.finish()
}

/// Parsed body of a document: ordered `(key, value)` pairs.
struct Doc {
    kind: String,
    pairs: Vec<(String, String)>,
}

fn parse_doc(text: &str) -> Result<Doc> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| perr(1, 1, "empty document"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(perr(1, 1, "missing report header"));
    }
    let version: u32 = parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| perr(1, 15, "bad version"))?;
    if version != FORMAT_VERSION {
        return Err(perr(1, 15, &format!("unsupported format version {version}")));
    }
    let kind = parts.next().ok_or_else(|| perr(1, 17, "missing document kind"))?.to_string();
    let mut pairs = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| perr(i + 1, 1, "expected key=value"))?;
        pairs.push((k.to_string(), unescape(v)));
    }
    Ok(Doc { kind, pairs })
}

fn perr(line: usize, column: usize, message: &str) -> Error {
    Error::Parse { line, column, message: message.to_string() }
}

impl Doc {
    fn get(&self, key: &str) -> Option<&str> {
        self.pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn req(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Config(format!("report is missing key '{key}'")))
    }

    fn all(&self, key: &str) -> Vec<String> {
        self.pairs.iter().filter(|(k, _)| k == key).map(|(_, v)| v.clone()).collect()
    }

    fn num(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| Error::Config(format!("'{key}' is not a number: {v}"))),
        }
    }

    fn tri(&self, key: &str) -> Result<Tri> {
        self.req(key)?.parse()
    }

    fn finiteness(&self, key: &str) -> Result<Finiteness> {
        Ok(match self.req(key)? {
            "finite" => Finiteness::Finite {
                estimate: self.num(&format!("{key}.estimate"))?,
                error: self.num(&format!("{key}.error"))?,
            },
            "infinite" => Finiteness::Infinite { rate: self.num(&format!("{key}.rate"))? },
            "inconclusive" => Finiteness::Inconclusive,
            other => return Err(Error::Config(format!("'{key}' has unknown value {other}"))),
        })
    }

    fn profile(&self, prefix: &str) -> Result<BoundaryProfile> {
        let measure: Measure = self.req(&format!("{prefix}.measure"))?.parse()?;
        let mut f = [Finiteness::Inconclusive; 6];
        for (i, name) in PROFILE_FIELDS.iter().enumerate() {
            f[i] = self.finiteness(&format!("{prefix}.{name}"))?;
        }
        Ok(BoundaryProfile::from_fields(measure, f))
    }

    fn exit(&self, prefix: &str) -> Result<ExitBehavior> {
        let c = self.req(&format!("{prefix}.case"))?;
        let case = ExitCase::parse(c).ok_or_else(|| Error::Config(format!("unknown exit case {c}")))?;
        Ok(ExitBehavior { case, exit_prob_right: self.num(&format!("{prefix}.exit_prob_right"))? })
    }

    fn martingale(&self, prefix: &str) -> Result<MartingaleReport> {
        let k = |s: &str| format!("{prefix}{s}");
        let derived_prefix = k("derived.");
        let derived = self
            .pairs
            .iter()
            .filter_map(|(key, v)| {
                let name = key.strip_prefix(&derived_prefix)?;
                Some(v.parse::<f64>().map(|x| (name.to_string(), x)))
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Config("derived value is not a number".into()))?;
        let analytic_prefix = k("analytic.");
        let analytic = if self.get(&format!("{analytic_prefix}conditions_ok")).is_some() {
            Some(Box::new(self.martingale(&analytic_prefix)?))
        } else {
            None
        };
        Ok(MartingaleReport {
            conditions_ok: self.tri(&k("conditions_ok"))?,
            true_martingale: self.tri(&k("true_martingale"))?,
            ui_martingale: self.tri(&k("ui_martingale"))?,
            positive_finite_t: self.tri(&k("positive_finite_t"))?,
            positive_at_infinity: self.tri(&k("positive_at_infinity"))?,
            absorbed_at_zero: self.tri(&k("absorbed_at_zero"))?,
            exit_original: self.exit(&k("exit_original"))?,
            exit_tilde: self.exit(&k("exit_tilde"))?,
            profile_original: self.profile(&k("profile_original"))?,
            profile_tilde: self.profile(&k("profile_tilde"))?,
            derived,
            blocking: self.all(&k("blocking")),
            diagnostics: self.all(&k("diagnostic")),
            analytic,
            disagreements: self.all(&k("disagreement")),
        })
    }

    fn estimate(&self, prefix: &str) -> Result<McEstimate> {
        let k = |s: &str| format!("{prefix}{s}");
        let count = |s: &str| -> Result<u64> {
            self.req(&k(s))?.parse().map_err(|_| Error::Config(format!("'{}' is not a count", k(s))))
        };
        let qprefix = k("quantile.");
        let quantiles = self
            .pairs
            .iter()
            .filter_map(|(key, v)| {
                let q = key.strip_prefix(&qprefix)?;
                Some(q.parse::<f64>().and_then(|q| v.parse::<f64>().map(|v| (q, v))))
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Config("quantile is not a number".into()))?;
        Ok(McEstimate {
            label: self.req(&k("label"))?.to_string(),
            mean: self.num(&k("mean"))?.unwrap_or(f64::NAN),
            standard_error: self.num(&k("standard_error"))?.unwrap_or(f64::NAN),
            path_count: count("path_count")?,
            tallies: Tallies {
                absorbed_left: count("tallies.absorbed_left")?,
                absorbed_right: count("tallies.absorbed_right")?,
                capped: count("tallies.capped")?,
                survived: count("tallies.survived")?,
            },
            low_confidence: self.req(&k("low_confidence"))? == "true",
            quantiles,
            notes: self.all(&k("note")),
        })
    }
}

pub fn parse_martingale(text: &str) -> Result<MartingaleReport> {
    let doc = parse_doc(text)?;
    if doc.kind != "martingale" {
        return Err(Error::Config(format!("expected a martingale report, found '{}'", doc.kind)));
    }
    doc.martingale("")
}

pub fn parse_estimates(text: &str) -> Result<Vec<McEstimate>> {
    let doc = parse_doc(text)?;
    if doc.kind != "montecarlo" {
        return Err(Error::Config(format!("expected a montecarlo report, found '{}'", doc.kind)));
    }
    let n: usize = doc.req("count")?.parse().map_err(|_| Error::Config("bad count".into()))?;
    (0..n).map(|i| doc.estimate(&format!("estimate.{i}."))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{analytic_verdicts, CanonicalParams};

    #[test]
    fn escape_round_trip() {
        for s in ["plain", "a\\b", "line\nbreak", "x=1", "\\n literal"] {
            assert_eq!(unescape(&escape(s)), s);
        }
    }

    #[test]
    fn martingale_round_trip_with_nested_oracle() {
        let mut r = analytic_verdicts(&CanonicalParams::Heston { kappa: 1.0, theta: 1.0, xi: 2.0, rho: 0.0 });
        r.profile_original.s_left = Finiteness::Finite { estimate: Some(0.1 + 0.2), error: Some(1e-300) };
        r.profile_tilde.v_right = Finiteness::Infinite { rate: Some(-0.0) };
        r.exit_original.exit_prob_right = Some(1.0 / 3.0);
        r.blocking.push("ui_martingale: tilde.vb_left".into());
        r.diagnostics.push("two\nlines = here".into());
        r.analytic = Some(Box::new(r.clone()));
        let text = emit_martingale(&r);
        assert!(text.starts_with("svmart-report 1 martingale\n"));
        assert_eq!(parse_martingale(&text).unwrap(), r);
    }

    #[test]
    fn rejects_wrong_version() {
        let e = parse_martingale("svmart-report 9 martingale\n").unwrap_err();
        assert!(e.to_string().contains("version"), "{e}");
    }
}
