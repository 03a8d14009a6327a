//! Diffusion specifications, the built-in model families, the change to the
//! auxiliary measure, and sampling checks of the standing regularity
//! conditions.

use std::fmt;
use std::sync::Arc;

use crate::analytic::{CanonicalParams, SzSupport};
use crate::classify::Tri;
use crate::error::{Error, Result};
use crate::quad::{classify_improper, integrate, Boundary, ProbePolicy};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Which measure a spec or profile refers to. `Tilde` is the auxiliary measure
/// with drift `μ + ρbσ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    Original,
    Tilde,
}

impl Measure {
    pub fn label(&self) -> &'static str {
        match self {
            Measure::Original => "original",
            Measure::Tilde => "tilde",
        }
    }
}

impl std::str::FromStr for Measure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Measure> {
        match s {
            "original" => Ok(Measure::Original),
            "tilde" => Ok(Measure::Tilde),
            _ => Err(Error::Validation(format!("unknown measure '{s}' (original|tilde)"))),
        }
    }
}

/// Parametric identity of a spec, when it is one of the canonical models
/// viewed under a known measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descriptor {
    pub params: CanonicalParams,
    pub measure: Measure,
}

/// A time-homogeneous diffusion `dY = μ(Y)dt + σ(Y)dW` on `(ℓ, r)` together
/// with the exponent `b` and correlation `ρ` of the price.
#[derive(Clone)]
pub struct DiffusionSpec {
    drift: RealFn,
    diffusion: RealFn,
    exponent: RealFn,
    left: f64,
    right: f64,
    start: f64,
    rho: f64,
    reference: f64,
    descriptor: Option<Descriptor>,
}

impl fmt::Debug for DiffusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("interval", &(self.left, self.right))
            .field("start", &self.start)
            .field("rho", &self.rho)
            .field("reference", &self.reference)
            .field("descriptor", &self.descriptor)
            .finish_non_exhaustive()
    }
}

impl DiffusionSpec {
    /// Builds a spec with reference point `c = x₀`.
    pub fn new(
        drift: RealFn,
        diffusion: RealFn,
        exponent: RealFn,
        interval: (f64, f64),
        start: f64,
        rho: f64,
    ) -> Result<DiffusionSpec> {
        let (left, right) = interval;
        if left.is_nan() || right.is_nan() || !(left < right) || left == f64::INFINITY || right == f64::NEG_INFINITY {
            return Err(Error::Validation(format!("interval ({left}, {right}) is empty")));
        }
        if !(start > left && start < right) || !start.is_finite() {
            return Err(Error::Validation(format!("start {start} is not inside ({left}, {right})")));
        }
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::Validation(format!("correlation {rho} is outside [-1, 1]")));
        }
        let spec = DiffusionSpec {
            drift,
            diffusion,
            exponent,
            left,
            right,
            start,
            rho,
            reference: start,
            descriptor: None,
        };
        for x in spec.sample_grid(33) {
            let s = spec.sigma(x);
            if !s.is_finite() {
                return Err(Error::Evaluation { what: "sigma", x });
            }
            if s == 0.0 {
                return Err(Error::Validation(format!("sigma vanishes at x = {x}")));
            }
        }
        Ok(spec)
    }

    /// Convenience constructor from plain closures.
    pub fn from_fns(
        drift: impl Fn(f64) -> f64 + Send + Sync + 'static,
        diffusion: impl Fn(f64) -> f64 + Send + Sync + 'static,
        exponent: impl Fn(f64) -> f64 + Send + Sync + 'static,
        interval: (f64, f64),
        start: f64,
        rho: f64,
    ) -> Result<DiffusionSpec> {
        DiffusionSpec::new(Arc::new(drift), Arc::new(diffusion), Arc::new(exponent), interval, start, rho)
    }

    pub fn with_reference(mut self, c: f64) -> Result<DiffusionSpec> {
        if !(c > self.left && c < self.right) || !c.is_finite() {
            return Err(Error::Validation(format!(
                "reference point {c} is not inside ({}, {})",
                self.left, self.right
            )));
        }
        self.reference = c;
        Ok(self)
    }

    /// Moves the start point; the reference point follows it.
    pub fn with_start(mut self, x0: f64) -> Result<DiffusionSpec> {
        if !(x0 > self.left && x0 < self.right) || !x0.is_finite() {
            return Err(Error::Validation(format!(
                "start {x0} is not inside ({}, {})",
                self.left, self.right
            )));
        }
        self.start = x0;
        self.reference = x0;
        Ok(self)
    }

    pub fn with_rho(mut self, rho: f64) -> Result<DiffusionSpec> {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::Validation(format!("correlation {rho} is outside [-1, 1]")));
        }
        self.rho = rho;
        self.descriptor = None;
        Ok(self)
    }

    /// Restricts the state space to a subinterval, keeping the coefficients.
    pub fn restricted(&self, left: f64, right: f64) -> Result<DiffusionSpec> {
        if !(left >= self.left && right <= self.right && left < right) {
            return Err(Error::Validation(format!(
                "({left}, {right}) is not a subinterval of ({}, {})",
                self.left, self.right
            )));
        }
        if !(self.start > left && self.start < right) {
            return Err(Error::Validation(format!("start {} is not inside ({left}, {right})", self.start)));
        }
        let mut s = self.clone();
        s.left = left;
        s.right = right;
        s.descriptor = None;
        if !(s.reference > left && s.reference < right) {
            s.reference = s.start;
        }
        Ok(s)
    }

    pub fn mu(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    pub fn sigma(&self, x: f64) -> f64 {
        (self.diffusion)(x)
    }

    pub fn b(&self, x: f64) -> f64 {
        (self.exponent)(x)
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.left, self.right)
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn reference(&self) -> f64 {
        self.reference
    }

    pub fn descriptor(&self) -> Option<&Descriptor> {
        self.descriptor.as_ref()
    }

    pub fn drift_fn(&self) -> RealFn {
        self.drift.clone()
    }

    pub fn diffusion_fn(&self) -> RealFn {
        self.diffusion.clone()
    }

    pub fn exponent_fn(&self) -> RealFn {
        self.exponent.clone()
    }

    /// Interior points spread geometrically toward each boundary from `x₀`.
    pub fn sample_grid(&self, per_side: usize) -> Vec<f64> {
        let mut pts = vec![self.start];
        for side in [Boundary::Left(self.left), Boundary::Right(self.right)] {
            let path = crate::quad::ProbePath::new(self.start, side, None);
            for k in 1..=per_side {
                let u = k as f64 * 0.5;
                let x = path.point(u);
                if x > self.left && x < self.right && x.is_finite() {
                    pts.push(x);
                }
            }
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts
    }
}

/// The same diffusion under the auxiliary measure: drift `μ + ρ·b·σ`.
pub fn tilde(spec: &DiffusionSpec) -> DiffusionSpec {
    let mu = spec.drift.clone();
    let sigma = spec.diffusion.clone();
    let b = spec.exponent.clone();
    let rho = spec.rho;
    let mut out = spec.clone();
    out.drift = Arc::new(move |x| {
        let m = mu(x);
        if rho == 0.0 {
            m
        } else {
            m + rho * b(x) * sigma(x)
        }
    });
    out.descriptor = match spec.descriptor {
        Some(Descriptor { params, measure: Measure::Original }) => {
            Some(Descriptor { params, measure: Measure::Tilde })
        }
        Some(d) if rho == 0.0 => Some(d),
        _ => None,
    };
    out
}

/// The spec viewed under `measure`.
pub fn under(spec: &DiffusionSpec, measure: Measure) -> DiffusionSpec {
    match measure {
        Measure::Original => spec.clone(),
        Measure::Tilde => tilde(spec),
    }
}

/// Instantiates a canonical model with start point 1.
pub fn builtin(params: &CanonicalParams) -> Result<DiffusionSpec> {
    params.validate()?;
    let inf = f64::INFINITY;
    let mut spec = match *params {
        CanonicalParams::Heston { kappa, theta, xi, rho } => DiffusionSpec::from_fns(
            move |x| kappa * (theta - x),
            move |x: f64| xi * x.sqrt(),
            |x: f64| x.sqrt(),
            (0.0, inf),
            1.0,
            rho,
        )?,
        CanonicalParams::ThreeHalves { omega, theta, xi, rho } => DiffusionSpec::from_fns(
            move |x| omega * x - theta * x * x,
            move |x: f64| xi * x * x.sqrt(),
            |x: f64| x.sqrt(),
            (0.0, inf),
            1.0,
            rho,
        )?,
        CanonicalParams::SchobelZhu { kappa, theta, gamma, rho, support } => {
            let left = match support {
                SzSupport::RealLine => f64::NEG_INFINITY,
                SzSupport::HalfLine => 0.0,
            };
            DiffusionSpec::from_fns(move |x| kappa * (theta - x), move |_| gamma, |x| x, (left, inf), 1.0, rho)?
        }
        CanonicalParams::HullWhite { mu, sigma, rho } => DiffusionSpec::from_fns(
            move |x| mu * x,
            move |x| sigma * x,
            |x: f64| x.sqrt(),
            (0.0, inf),
            1.0,
            rho,
        )?,
    };
    spec.descriptor = Some(Descriptor { params: *params, measure: Measure::Original });
    Ok(spec)
}

/// One probed integral in a condition check.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub interval: (f64, f64),
    pub integrand: &'static str,
    /// `None` when the integral did not converge on this subinterval.
    pub estimate: Option<f64>,
}

/// Sampling evidence for the standing conditions. A "holds" verdict is
/// evidence on the probed ladder, not a proof.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    /// Local integrability of `1/σ²` and `μ/σ²` (with `σ ≠ 0`).
    pub es_condition: Tri,
    /// Local integrability of `b²/σ²`.
    pub b_local_integrability: Tri,
    /// `b² > 0` on a set of positive measure.
    pub b_nontrivial: Tri,
    pub witnesses: Vec<Witness>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    /// The standing conditions; `b ≡ 0` is allowed and only makes `Z` trivial.
    pub fn all_hold(&self) -> Tri {
        Tri::all([self.es_condition, self.b_local_integrability])
    }
}

/// How densely the compact ladder inside `(ℓ, r)` is probed.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPolicy {
    /// Number of nested compact subintervals `[a_k, b_k]`.
    pub rungs: usize,
    /// Sample points per side for sign and finiteness checks.
    pub samples: usize,
    pub tol: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy { rungs: 8, samples: 400, tol: 1e-8 }
    }
}

/// Checks the regularity conditions by quadrature over a ladder of compact
/// subintervals around `x₀` and by sampling `σ` and `b`.
pub fn check_conditions(spec: &DiffusionSpec, grid: &GridPolicy) -> Result<ConditionReport> {
    let (l, r) = spec.interval();
    let x0 = spec.start();
    let left = crate::quad::ProbePath::new(x0, Boundary::Left(l), None);
    let right = crate::quad::ProbePath::new(x0, Boundary::Right(r), None);
    let mut notes = Vec::new();

    // Dense samples across the outermost rung: sign changes or zeros of σ and
    // non-finite coefficients are direct failures.
    let outer = grid.rungs as f64 * 0.5;
    let (lo, hi) = (left.point(outer), right.point(outer));
    let n = grid.samples.max(16);
    let mut pts: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    pts.extend(spec.sample_grid(grid.samples / 8 + 8));
    pts.retain(|x| *x > l && *x < r);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut es = Tri::Yes;
    let mut bint = Tri::Yes;
    let mut any_b = false;
    let mut prev_sign: Option<(f64, f64)> = None;
    for &x in &pts {
        let (m, s, b) = (spec.mu(x), spec.sigma(x), spec.b(x));
        if m.is_nan() || s.is_nan() || b.is_nan() {
            let what = if m.is_nan() { "mu" } else if s.is_nan() { "sigma" } else { "b" };
            return Err(Error::Evaluation { what, x });
        }
        if s == 0.0 || !s.is_finite() || !m.is_finite() {
            es = Tri::No;
            notes.push(format!("sigma or mu degenerate at x = {x}"));
        }
        if !b.is_finite() {
            bint = Tri::No;
            notes.push(format!("b is not finite at x = {x}"));
        }
        if b * b > 0.0 {
            any_b = true;
        }
        if let Some((px, ps)) = prev_sign {
            if ps * s < 0.0 {
                es = Tri::No;
                notes.push(format!("sigma changes sign between {px} and {x}"));
            }
        }
        prev_sign = Some((x, s));
    }

    let mut witnesses = Vec::new();
    let integrands: [(&'static str, Box<dyn Fn(f64) -> f64 + '_>); 3] = [
        ("1/sigma^2", Box::new(|x: f64| 1.0 / spec.sigma(x).powi(2))),
        ("mu/sigma^2", Box::new(|x: f64| spec.mu(x) / spec.sigma(x).powi(2))),
        ("b^2/sigma^2", Box::new(|x: f64| spec.b(x).powi(2) / spec.sigma(x).powi(2))),
    ];
    for k in 1..=grid.rungs {
        let u = k as f64 * 0.5;
        let (a, b) = (left.point(u), right.point(u));
        for (id, f) in &integrands {
            let verdict = match integrate(f, a, b, grid.tol) {
                Ok((v, _)) => {
                    witnesses.push(Witness { interval: (a, b), integrand: id, estimate: Some(v) });
                    Tri::Yes
                }
                Err(_) => {
                    witnesses.push(Witness { interval: (a, b), integrand: id, estimate: None });
                    locate_divergence(f, a, b, &pts, &mut notes)
                }
            };
            let slot = if *id == "b^2/sigma^2" { &mut bint } else { &mut es };
            *slot = Tri::meet(*slot, verdict);
        }
    }
    let b_nontrivial = if any_b { Tri::Yes } else { Tri::No };
    Ok(ConditionReport { es_condition: es, b_local_integrability: bint, b_nontrivial, witnesses, notes })
}

/// After a failed quadrature on `[a, b]`, looks for an interior point where
/// the integral diverges from either side.
fn locate_divergence(f: &dyn Fn(f64) -> f64, a: f64, b: f64, pts: &[f64], notes: &mut Vec<String>) -> Tri {
    let inside: Vec<f64> = pts.iter().cloned().filter(|x| *x > a && *x < b).collect();
    let worst = inside
        .iter()
        .cloned()
        .max_by(|x, y| f(*x).abs().partial_cmp(&f(*y).abs()).unwrap_or(std::cmp::Ordering::Equal));
    let Some(x) = worst else { return Tri::Inconclusive };
    // Narrow down to the peak of |f| between the neighbouring samples.
    let i = inside.iter().position(|&y| y == x).unwrap();
    let (mut lo, mut hi) = (if i > 0 { inside[i - 1] } else { a }, inside.get(i + 1).copied().unwrap_or(b));
    let g = |y: f64| f(y).abs();
    let score = |y: f64| {
        let v = g(y);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    for _ in 0..200 {
        if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if score(m1) < score(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let x = 0.5 * (lo + hi);
    let policy = ProbePolicy { probe_count: 16, ..ProbePolicy::default() };
    for side in [Boundary::Left(x), Boundary::Right(x)] {
        let anchor = match side {
            Boundary::Left(_) => x + 0.5 * (b - x),
            Boundary::Right(_) => x - 0.5 * (x - a),
        };
        if let Ok(v) = classify_improper(g, anchor, side, &policy) {
            if v.is_infinite() {
                notes.push(format!("integral diverges next to x = {x}"));
                return Tri::No;
            }
        }
    }
    Tri::Inconclusive
}
