//! Tanh-sinh quadrature and the probe-and-fit classifier for improper
//! integrals.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Outcome of classifying an improper integral or a boundary quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Finiteness {
    /// Converges. Numeric classifiers fill `estimate` with the probed partial
    /// integral plus an extrapolated tail and `error` with the spread of that
    /// tail; the oracle leaves both empty.
    Finite { estimate: Option<f64>, error: Option<f64> },
    /// Diverges. `rate` is the fitted growth exponent of the increments per
    /// unit of the probe variable, when one was fitted.
    Infinite { rate: Option<f64> },
    Inconclusive,
}

impl Finiteness {
    pub const FINITE: Finiteness = Finiteness::Finite { estimate: None, error: None };
    pub const INFINITE: Finiteness = Finiteness::Infinite { rate: None };

    pub fn is_finite(&self) -> bool {
        matches!(self, Finiteness::Finite { .. })
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Finiteness::Infinite { .. })
    }

    pub fn is_inconclusive(&self) -> bool {
        matches!(self, Finiteness::Inconclusive)
    }

    /// Same verdict, ignoring estimates and rates.
    pub fn same_kind(&self, other: &Finiteness) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }

    pub fn kind(&self) -> Finiteness {
        match self {
            Finiteness::Finite { .. } => Finiteness::FINITE,
            Finiteness::Infinite { .. } => Finiteness::INFINITE,
            Finiteness::Inconclusive => Finiteness::Inconclusive,
        }
    }

    pub fn estimate(&self) -> Option<f64> {
        match self {
            Finiteness::Finite { estimate, .. } => *estimate,
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Finiteness::Finite { .. } => "finite",
            Finiteness::Infinite { .. } => "infinite",
            Finiteness::Inconclusive => "inconclusive",
        }
    }
}

/// Which end of the interval is probed. The endpoint may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    Left(f64),
    Right(f64),
}

impl Boundary {
    pub fn point(&self) -> f64 {
        match self {
            Boundary::Left(e) | Boundary::Right(e) => *e,
        }
    }

    /// +1 when probing to the right, -1 to the left.
    pub fn direction(&self) -> f64 {
        match self {
            Boundary::Left(_) => -1.0,
            Boundary::Right(_) => 1.0,
        }
    }
}

/// How partial integrals are probed toward a boundary and how their growth is
/// read.
///
/// Probes sit at `u_k = k·ln(ratio)`; a finite endpoint `e` is approached as
/// `e + (c − e)·ratio^{−k}` and an infinite one as `c ± base·(ratio^k − 1)`.
/// Increments between probes are fitted as `exp(p·u)` and the exponent `p`
/// decides: `p ≥ −infinite_slope` diverges, `p ≤ −finite_slope` converges.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbePolicy {
    pub probe_count: usize,
    pub ratio: f64,
    /// Scale of the cutoff toward an infinite endpoint; `None` means `max(1, |c|)`.
    pub base_offset: Option<f64>,
    pub infinite_slope: f64,
    pub finite_slope: f64,
    /// Largest change of the fitted exponent between the last two windows that
    /// still counts as settled when the change is not contracting.
    pub trend_limit: f64,
    pub ceiling: f64,
    pub tol: f64,
}

impl Default for ProbePolicy {
    fn default() -> Self {
        ProbePolicy {
            probe_count: 24,
            ratio: 2.0,
            base_offset: None,
            infinite_slope: 0.008,
            finite_slope: 0.016,
            trend_limit: 0.01,
            ceiling: 1e12,
            tol: 1e-9,
        }
    }
}

impl ProbePolicy {
    pub fn validate(&self) -> Result<()> {
        if self.probe_count < 8 {
            return Err(Error::Validation(format!(
                "probe_count must be at least 8, got {}",
                self.probe_count
            )));
        }
        if !(self.ratio > 1.0) || !self.ratio.is_finite() {
            return Err(Error::Validation(format!("probe ratio must exceed 1, got {}", self.ratio)));
        }
        if !(self.finite_slope > self.infinite_slope) || !(self.infinite_slope >= 0.0) {
            return Err(Error::Validation(
                "need 0 <= infinite_slope < finite_slope".to_string(),
            ));
        }
        if !(self.ceiling > 1.0) || !(self.tol > 0.0) {
            return Err(Error::Validation("ceiling must exceed 1 and tol be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn du(&self) -> f64 {
        self.ratio.ln()
    }
}

/// Geometric path from an anchor `c` toward a boundary, parametrised by `u ≥ 0`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ProbePath {
    pub c: f64,
    pub e: f64,
    pub dir: f64,
    pub base: f64,
}

impl ProbePath {
    pub fn new(c: f64, boundary: Boundary, base_offset: Option<f64>) -> ProbePath {
        ProbePath {
            c,
            e: boundary.point(),
            dir: boundary.direction(),
            base: base_offset.unwrap_or_else(|| c.abs().max(1.0)),
        }
    }

    pub fn point(&self, u: f64) -> f64 {
        if self.e.is_finite() {
            self.e + (self.c - self.e) * (-u).exp()
        } else {
            self.c + self.dir * self.base * u.exp_m1()
        }
    }

    /// Distance travelled from `c` at parameter `u`.
    pub fn travelled(&self, u: f64) -> f64 {
        if self.e.is_finite() {
            (self.c - self.e).abs() * (-(-u).exp_m1())
        } else {
            self.base * u.exp_m1()
        }
    }

    /// Largest usable probe count: stops before the probe point can no longer
    /// be separated from a finite endpoint in floating point.
    pub fn usable_probes(&self, wanted: usize, du: f64) -> usize {
        if !self.e.is_finite() {
            let max_u = (f64::MAX.ln() - 2.0 - self.base.ln().max(0.0)).min(700.0);
            return wanted.min((max_u / du).floor() as usize);
        }
        let gap = (self.c - self.e).abs();
        let floor = if self.e == 0.0 { 1e-290 } else { self.e.abs() * 1e-13 };
        let max_u = (gap / floor).ln();
        wanted.min((max_u / du).floor().max(0.0) as usize)
    }
}

/// Integrates `f` over `(a, b)` by tanh-sinh quadrature with bisection when a
/// single panel does not converge. Infinite endpoints are mapped to a finite
/// interval by `y = a + t/(1−t)`. The integrand is never evaluated at an
/// endpoint. Returns `(estimate, error_bound)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    if a.is_nan() || b.is_nan() || !(a < b) {
        return Err(Error::Validation(format!("integration needs a < b, got ({a}, {b})")));
    }
    if !(tol > 0.0) {
        return Err(Error::Validation(format!("tolerance must be positive, got {tol}")));
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adaptive(&f, a, b, tol),
        (true, false) => {
            let g = |t: f64| {
                let s = 1.0 - t;
                f(a + t / s) / (s * s)
            };
            adaptive(&g, 0.0, 1.0, tol)
        }
        (false, true) => {
            let g = |t: f64| {
                let s = 1.0 - t;
                f(b - t / s) / (s * s)
            };
            adaptive(&g, 0.0, 1.0, tol)
        }
        (false, false) => {
            let right = |t: f64| {
                let s = 1.0 - t;
                f(t / s) / (s * s)
            };
            let left = |t: f64| {
                let s = 1.0 - t;
                f(-t / s) / (s * s)
            };
            let (l, el) = adaptive(&left, 0.0, 1.0, tol)?;
            let (r, er) = adaptive(&right, 0.0, 1.0, tol)?;
            Ok((l + r, el + er))
        }
    }
}

const MAX_LEVEL: usize = 9;
const MAX_PANELS: usize = 64;

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    let whole = tanh_sinh(f, a, b, tol)?;
    if whole.2 {
        return Ok((whole.0, whole.1));
    }
    let target = tol * whole.0.abs().max(1.0);
    let mut stack = vec![(a, b, target)];
    let mut total = 0.0;
    let mut err = 0.0;
    let mut panels = 0;
    while let Some((lo, hi, t)) = stack.pop() {
        panels += 1;
        let (est, e, ok) = tanh_sinh(f, lo, hi, t.max(f64::MIN_POSITIVE))?;
        if ok && e <= t || panels + stack.len() >= MAX_PANELS || hi - lo <= 1e-13 * lo.abs().max(hi.abs()) {
            total += est;
            err += e;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        stack.push((mid, hi, 0.5 * t));
        stack.push((lo, mid, 0.5 * t));
    }
    if err <= tol * total.abs().max(1.0) {
        Ok((total, err))
    } else if whole.1 <= err {
        Err(Error::Accuracy { estimate: whole.0, error: whole.1 })
    } else {
        Err(Error::Accuracy { estimate: total, error: err })
    }
}

/// One tanh-sinh panel refined level by level. Returns the estimate, the
/// difference between the last two levels, and whether it met `tol`.
fn tanh_sinh<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let half = 0.5 * (b - a);
    let mid = a + half;
    let eval = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation { what: "integrand", x })
        }
    };
    // Node pairs at t = j·h: distance from each end is half·(1 − tanh u).
    let pair = |t: f64| -> Result<Option<f64>> {
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let w = FRAC_PI_2 * t.cosh() / (cu * cu);
        let d = half * (-u).exp() / cu;
        let xl = a + d;
        let xr = b - d;
        if !(xl > a) || !(xr < b) || w == 0.0 {
            return Ok(None);
        }
        Ok(Some(w * (eval(xl)? + eval(xr)?)))
    };
    const T_MAX: f64 = 6.5;
    let mut sum = FRAC_PI_2 * eval(mid)?;
    let mut j = 1;
    loop {
        let t = j as f64;
        if t > T_MAX {
            break;
        }
        match pair(t)? {
            Some(v) => sum += v,
            None => break,
        }
        j += 1;
    }
    let mut h = 1.0;
    let mut prev = half * h * sum;
    for level in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut j = 1usize;
        loop {
            let t = j as f64 * h;
            if t > T_MAX {
                break;
            }
            match pair(t)? {
                Some(v) => sum += v,
                None => break,
            }
            j += 2;
        }
        let est = half * h * sum;
        let diff = (est - prev).abs();
        if level >= 3 && diff <= tol * est.abs().max(1.0) {
            return Ok((est, diff, true));
        }
        if level == MAX_LEVEL {
            return Ok((est, diff, false));
        }
        prev = est;
    }
    unreachable!()
}

/// Classifies `∫_c^e f` at the boundary `e` by probing partial integrals on a
/// geometric ladder and fitting the growth of their increments.
///
/// `f` must be nonnegative near the boundary. An integrand that overflows to
/// `+∞` counts as a ceiling breach.
pub fn classify_improper<F: Fn(f64) -> f64>(
    f: F,
    c: f64,
    boundary: Boundary,
    policy: &ProbePolicy,
) -> Result<Finiteness> {
    policy.validate()?;
    let e = boundary.point();
    if !((boundary.direction() > 0.0 && c < e) || (boundary.direction() < 0.0 && c > e)) {
        return Err(Error::Validation(format!("anchor {c} is not inside toward boundary {e}")));
    }
    let path = ProbePath::new(c, boundary, policy.base_offset);
    let du = policy.du();
    let n = path.usable_probes(policy.probe_count, du);
    if n < 8 {
        return Err(Error::Validation("too few usable probes toward this boundary".into()));
    }
    let mut log_incr = Vec::with_capacity(n);
    for k in 1..=n {
        let (u0, u1) = ((k - 1) as f64 * du, k as f64 * du);
        // Integrate in the probe variable, where the integrand is smooth.
        let g = |u: f64| {
            let y = path.point(u);
            let jac = if path.e.is_finite() {
                (path.c - path.e).abs() * (-u).exp()
            } else {
                path.base * u.exp()
            };
            let v = f(y);
            if v == f64::INFINITY {
                f64::INFINITY
            } else {
                v * jac
            }
        };
        let probe_overflow = (0..=8).any(|i| g(u0 + (u1 - u0) * i as f64 / 8.0) == f64::INFINITY);
        if probe_overflow {
            log_incr.push(f64::INFINITY);
            break;
        }
        let incr = match integrate(&g, u0, u1, policy.tol) {
            Ok((v, _)) => v,
            Err(Error::Evaluation { x: u, .. }) => {
                let y = path.point(u);
                if f(y) == f64::INFINITY {
                    log_incr.push(f64::INFINITY);
                    break;
                }
                return Err(Error::Evaluation { what: "integrand", x: y });
            }
            Err(Error::Accuracy { estimate, .. }) => estimate,
            Err(other) => return Err(other),
        };
        if incr < 0.0 && incr < -policy.tol * 1e3 {
            return Err(Error::Validation(format!(
                "integrand is negative near the boundary (increment {incr:e} before probe {k})"
            )));
        }
        log_incr.push(incr.max(0.0).ln());
    }
    Ok(classify_log_increments(&log_incr, du, policy))
}

/// Shared decision rule on the natural logs of successive probe increments.
/// A `+∞` entry marks overflow and decides Infinite immediately.
pub(crate) fn classify_log_increments(log_incr: &[f64], du: f64, policy: &ProbePolicy) -> Finiteness {
    if log_incr.iter().any(|v| *v == f64::INFINITY) {
        return Finiteness::Infinite { rate: None };
    }
    if log_incr.iter().any(|v| v.is_nan()) {
        return Finiteness::Inconclusive;
    }
    let log_total = log_sum(log_incr);
    let n = log_incr.len();

    let start = n / 4;
    // The ceiling is measured against the size of the early increments when
    // those exceed one, so a finite integral of a large integrand is not
    // mistaken for a divergent one.
    let log_scale = log_incr[..start.max(1)].iter().cloned().fold(0.0_f64, f64::max);
    let over_ceiling = |log_total: f64| log_total - log_scale > policy.ceiling.ln();
    let tail = &log_incr[start..];
    if tail.iter().all(|v| *v == f64::NEG_INFINITY) {
        let total = log_total.exp();
        return Finiteness::Finite { estimate: Some(total), error: Some(0.0) };
    }
    // Once increments underflow to zero after being positive the tail is gone.
    let last_pos = log_incr.iter().rposition(|v| *v > f64::NEG_INFINITY).unwrap_or(0);
    if last_pos + 1 < n && last_pos >= start {
        if over_ceiling(log_total) {
            return Finiteness::Infinite { rate: None };
        }
        let total = log_total.exp();
        return Finiteness::Finite { estimate: Some(total), error: Some(0.0) };
    }
    if log_incr[start..].iter().any(|v| *v == f64::NEG_INFINITY) {
        return Finiteness::Inconclusive;
    }

    let q = (n - start) / 3;
    let w0 = start..start + q;
    let w1 = start + q..start + 2 * q;
    let w2 = start + 2 * q..n;
    let p0 = slope(log_incr, w0, du);
    let p1 = slope(log_incr, w1.clone(), du);
    let p2 = slope(log_incr, w2.clone(), du);
    let d1 = p1 - p0;
    let d2 = p2 - p1;
    let contracting = d1 * d2 > 0.0 && d2.abs() < 0.8 * d1.abs();
    let p_lim = if contracting {
        let r = d2 / d1;
        p2 + d2 * r / (1.0 - r)
    } else {
        p2
    };
    let settled = contracting || d2.abs() <= policy.trend_limit;
    // A rising slope may be creeping up like −1/u (iterated-log divergence),
    // which geometric extrapolation underestimates. Fitting p∞ + c/u through
    // the last two windows gives the pessimistic limit for a Finite verdict.
    let centre = |w: &std::ops::Range<usize>| du * (w.start + w.end - 1) as f64 / 2.0;
    let (u1, u2) = (centre(&w1), centre(&w2));
    let p_harmonic = if u1 > 0.0 { (p2 * u2 - p1 * u1) / (u2 - u1) } else { p2 };
    let p_fin = if d2 > 0.0 { p_lim.max(p_harmonic) } else { p_lim };

    if over_ceiling(log_total) {
        return Finiteness::Infinite { rate: Some(p2) };
    }
    let upward_ok = settled || d2 < 0.0;
    let downward_ok = settled || d2 > 0.0;
    if p2 >= -policy.infinite_slope && p_lim >= -policy.infinite_slope && downward_ok {
        return Finiteness::Infinite { rate: Some(p_lim) };
    }
    if p2 <= -policy.finite_slope && p_fin <= -policy.finite_slope && upward_ok {
        let total = log_total.exp();
        let last = log_incr[n - 1];
        let tail_at = |p: f64| {
            let r = (p * du).exp();
            (last + (r / (1.0 - r)).ln()).exp()
        };
        let tail = tail_at(p_fin.max(p2));
        let spread = (tail_at(p1.min(-policy.finite_slope)) - tail).abs();
        return Finiteness::Finite {
            estimate: Some(total + tail),
            error: Some(spread + 1e-12 * total),
        };
    }
    Finiteness::Inconclusive
}

/// Least-squares slope of `ys[range]` against `k·du`.
fn slope(ys: &[f64], range: std::ops::Range<usize>, du: f64) -> f64 {
    let m = range.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for k in range {
        let x = k as f64 * du;
        let y = ys[k];
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (m * sxy - sx * sy) / (m * sxx - sx * sx)
}

/// `ln Σ exp(v)` without overflow.
pub(crate) fn log_sum(vs: &[f64]) -> f64 {
    let m = vs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    m + vs.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}
