//! Scale function, test functions and boundary profiles.
//!
//! With `A(y) = ∫_c^y 2μ/σ²`, the scale density is `s′ = e^{−A}` and the test
//! functions are evaluated in the swapped form
//!
//! ```text
//! v(x)   = ∫_c^x s′(z) M(z) dz,    M(z)   = ∫_c^z 2/(s′σ²)
//! v_b(x) = ∫_c^x s′(z) M_b(z) dz,  M_b(z) = ∫_c^z 2b²/(s′σ²)
//! ```
//!
//! which equals `∫_c^x (s(x) − s(y))·2/(s′σ²) dy` by Fubini and avoids the
//! cancellation in `s(x) − s(y)`.
//!
//! Toward a boundary the product `G = s′·M` obeys `G′ = −(2μ/σ²)G + 2/σ²`
//! (in the direction of travel), which stays well scaled even where `s′` and
//! `M` separately over- or underflow. The boundary sweep integrates that
//! equation with an exponential integrator along the geometric probe path and
//! keeps `s` in log space.

use crate::error::{Error, Result};
use crate::model::{under, DiffusionSpec, Measure};
use crate::quad::{classify_log_increments, integrate, log_sum, Boundary, Finiteness, ProbePath, ProbePolicy};

/// Finiteness of `s`, `v` and `v_b` at both ends of the interval under one
/// measure. `s_left` finite means `s(ℓ) > −∞`; `s_right` finite means
/// `s(r) < ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryProfile {
    pub measure: Measure,
    pub s_left: Finiteness,
    pub s_right: Finiteness,
    pub v_left: Finiteness,
    pub v_right: Finiteness,
    pub vb_left: Finiteness,
    pub vb_right: Finiteness,
}

/// Field names in a fixed order, for reports and diagnostics.
pub const PROFILE_FIELDS: [&str; 6] = ["s_left", "s_right", "v_left", "v_right", "vb_left", "vb_right"];

impl BoundaryProfile {
    pub fn fields(&self) -> [Finiteness; 6] {
        [self.s_left, self.s_right, self.v_left, self.v_right, self.vb_left, self.vb_right]
    }

    pub fn field(&self, name: &str) -> Option<Finiteness> {
        PROFILE_FIELDS.iter().position(|f| *f == name).map(|i| self.fields()[i])
    }

    pub fn from_fields(measure: Measure, f: [Finiteness; 6]) -> BoundaryProfile {
        BoundaryProfile {
            measure,
            s_left: f[0],
            s_right: f[1],
            v_left: f[2],
            v_right: f[3],
            vb_left: f[4],
            vb_right: f[5],
        }
    }

    /// Field-by-field equality of the Finite/Infinite/Inconclusive verdicts.
    pub fn same_kinds(&self, other: &BoundaryProfile) -> bool {
        self.fields().iter().zip(other.fields().iter()).all(|(a, b)| a.same_kind(b))
    }

    /// Names of fields on which the verdicts differ.
    pub fn differing_fields(&self, other: &BoundaryProfile) -> Vec<&'static str> {
        PROFILE_FIELDS
            .iter()
            .zip(self.fields().iter().zip(other.fields().iter()))
            .filter(|(_, (a, b))| !a.same_kind(b))
            .map(|(n, _)| *n)
            .collect()
    }

    /// Checks that an infinite `s` at a boundary comes with infinite `v` and
    /// `v_b` there. A `v_b` measured as exactly zero is exempt: `b` vanishes on
    /// that whole side and the implication does not apply.
    pub fn consistency(&self) -> std::result::Result<(), String> {
        let sides = [
            ("left", self.s_left, self.v_left, self.vb_left),
            ("right", self.s_right, self.v_right, self.vb_right),
        ];
        for (side, s, v, vb) in sides {
            if s.is_infinite() && v.is_finite() {
                return Err(format!("s is infinite at the {side} boundary but v is finite"));
            }
            if s.is_infinite() && vb.is_finite() && vb.estimate() != Some(0.0) {
                return Err(format!("s is infinite at the {side} boundary but v_b is finite"));
            }
        }
        Ok(())
    }
}

/// Probe schedule for [`boundary_profile`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePolicy {
    pub probe: ProbePolicy,
    /// Integration steps between consecutive probes.
    pub substeps: usize,
}

impl Default for ProfilePolicy {
    fn default() -> Self {
        ProfilePolicy { probe: ProbePolicy { probe_count: 48, ..ProbePolicy::default() }, substeps: 64 }
    }
}

/// `s′(x) = exp(−∫_c^x 2μ/σ²)`.
pub fn scale_density(spec: &DiffusionSpec, x: f64) -> Result<f64> {
    check_inside(spec, x)?;
    let c = spec.reference();
    if x == c {
        return Ok(1.0);
    }
    let q = |y: f64| 2.0 * spec.mu(y) / spec.sigma(y).powi(2);
    let (a, b, sign) = if x > c { (c, x, 1.0) } else { (x, c, -1.0) };
    let (v, _) = integrate(q, a, b, 1e-13)?;
    Ok((-sign * v).exp())
}

/// `s(x) = ∫_c^x s′(y) dy`, so `s(c) = 0`.
pub fn scale_function(spec: &DiffusionSpec, x: f64) -> Result<f64> {
    check_inside(spec, x)?;
    let c = spec.reference();
    if x == c {
        return Ok(0.0);
    }
    let (a, b, sign) = if x > c { (c, x, 1.0) } else { (x, c, -1.0) };
    let density = |y: f64| scale_density(spec, y).unwrap_or(f64::NAN);
    let (v, _) = integrate(density, a, b, 1e-12)?;
    Ok(sign * v)
}

/// `(v(x), v_b(x))`, computed in the swapped form by a fourth-order
/// Runge–Kutta march from `c` to `x` with step doubling until successive
/// results agree to 1e-11.
pub fn test_functions(spec: &DiffusionSpec, x: f64) -> Result<(f64, f64)> {
    check_inside(spec, x)?;
    let c = spec.reference();
    if x == c {
        return Ok((0.0, 0.0));
    }
    let mut n = 256;
    let mut prev = rk4_test_functions(spec, c, x, n)?;
    loop {
        n *= 2;
        let cur = rk4_test_functions(spec, c, x, n)?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-11 * a.abs().max(1e-300);
        if close(cur.0, prev.0) && close(cur.1, prev.1) {
            return Ok(cur);
        }
        if n >= 1 << 20 {
            return Err(Error::Accuracy { estimate: cur.0, error: (cur.0 - prev.0).abs() });
        }
        prev = cur;
    }
}

fn rk4_test_functions(spec: &DiffusionSpec, c: f64, x: f64, n: usize) -> Result<(f64, f64)> {
    // State: A, M, M_b, V, V_b.
    let rhs = |y: f64, s: &[f64; 5]| -> Result<[f64; 5]> {
        let (mu, sig, b) = (spec.mu(y), spec.sigma(y), spec.b(y));
        let s2 = sig * sig;
        let ea = s[0].exp();
        let out = [2.0 * mu / s2, 2.0 * ea / s2, 2.0 * b * b * ea / s2, s[1] / ea, s[2] / ea];
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::Evaluation { what: "test-function integrand", x: y })
        }
    };
    let h = (x - c) / n as f64;
    let mut s = [0.0; 5];
    let add = |s: &[f64; 5], k: &[f64; 5], w: f64| -> [f64; 5] {
        let mut o = *s;
        for i in 0..5 {
            o[i] += w * k[i];
        }
        o
    };
    for i in 0..n {
        let y = c + h * i as f64;
        let k1 = rhs(y, &s)?;
        let k2 = rhs(y + 0.5 * h, &add(&s, &k1, 0.5 * h))?;
        let k3 = rhs(y + 0.5 * h, &add(&s, &k2, 0.5 * h))?;
        let k4 = rhs(y + h, &add(&s, &k3, h))?;
        for j in 0..5 {
            s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    Ok((s[3], s[4]))
}

fn check_inside(spec: &DiffusionSpec, x: f64) -> Result<()> {
    let (l, r) = spec.interval();
    if x > l && x < r && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("x = {x} is not inside ({l}, {r})")))
    }
}

/// Per-probe increments of `s`, `v`, `v_b` toward one boundary, in log form.
#[derive(Debug, Clone)]
pub(crate) struct Sweep {
    pub log_s: Vec<f64>,
    pub log_v: Vec<f64>,
    pub log_vb: Vec<f64>,
    /// Increments of `v`, `v_b` with the inner integral started at probe
    /// `probes / 8` instead of at `c`; zero before it.
    pub log_v_anchored: Vec<f64>,
    pub log_vb_anchored: Vec<f64>,
}

fn log_phi1(z: f64) -> f64 {
    // ln((e^z − 1)/z)
    if z.abs() < 1e-8 {
        z / 2.0
    } else if z > 30.0 {
        z - z.ln() + (-(-z).exp()).ln_1p()
    } else {
        (z.exp_m1() / z).ln()
    }
}

fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 + z / 2.0
    } else {
        z.exp_m1() / z
    }
}

fn phi2(z: f64) -> f64 {
    // (e^z − 1 − z)/z²
    if z.abs() < 1e-2 {
        0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z * (1.0 / 120.0 + z / 720.0)))
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

pub(crate) fn sweep(
    spec: &DiffusionSpec,
    boundary: Boundary,
    probes: usize,
    du: f64,
    substeps: usize,
    base: Option<f64>,
) -> Result<Sweep> {
    let path = ProbePath::new(spec.reference(), boundary, base);
    let dir = path.dir;
    let c = path.c;
    let coeffs = |y: f64| -> Result<(f64, f64, f64)> {
        let (mu, sig, b) = (spec.mu(y), spec.sigma(y), spec.b(y));
        let s2 = sig * sig;
        let q = 2.0 * mu / s2;
        if q.is_nan() || s2.is_nan() || b.is_nan() || s2 == 0.0 {
            return Err(Error::Evaluation { what: "boundary sweep coefficient", x: y });
        }
        Ok((dir * q, 2.0 / s2, 2.0 * b * b / s2))
    };
    let anchor = probes / 8;
    let mut out = Sweep {
        log_s: Vec::with_capacity(probes),
        log_v: Vec::new(),
        log_vb: Vec::new(),
        log_v_anchored: Vec::new(),
        log_vb_anchored: Vec::new(),
    };
    let (mut a, mut g, mut gb) = (0.0_f64, 0.0_f64, 0.0_f64);
    let (mut ga, mut gba) = (0.0_f64, 0.0_f64);
    let dstep = du / substeps as f64;
    let mut x0 = 0.0;
    let mut lam0 = coeffs(c)?.0;
    for k in 0..probes {
        let mut s_terms = Vec::with_capacity(substeps);
        let (mut dv, mut dvb) = (0.0_f64, 0.0_f64);
        let (mut dva, mut dvba) = (0.0_f64, 0.0_f64);
        for j in 0..substeps {
            let u1 = k as f64 * du + (j + 1) as f64 * dstep;
            let x1 = path.travelled(u1);
            let h = x1 - x0;
            if !(h > 0.0) {
                continue;
            }
            let xm = x0 + 0.5 * h;
            let (lam_m, f, fb) = coeffs(c + dir * xm)?;
            let lam1 = coeffs(c + dir * x1)?.0;
            let da = h / 6.0 * (lam0 + 4.0 * lam_m + lam1);
            let z = -da;
            s_terms.push(-a + h.ln() + log_phi1(z));
            let p1 = phi1(z);
            let decay = (-da).exp();
            let own_v = f * h * h * phi2(z);
            let own_vb = fb * h * h * phi2(z);
            let carry = |acc: f64| if acc == 0.0 { 0.0 } else { acc * h * p1 };
            dv += carry(g) + own_v;
            dvb += carry(gb) + own_vb;
            g = advance(g, decay, f * h * p1);
            gb = advance(gb, decay, fb * h * p1);
            if k >= anchor {
                dva += carry(ga) + own_v;
                dvba += carry(gba) + own_vb;
                ga = advance(ga, decay, f * h * p1);
                gba = advance(gba, decay, fb * h * p1);
            }
            a += da;
            x0 = x1;
            lam0 = lam1;
        }
        out.log_s.push(log_sum(&s_terms));
        out.log_v.push(log_incr(dv));
        out.log_vb.push(log_incr(dvb));
        out.log_v_anchored.push(log_incr(dva));
        out.log_vb_anchored.push(log_incr(dvba));
    }
    Ok(out)
}

/// One step of the inner-integral recursion `g ← e^{−Δa}·g + Δ`; NaN from
/// `∞·0` means the accumulator has already overflowed.
fn advance(g: f64, decay: f64, delta: f64) -> f64 {
    let next = if g == 0.0 { 0.0 } else { decay * g } + delta;
    if next.is_nan() {
        f64::INFINITY
    } else {
        next
    }
}

fn log_incr(d: f64) -> f64 {
    if d.is_nan() {
        f64::INFINITY
    } else {
        d.max(0.0).ln()
    }
}

/// Classifies `s`, `v` and `v_b` at both boundaries of `spec` viewed under
/// `measure`, with the default probe schedule.
pub fn boundary_profile(spec: &DiffusionSpec, measure: Measure) -> Result<BoundaryProfile> {
    boundary_profile_with(spec, measure, &ProfilePolicy::default())
}

pub fn boundary_profile_with(spec: &DiffusionSpec, measure: Measure, policy: &ProfilePolicy) -> Result<BoundaryProfile> {
    let view = under(spec, measure);
    let (l, r) = view.interval();
    let left = side_profile(&view, Boundary::Left(l), policy)?;
    let right = side_profile(&view, Boundary::Right(r), policy)?;
    let profile = BoundaryProfile {
        measure,
        s_left: left.0,
        s_right: right.0,
        v_left: left.1,
        v_right: right.1,
        vb_left: left.2,
        vb_right: right.2,
    };
    profile.consistency().map_err(Error::Inconsistent)?;
    Ok(profile)
}

/// Mass of the inner integral far from the boundary adds a multiple of the
/// `s` increments to those of `v`, which can mask a slow divergence for
/// longer than the probes reach. The anchored increments drop that mass and
/// decide; the full ones only supply the value.
fn anchored_verdict(full: &[f64], anchored: &[f64], du: f64, p: &ProbePolicy) -> Finiteness {
    match classify_log_increments(anchored, du, p) {
        Finiteness::Finite { error, .. } => match classify_log_increments(full, du, p) {
            f @ Finiteness::Finite { .. } => f,
            _ => Finiteness::Finite { estimate: None, error },
        },
        other => other,
    }
}

fn side_profile(spec: &DiffusionSpec, side: Boundary, policy: &ProfilePolicy) -> Result<(Finiteness, Finiteness, Finiteness)> {
    let p = &policy.probe;
    p.validate()?;
    if policy.substeps < 2 {
        return Err(Error::Validation("substeps must be at least 2".into()));
    }
    let du = p.du();
    let path = ProbePath::new(spec.reference(), side, p.base_offset);
    let n = path.usable_probes(p.probe_count, du);
    if n < 8 {
        return Err(Error::Validation(format!(
            "reference point {} is too close to the boundary {} to probe",
            spec.reference(),
            side.point()
        )));
    }
    let fine = sweep(spec, side, n, du, policy.substeps, p.base_offset)?;
    let s = classify_log_increments(&fine.log_s, du, p);
    let v = anchored_verdict(&fine.log_v, &fine.log_v_anchored, du, p);
    let vb = anchored_verdict(&fine.log_vb, &fine.log_vb_anchored, du, p);
    // Sharpen the limit of s by Richardson extrapolation against a coarser sweep.
    let s = match s {
        Finiteness::Finite { estimate: Some(e_fine), error: Some(err) } => {
            let coarse = sweep(spec, side, n, du, policy.substeps / 2, p.base_offset)?;
            match classify_log_increments(&coarse.log_s, du, p) {
                Finiteness::Finite { estimate: Some(e_coarse), .. } => {
                    let e = (4.0 * e_fine - e_coarse) / 3.0;
                    Finiteness::Finite { estimate: Some(e), error: Some(err + (e - e_fine).abs()) }
                }
                _ => s,
            }
        }
        other => other,
    };
    Ok((s, v, vb))
}
